#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "xmreg/geometry.hpp"
#include "xmreg/matcher.hpp"

namespace xmreg {

struct GtMatchSet {
  std::vector<std::pair<int, int>> pairs;  // (lidar cell index, camera cell index)
  double rho = 0;                          // reprojection threshold (pixels)
};

// Back-projects each valid lidar coarse-cell center with its depth,
// transforms by gt_pose and reprojects into the camera coarse grid.
// One-to-one via nearest-reprojection filtering; pairs at distance ≥ ρ drop.
GtMatchSet gt_coarse_matches(const DepthMap& d_lidar, const CameraIntrinsics& K_lidar,
                             const CameraIntrinsics& K_cam, const RigidTransform& gt_pose,
                             double rho);

struct GtRepeatabilityMap {
  int rows = 0, cols = 0;
  Mask labels;       // rows×cols binary
  double delta_d = 0;  // relative depth tolerance
};

// Depth-consistency labels per coarse cell, from the cell's top-left corner
// pixel. Out-of-bounds reprojections and missing depths label 0.
GtRepeatabilityMap gt_repeatability(const DepthMap& d_lidar, const DepthMap& d_cam_gt,
                                    const CameraIntrinsics& K_lidar,
                                    const CameraIntrinsics& K_cam,
                                    const RigidTransform& gt_pose, double delta_d);

struct CoarseLoss {
  double value = 0;
  Eigen::MatrixXd grad;  // w.r.t. the confidence matrix
  int clamp_count = 0;   // gt entries clamped at 1e-12
};

// L_c = −(1/|M|) Σ log S(i,j) over gt pairs.
CoarseLoss loss_coarse(const Eigen::MatrixXd& s, const GtMatchSet& gt);

struct FineLoss {
  double value = 0;
  std::vector<Eigen::Vector2d> grad;  // w.r.t. refined camera positions (pixels)
};

// Inverse-variance-weighted mean of ℓ2 errors; τ² is a stop-gradient
// weight. `squared` switches to the squared-norm variant.
FineLoss loss_fine(const std::vector<FineMatch>& fine,
                   const std::vector<Eigen::Vector2d>& gt_pixels, bool squared = false);

struct RepeatabilityLoss {
  double value = 0;
  Eigen::VectorXd grad;  // w.r.t. pre-sigmoid logits: (σ(z) − label)/N
  int clamp_count = 0;
};

// Mean binary cross-entropy over all coarse cells; labels row-major.
RepeatabilityLoss loss_repeatability(const Eigen::VectorXd& logits,
                                     const std::vector<int>& labels);

struct LossReport {
  double coarse = 0, fine = 0, repeatability = 0, total = 0;
  int coarse_terms = 0, fine_terms = 0, repeatability_terms = 0;
};

LossReport total_loss(const CoarseLoss& lc, int coarse_terms, const FineLoss& lf,
                      int fine_terms, const RepeatabilityLoss& lr, int rep_terms);

}  // namespace xmreg
