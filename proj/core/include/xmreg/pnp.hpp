#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "xmreg/geometry.hpp"
#include "xmreg/matcher.hpp"

namespace xmreg {

struct Correspondence3D2D {
  Eigen::Vector3d point3d;   // LiDAR frame, meters
  Eigen::Vector2d pixel2d;   // camera image, pixels
  double weight = 1.0;
  bool from_filled_depth = false;
};

struct LiftStats {
  int dropped_no_depth = 0;
  int filled = 0;
};

// Lifts lidar-side match pixels to 3D through the (nearest-neighbor filled)
// depth map. `original_validity`, when given, marks which depths were
// borrowed by the fill. Matches without depth after filling are dropped.
std::vector<Correspondence3D2D> lift_matches(const std::vector<FineMatch>& fine,
                                             const DepthMap& d_filled,
                                             const CameraIntrinsics& K_lidar,
                                             const Mask* original_validity = nullptr,
                                             LiftStats* stats = nullptr);

// EPnP (4 control points; 3-control-point branch for coplanar input):
// barycentric coordinates, M-matrix null space, β-case selection with
// Gauss-Newton refinement, closed-form control-point alignment. Returns the
// candidate with least reprojection error.
RigidTransform epnp(const std::vector<Correspondence3D2D>& corrs, const CameraIntrinsics& K);

struct PoseEstimate {
  RigidTransform transform;  // LiDAR → camera
  std::vector<bool> inlier_mask;
  double mean_reprojection_error = 0;  // over inliers, pixels
  int iterations_used = 0;
};

struct RansacConfig {
  int max_iters = 1000;
  double inlier_threshold = 4.0;  // pixels
  double confidence = 0.999;
  uint64_t seed = 0;
};

PoseEstimate ransac_pnp(const std::vector<Correspondence3D2D>& corrs,
                        const CameraIntrinsics& K, const RansacConfig& cfg);

double reprojection_error(const RigidTransform& T, const Correspondence3D2D& c,
                          const CameraIntrinsics& K);

}  // namespace xmreg
