#pragma once

#include <optional>
#include <string>

#include "xmreg/matcher.hpp"
#include "xmreg/pnp.hpp"
#include "xmreg/supervision.hpp"

namespace xmreg {

struct MatcherParams {
  double theta_c = 0.2;
  double sim_temperature = 0.1;
  double fine_temperature = 1.0;
  int window = 5;
  int fill_radius = 8;
  // Extra match/solve passes that re-render the virtual LiDAR view with the
  // latest pose estimate. Re-rendering shrinks the apparent displacement
  // between the two views, which suppresses the displacement-dependent bias
  // of the correlation refinement. 0 = single pass.
  int rerender_iterations = 0;
};

enum class PipelineStatus { success, insufficient_correspondences, no_consensus };

struct PipelineResult {
  PipelineStatus status = PipelineStatus::success;
  Projection projection;  // virtual LiDAR view (identity pose)
  CoarseMatchSet coarse;
  std::vector<FineMatch> fine;
  std::vector<Correspondence3D2D> correspondences;
  LiftStats lift_stats;
  std::optional<PoseEstimate> estimate;
};

// Full hand-crafted-feature pipeline: project → features → coarse match →
// refine → lift → EPnP+RANSAC. The repeatability prior comes from per-cell
// LiDAR return coverage (no trained MLP in this mode).
PipelineResult calibrate(const PointCloud4D& cloud, const GrayImage& camera_image,
                         const CameraIntrinsics& K, const MatcherParams& mp,
                         const RansacConfig& rc);

// Per-cell fraction of valid LiDAR pixels, clamped into (0, 1); the
// coverage-driven stand-in for the learned repeatability score.
Eigen::VectorXd coverage_repeatability(const Mask& validity, int cell_rows, int cell_cols);

std::string format_match_dump(const std::vector<FineMatch>& fine, const MatcherParams& mp);

}  // namespace xmreg
