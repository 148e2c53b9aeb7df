#include "xmreg/pipeline.hpp"

#include <sstream>

namespace xmreg {

Eigen::VectorXd coverage_repeatability(const Mask& validity, int cell_rows, int cell_cols) {
  Eigen::VectorXd scores(cell_rows * cell_cols);
  const int h = static_cast<int>(validity.rows());
  const int w = static_cast<int>(validity.cols());
  for (int r = 0; r < cell_rows; ++r) {
    for (int c = 0; c < cell_cols; ++c) {
      int valid = 0, total = 0;
      for (int dy = 0; dy < 8; ++dy) {
        for (int dx = 0; dx < 8; ++dx) {
          const int y = 8 * r + dy, x = 8 * c + dx;
          if (y >= h || x >= w) continue;
          ++total;
          if (validity(y, x)) ++valid;
        }
      }
      const double frac = total > 0 ? static_cast<double>(valid) / total : 0.0;
      scores(r * cell_cols + c) = std::clamp(frac, 0.01, 0.99);
    }
  }
  return scores;
}

namespace {

// One project → match → lift → solve pass against a fixed rendering pose.
// Lifted 3D points are mapped back into the LiDAR frame so the PnP estimate
// is always the full LiDAR → camera extrinsics.
PipelineResult calibrate_pass(const PointCloud4D& cloud, const GrayImage& camera_image,
                              const CameraIntrinsics& K, const MatcherParams& mp,
                              const RansacConfig& rc, const RigidTransform& render_pose) {
  PipelineResult out;
  out.projection = project(cloud, render_pose, K);

  // densify the sparse intensity raster before descriptor extraction
  Grid lidar_img = out.projection.intensity.pixels;
  Mask lidar_mask = out.projection.intensity.validity;
  fill_nearest(lidar_img, lidar_mask, mp.fill_radius);

  const FeaturePyramid pyr_lidar = extract_handcrafted(lidar_img);
  const FeaturePyramid pyr_cam = extract_handcrafted(camera_image.pixels);

  const SimilarityMatrix sim =
      cosine_similarity(pyr_lidar.coarse.tokens, pyr_cam.coarse.tokens, mp.sim_temperature);
  const Eigen::MatrixXd p_c = dual_softmax(sim.values);
  const Eigen::VectorXd rep = coverage_repeatability(
      out.projection.intensity.validity, pyr_lidar.coarse.rows, pyr_lidar.coarse.cols);
  const Eigen::MatrixXd s = fuse_confidence(p_c, rep);

  out.coarse = extract_coarse_matches(s, mp.theta_c);
  RefineConfig rcfg;
  rcfg.window = mp.window;
  rcfg.temperature = mp.fine_temperature;
  out.fine = refine(out.coarse, pyr_lidar, pyr_cam, rcfg, nullptr);

  const DepthMap filled = fill_depth_nearest(out.projection.depth, mp.fill_radius);
  out.correspondences = lift_matches(out.fine, filled, K, &out.projection.depth.validity,
                                     &out.lift_stats);
  const RigidTransform render_inv = render_pose.inverse();
  for (auto& c : out.correspondences) c.point3d = render_inv.apply(c.point3d);
  if (out.correspondences.size() < 4) {
    out.status = PipelineStatus::insufficient_correspondences;
    return out;
  }
  try {
    out.estimate = ransac_pnp(out.correspondences, K, rc);
  } catch (const NoConsensus&) {
    out.status = PipelineStatus::no_consensus;
  } catch (const InsufficientCorrespondences&) {
    out.status = PipelineStatus::insufficient_correspondences;
  }
  return out;
}

}  // namespace

PipelineResult calibrate(const PointCloud4D& cloud, const GrayImage& camera_image,
                         const CameraIntrinsics& K, const MatcherParams& mp,
                         const RansacConfig& rc) {
  PipelineResult out =
      calibrate_pass(cloud, camera_image, K, mp, rc, RigidTransform::identity());
  for (int pass = 0; pass < mp.rerender_iterations; ++pass) {
    if (out.status != PipelineStatus::success || !out.estimate) break;
    PipelineResult next =
        calibrate_pass(cloud, camera_image, K, mp, rc, out.estimate->transform);
    // a failed re-render pass must not discard an already-valid estimate
    if (next.status != PipelineStatus::success || !next.estimate) break;
    out = std::move(next);
  }
  return out;
}

std::string format_match_dump(const std::vector<FineMatch>& fine, const MatcherParams& mp) {
  std::ostringstream ss;
  ss << "# theta_c=" << mp.theta_c << " w=" << mp.window
     << " temp_sim=" << mp.sim_temperature << " temp_fine=" << mp.fine_temperature << "\n";
  ss.precision(10);
  for (const auto& m : fine) {
    ss << m.u0 << " " << m.v0 << " " << m.u1 << " " << m.v1 << " " << m.confidence << " "
       << m.tau2 << "\n";
  }
  return ss.str();
}

}  // namespace xmreg
