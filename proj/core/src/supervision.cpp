#include "xmreg/supervision.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace xmreg {

namespace {

constexpr double kLogClamp = 1e-12;

inline int coarse_cells(int pixels) { return (pixels + 7) / 8; }

}  // namespace

GtMatchSet gt_coarse_matches(const DepthMap& d_lidar, const CameraIntrinsics& K_lidar,
                             const CameraIntrinsics& K_cam, const RigidTransform& gt_pose,
                             double rho) {
  const int rows0 = coarse_cells(d_lidar.height());
  const int cols0 = coarse_cells(d_lidar.width());
  const int rows1 = coarse_cells(K_cam.height);
  const int cols1 = coarse_cells(K_cam.width);

  // Best (nearest-reprojection) lidar candidate per camera cell.
  std::map<int, std::pair<int, double>> best;  // j -> (i, distance)
  for (int r = 0; r < rows0; ++r) {
    for (int c = 0; c < cols0; ++c) {
      const int u = 8 * c + 4, v = 8 * r + 4;
      if (u >= d_lidar.width() || v >= d_lidar.height()) continue;
      if (!d_lidar.validity(v, u)) continue;
      const Eigen::Vector3d p = back_project(u, v, d_lidar.depths(v, u), K_lidar);
      const Eigen::Vector3d q = gt_pose.apply(p);
      if (q.z() <= 0) continue;
      const double uc = K_cam.fx * q.x() / q.z() + K_cam.cx;
      const double vc = K_cam.fy * q.y() / q.z() + K_cam.cy;
      if (uc < 0 || uc >= K_cam.width || vc < 0 || vc >= K_cam.height) continue;
      const int jc = static_cast<int>(uc / 8), jr = static_cast<int>(vc / 8);
      if (jc >= cols1 || jr >= rows1) continue;
      const double du = uc - (8 * jc + 4), dv = vc - (8 * jr + 4);
      const double dist = std::sqrt(du * du + dv * dv);
      if (dist >= rho) continue;
      const int i = r * cols0 + c;
      const int j = jr * cols1 + jc;
      auto it = best.find(j);
      if (it == best.end() || dist < it->second.second) {
        best[j] = {i, dist};
      }
    }
  }

  GtMatchSet out;
  out.rho = rho;
  for (const auto& [j, cand] : best) out.pairs.emplace_back(cand.first, j);
  return out;
}

GtRepeatabilityMap gt_repeatability(const DepthMap& d_lidar, const DepthMap& d_cam_gt,
                                    const CameraIntrinsics& K_lidar,
                                    const CameraIntrinsics& K_cam,
                                    const RigidTransform& gt_pose, double delta_d) {
  GtRepeatabilityMap out;
  out.rows = coarse_cells(d_lidar.height());
  out.cols = coarse_cells(d_lidar.width());
  out.delta_d = delta_d;
  out.labels = Mask::Constant(out.rows, out.cols, false);

  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      const int u = 8 * c, v = 8 * r;
      if (u >= d_lidar.width() || v >= d_lidar.height()) continue;
      if (!d_lidar.validity(v, u)) continue;
      const Eigen::Vector3d p = back_project(u, v, d_lidar.depths(v, u), K_lidar);
      const Eigen::Vector3d q = gt_pose.apply(p);
      if (q.z() <= 0) continue;
      const double uc = K_cam.fx * q.x() / q.z() + K_cam.cx;
      const double vc = K_cam.fy * q.y() / q.z() + K_cam.cy;
      const long ui = std::lround(uc), vi = std::lround(vc);
      if (ui < 0 || ui >= d_cam_gt.width() || vi < 0 || vi >= d_cam_gt.height()) continue;
      if (!d_cam_gt.validity(vi, ui)) continue;
      const double ref = d_cam_gt.depths(vi, ui);
      if (std::abs(q.z() - ref) / ref <= delta_d) out.labels(r, c) = true;
    }
  }
  return out;
}

CoarseLoss loss_coarse(const Eigen::MatrixXd& s, const GtMatchSet& gt) {
  if (gt.pairs.empty()) throw EmptyGroundTruth("loss_coarse: empty ground truth");
  CoarseLoss out;
  out.grad = Eigen::MatrixXd::Zero(s.rows(), s.cols());
  const double inv_n = 1.0 / static_cast<double>(gt.pairs.size());
  for (const auto& [i, j] : gt.pairs) {
    double v = s(i, j);
    if (v < kLogClamp) {
      v = kLogClamp;
      ++out.clamp_count;
    }
    out.value -= inv_n * std::log(v);
    out.grad(i, j) -= inv_n / v;
  }
  return out;
}

FineLoss loss_fine(const std::vector<FineMatch>& fine,
                   const std::vector<Eigen::Vector2d>& gt_pixels, bool squared) {
  if (fine.empty()) throw EmptyMatchSet("loss_fine: empty match set");
  if (fine.size() != gt_pixels.size()) {
    throw DimensionMismatch("loss_fine: match/target count mismatch");
  }
  FineLoss out;
  out.grad.resize(fine.size());
  const double inv_n = 1.0 / static_cast<double>(fine.size());
  for (size_t k = 0; k < fine.size(); ++k) {
    const Eigen::Vector2d e(fine[k].u1 - gt_pixels[k].x(), fine[k].v1 - gt_pixels[k].y());
    const double w = inv_n / fine[k].tau2;
    if (squared) {
      out.value += w * e.squaredNorm();
      out.grad[k] = 2.0 * w * e;
    } else {
      const double n = e.norm();
      out.value += w * n;
      out.grad[k] = n > 0 ? Eigen::Vector2d(w * e / n) : Eigen::Vector2d::Zero();
    }
  }
  return out;
}

RepeatabilityLoss loss_repeatability(const Eigen::VectorXd& logits,
                                     const std::vector<int>& labels) {
  if (static_cast<size_t>(logits.size()) != labels.size()) {
    throw DimensionMismatch("loss_repeatability: shape mismatch");
  }
  RepeatabilityLoss out;
  const Eigen::Index n = logits.size();
  out.grad.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double p_raw = 1.0 / (1.0 + std::exp(-logits(k)));
    double p = p_raw;
    if (p < kLogClamp) { p = kLogClamp; ++out.clamp_count; }
    if (p > 1.0 - kLogClamp) { p = 1.0 - kLogClamp; ++out.clamp_count; }
    const double y = labels[k] ? 1.0 : 0.0;
    out.value -= inv_n * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    out.grad(k) = inv_n * (p_raw - y);
  }
  return out;
}

LossReport total_loss(const CoarseLoss& lc, int coarse_terms, const FineLoss& lf,
                      int fine_terms, const RepeatabilityLoss& lr, int rep_terms) {
  LossReport r;
  r.coarse = lc.value;
  r.fine = lf.value;
  r.repeatability = lr.value;
  r.total = lc.value + lf.value + lr.value;
  r.coarse_terms = coarse_terms;
  r.fine_terms = fine_terms;
  r.repeatability_terms = rep_terms;
  return r;
}

}  // namespace xmreg
