#include "xmreg/pnp.hpp"

#include <cmath>
#include <limits>

#include "xmreg/rng.hpp"

namespace xmreg {

std::vector<Correspondence3D2D> lift_matches(const std::vector<FineMatch>& fine,
                                             const DepthMap& d_filled,
                                             const CameraIntrinsics& K_lidar,
                                             const Mask* original_validity,
                                             LiftStats* stats) {
  std::vector<Correspondence3D2D> out;
  out.reserve(fine.size());
  LiftStats local;
  for (const auto& m : fine) {
    const long u = std::lround(m.u0), v = std::lround(m.v0);
    if (u < 0 || u >= d_filled.width() || v < 0 || v >= d_filled.height() ||
        !d_filled.validity(v, u)) {
      ++local.dropped_no_depth;
      continue;
    }
    Correspondence3D2D c;
    c.point3d = back_project(m.u0, m.v0, d_filled.depths(v, u), K_lidar);
    c.pixel2d = {m.u1, m.v1};
    c.weight = m.confidence;
    c.from_filled_depth = original_validity != nullptr && !(*original_validity)(v, u);
    if (c.from_filled_depth) ++local.filled;
    out.push_back(c);
  }
  if (stats) *stats = local;
  return out;
}

double reprojection_error(const RigidTransform& T, const Correspondence3D2D& c,
                          const CameraIntrinsics& K) {
  const Eigen::Vector3d q = T.apply(c.point3d);
  if (q.z() <= 0) return std::numeric_limits<double>::infinity();
  const double u = K.fx * q.x() / q.z() + K.cx;
  const double v = K.fy * q.y() / q.z() + K.cy;
  return (Eigen::Vector2d(u, v) - c.pixel2d).norm();
}

namespace {

double mean_reprojection(const RigidTransform& T,
                         const std::vector<Correspondence3D2D>& corrs,
                         const CameraIntrinsics& K) {
  double sum = 0;
  for (const auto& c : corrs) sum += reprojection_error(T, c, K);
  return sum / static_cast<double>(corrs.size());
}

// Rigid alignment world → camera minimizing ‖pc − (R pw + t)‖².
RigidTransform align(const std::vector<Eigen::Vector3d>& pw,
                     const std::vector<Eigen::Vector3d>& pc) {
  const size_t n = pw.size();
  Eigen::Vector3d cw = Eigen::Vector3d::Zero(), cc = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    cw += pw[i];
    cc += pc[i];
  }
  cw /= static_cast<double>(n);
  cc /= static_cast<double>(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < n; ++i) h += (pw[i] - cw) * (pc[i] - cc).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d v = svd.matrixV();
    v.col(2) *= -1;
    r = v * svd.matrixU().transpose();
  }
  return {r, cc - r * cw};
}

struct EpnpProblem {
  int n_ctrl = 4;                              // 3 in the planar branch
  std::vector<Eigen::Vector3d> ctrl_world;
  Eigen::MatrixXd alphas;                      // n × n_ctrl barycentric coords
  Eigen::MatrixXd kernel;                      // (3·n_ctrl) × n_kernel
  std::vector<std::pair<int, int>> pairs;      // control-point index pairs
  Eigen::VectorXd rho;                         // squared control distances
};

// Camera-frame control points for a given β; flips sign if the cloud lands
// behind the camera.
std::vector<Eigen::Vector3d> control_from_betas(const EpnpProblem& pb,
                                                const Eigen::VectorXd& betas,
                                                const Eigen::MatrixXd& alphas) {
  Eigen::VectorXd cc = pb.kernel * betas;
  // depth sign check via the first point's z
  double mean_z = 0;
  for (int i = 0; i < alphas.rows(); ++i) {
    double z = 0;
    for (int j = 0; j < pb.n_ctrl; ++j) z += alphas(i, j) * cc(3 * j + 2);
    mean_z += z;
  }
  if (mean_z < 0) cc = -cc;
  std::vector<Eigen::Vector3d> out(pb.n_ctrl);
  for (int j = 0; j < pb.n_ctrl; ++j) out[j] = cc.segment<3>(3 * j);
  return out;
}

Eigen::VectorXd gauss_newton(const EpnpProblem& pb, Eigen::VectorXd betas, int iters) {
  const int nk = static_cast<int>(pb.kernel.cols());
  const int np = static_cast<int>(pb.pairs.size());
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd jac(np, nk);
    Eigen::VectorXd res(np);
    for (int p = 0; p < np; ++p) {
      const auto [a, b] = pb.pairs[p];
      Eigen::Vector3d diff = Eigen::Vector3d::Zero();
      std::vector<Eigen::Vector3d> dv(nk);
      for (int k = 0; k < nk; ++k) {
        dv[k] = pb.kernel.col(k).segment<3>(3 * a) - pb.kernel.col(k).segment<3>(3 * b);
        diff += betas(k) * dv[k];
      }
      res(p) = diff.squaredNorm() - pb.rho(p);
      for (int k = 0; k < nk; ++k) jac(p, k) = 2.0 * diff.dot(dv[k]);
    }
    Eigen::MatrixXd jtj = jac.transpose() * jac;
    jtj.diagonal().array() += 1e-12;
    betas -= jtj.ldlt().solve(jac.transpose() * res);
  }
  return betas;
}

// β initialization from the linearized distance constraints, for the leading
// 1, 2, or 3 kernel vectors.
Eigen::VectorXd betas_approx(const EpnpProblem& pb, int n_use) {
  const int nk = static_cast<int>(pb.kernel.cols());
  const int np = static_cast<int>(pb.pairs.size());

  // unknowns: b_kl for k<=l over the first n_use vectors
  std::vector<std::pair<int, int>> unknowns;
  for (int k = 0; k < n_use; ++k) {
    for (int l = k; l < n_use; ++l) unknowns.emplace_back(k, l);
  }
  Eigen::MatrixXd a(np, static_cast<Eigen::Index>(unknowns.size()));
  for (int p = 0; p < np; ++p) {
    const auto [i, j] = pb.pairs[p];
    std::vector<Eigen::Vector3d> dv(n_use);
    for (int k = 0; k < n_use; ++k) {
      dv[k] = pb.kernel.col(k).segment<3>(3 * i) - pb.kernel.col(k).segment<3>(3 * j);
    }
    for (size_t u = 0; u < unknowns.size(); ++u) {
      const auto [k, l] = unknowns[u];
      a(p, static_cast<Eigen::Index>(u)) = (k == l ? 1.0 : 2.0) * dv[k].dot(dv[l]);
    }
  }
  Eigen::VectorXd sol =
      a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(pb.rho);

  Eigen::VectorXd betas = Eigen::VectorXd::Zero(nk);
  // b_00 anchors the signs
  double b00 = sol(0);
  const double sign0 = b00 >= 0 ? 1.0 : -1.0;
  betas(0) = std::sqrt(std::abs(b00));
  for (int k = 1; k < n_use; ++k) {
    // b_0k / β0 recovers β_k with a consistent sign
    int idx = -1;
    for (size_t u = 0; u < unknowns.size(); ++u) {
      if (unknowns[u].first == 0 && unknowns[u].second == k) idx = static_cast<int>(u);
    }
    betas(k) = betas(0) > 0 ? sign0 * sol(idx) / betas(0) : 0.0;
  }
  return betas;
}

}  // namespace

RigidTransform epnp(const std::vector<Correspondence3D2D>& corrs, const CameraIntrinsics& K) {
  const int n = static_cast<int>(corrs.size());
  if (n < 4) throw InsufficientCorrespondences("epnp needs at least 4 correspondences");

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& c : corrs) centroid += c.point3d;
  centroid /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& c : corrs) {
    const Eigen::Vector3d d = c.point3d - centroid;
    cov += d * d.transpose();
  }
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);  // ascending eigenvalues
  const Eigen::Vector3d evals = eig.eigenvalues().cwiseMax(0.0);
  if (evals(1) < 1e-12 * std::max(evals(2), 1e-300) || evals(2) <= 0) {
    throw DegenerateConfiguration("epnp: correspondences are (near) collinear");
  }
  const bool planar = evals(0) < 1e-9 * evals(2);

  EpnpProblem pb;
  pb.n_ctrl = planar ? 3 : 4;
  pb.ctrl_world.push_back(centroid);
  for (int j = 0; j < pb.n_ctrl - 1; ++j) {
    const int axis = 2 - j;  // strongest directions first
    pb.ctrl_world.push_back(centroid + std::sqrt(evals(axis)) * eig.eigenvectors().col(axis));
  }

  // barycentric coordinates
  pb.alphas.resize(n, pb.n_ctrl);
  {
    Eigen::MatrixXd basis(3, pb.n_ctrl - 1);
    for (int j = 1; j < pb.n_ctrl; ++j) basis.col(j - 1) = pb.ctrl_world[j] - pb.ctrl_world[0];
    const Eigen::MatrixXd pinv =
        (basis.transpose() * basis).ldlt().solve(basis.transpose()).eval();
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd a = pinv * (corrs[i].point3d - pb.ctrl_world[0]);
      pb.alphas(i, 0) = 1.0 - a.sum();
      for (int j = 1; j < pb.n_ctrl; ++j) pb.alphas(i, j) = a(j - 1);
    }
  }

  // M matrix null space
  const int dim = 3 * pb.n_ctrl;
  Eigen::MatrixXd m(2 * n, dim);
  for (int i = 0; i < n; ++i) {
    const double u = corrs[i].pixel2d.x(), v = corrs[i].pixel2d.y();
    for (int j = 0; j < pb.n_ctrl; ++j) {
      const double a = pb.alphas(i, j);
      m(2 * i, 3 * j) = a * K.fx;
      m(2 * i, 3 * j + 1) = 0;
      m(2 * i, 3 * j + 2) = a * (K.cx - u);
      m(2 * i + 1, 3 * j) = 0;
      m(2 * i + 1, 3 * j + 1) = a * K.fy;
      m(2 * i + 1, 3 * j + 2) = a * (K.cy - v);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> meig(m.transpose() * m);
  const int n_kernel = planar ? 3 : 4;
  pb.kernel = meig.eigenvectors().leftCols(n_kernel);  // ascending: smallest first

  for (int a = 0; a < pb.n_ctrl; ++a) {
    for (int b = a + 1; b < pb.n_ctrl; ++b) pb.pairs.emplace_back(a, b);
  }
  pb.rho.resize(static_cast<Eigen::Index>(pb.pairs.size()));
  for (size_t p = 0; p < pb.pairs.size(); ++p) {
    pb.rho(static_cast<Eigen::Index>(p)) =
        (pb.ctrl_world[pb.pairs[p].first] - pb.ctrl_world[pb.pairs[p].second]).squaredNorm();
  }

  // β cases, each refined by Gauss-Newton; keep the least-error candidate
  RigidTransform best;
  double best_err = std::numeric_limits<double>::infinity();
  const int max_case = planar ? 2 : 3;
  for (int n_use = 1; n_use <= max_case; ++n_use) {
    Eigen::VectorXd betas = betas_approx(pb, n_use);
    betas = gauss_newton(pb, betas, 10);
    const auto ctrl_cam = control_from_betas(pb, betas, pb.alphas);
    std::vector<Eigen::Vector3d> pw, pc;
    pw.reserve(n);
    pc.reserve(n);
    for (int i = 0; i < n; ++i) {
      pw.push_back(corrs[i].point3d);
      Eigen::Vector3d q = Eigen::Vector3d::Zero();
      for (int j = 0; j < pb.n_ctrl; ++j) q += pb.alphas(i, j) * ctrl_cam[j];
      pc.push_back(q);
    }
    const RigidTransform cand = align(pw, pc);
    const double err = mean_reprojection(cand, corrs, K);
    if (err < best_err) {
      best_err = err;
      best = cand;
    }
  }
  if (!std::isfinite(best_err)) {
    throw DegenerateConfiguration("epnp: no candidate produced a finite reprojection error");
  }
  return best;
}

PoseEstimate ransac_pnp(const std::vector<Correspondence3D2D>& corrs,
                        const CameraIntrinsics& K, const RansacConfig& cfg) {
  const int n = static_cast<int>(corrs.size());
  if (n < 4) throw InsufficientCorrespondences("ransac_pnp needs at least 4 correspondences");

  SplitMix64 rng(cfg.seed);
  RigidTransform best_pose;
  int best_inliers = -1;
  double best_err = std::numeric_limits<double>::infinity();
  bool have_best = false;

  double needed = cfg.max_iters;
  int it = 0;
  for (; it < cfg.max_iters && it < needed; ++it) {
    // distinct 4-subset
    int idx[4];
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
        fresh = true;
        for (int l = 0; l < k; ++l) {
          if (idx[l] == idx[k]) fresh = false;
        }
      } while (!fresh);
    }
    std::vector<Correspondence3D2D> sample = {corrs[idx[0]], corrs[idx[1]], corrs[idx[2]],
                                              corrs[idx[3]]};
    RigidTransform hyp;
    try {
      hyp = epnp(sample, K);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    int inliers = 0;
    double err_sum = 0;
    for (const auto& c : corrs) {
      const double e = reprojection_error(hyp, c, K);
      if (e < cfg.inlier_threshold) {
        ++inliers;
        err_sum += e;
      }
    }
    const double mean_err = inliers > 0 ? err_sum / inliers : std::numeric_limits<double>::infinity();
    if (inliers > best_inliers || (inliers == best_inliers && mean_err < best_err)) {
      best_inliers = inliers;
      best_err = mean_err;
      best_pose = hyp;
      have_best = true;
      const double w = static_cast<double>(inliers) / n;
      const double denom = std::log(std::max(1.0 - std::pow(w, 4), 1e-300));
      needed = denom < 0 ? std::log(1.0 - cfg.confidence) / denom
                         : static_cast<double>(cfg.max_iters);
    }
  }

  if (!have_best || best_inliers < 4) {
    throw NoConsensus("ransac_pnp: best consensus below 4 inliers");
  }

  // refit on the consensus set, then recompute the mask from the refit pose
  std::vector<Correspondence3D2D> consensus;
  for (const auto& c : corrs) {
    if (reprojection_error(best_pose, c, K) < cfg.inlier_threshold) consensus.push_back(c);
  }
  RigidTransform refit = best_pose;
  try {
    refit = epnp(consensus, K);
  } catch (const DegenerateConfiguration&) {
    // keep the hypothesis pose
  }

  PoseEstimate est;
  est.transform = refit;
  est.inlier_mask.resize(n);
  double err_sum = 0;
  int inliers = 0;
  for (int i = 0; i < n; ++i) {
    const double e = reprojection_error(refit, corrs[i], K);
    est.inlier_mask[i] = e < cfg.inlier_threshold;
    if (est.inlier_mask[i]) {
      ++inliers;
      err_sum += e;
    }
  }
  if (inliers < 4) throw NoConsensus("ransac_pnp: refit lost consensus");
  est.mean_reprojection_error = err_sum / inliers;
  est.iterations_used = it;
  return est;
}

}  // namespace xmreg
