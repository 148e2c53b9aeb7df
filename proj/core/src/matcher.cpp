#include "xmreg/matcher.hpp"

#include <cmath>

namespace xmreg {

SimilarityMatrix cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   double temperature) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("cosine_similarity: channel counts differ");
  }
  if (!(temperature > 0)) {
    throw InvalidConfig("cosine_similarity: temperature must be positive");
  }
  Eigen::VectorXd na = a.rowwise().norm();
  Eigen::VectorXd nb = b.rowwise().norm();
  SimilarityMatrix out;
  out.temperature = temperature;
  out.values = a * b.transpose();
  for (int i = 0; i < out.values.rows(); ++i) {
    for (int j = 0; j < out.values.cols(); ++j) {
      const double d = na(i) * nb(j);
      out.values(i, j) = d > 0 ? out.values(i, j) / (d * temperature) : 0.0;
    }
  }
  return out;
}

Eigen::MatrixXd dual_softmax(const Eigen::MatrixXd& sim) {
  const Eigen::Index n = sim.rows(), m = sim.cols();
  Eigen::MatrixXd row_sm(n, m), col_sm(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd r = sim.row(i);
    r = (r.array() - r.maxCoeff()).exp();
    row_sm.row(i) = r / r.sum();
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd c = sim.col(j);
    c = (c.array() - c.maxCoeff()).exp();
    col_sm.col(j) = c / c.sum();
  }
  return row_sm.cwiseProduct(col_sm);
}

RepeatabilityMlp RepeatabilityMlp::from_tensors(const TensorFile& tf, const std::string& prefix) {
  const Tensor& w1 = tf.get(prefix + ".w1");
  if (w1.dims.size() != 2) throw WeightShapeMismatch("bad rep w1 rank");
  const int hidden = static_cast<int>(w1.dims[0]);
  const int c = static_cast<int>(w1.dims[1]);
  RepeatabilityMlp mlp;
  mlp.w1.resize(hidden, c);
  for (int r = 0; r < hidden; ++r) {
    for (int k = 0; k < c; ++k) mlp.w1(r, k) = w1.data[static_cast<size_t>(r) * c + k];
  }
  const Tensor& b1 = tf.get(prefix + ".b1");
  if (b1.dims.size() != 1 || b1.dims[0] != static_cast<uint32_t>(hidden)) {
    throw WeightShapeMismatch("bad rep b1 shape");
  }
  mlp.b1.resize(hidden);
  for (int r = 0; r < hidden; ++r) mlp.b1(r) = b1.data[r];
  const Tensor& w2 = tf.get(prefix + ".w2");
  if (w2.dims.size() != 1 || w2.dims[0] != static_cast<uint32_t>(hidden)) {
    throw WeightShapeMismatch("bad rep w2 shape");
  }
  mlp.w2.resize(hidden);
  for (int r = 0; r < hidden; ++r) mlp.w2(r) = w2.data[r];
  const Tensor& b2 = tf.get(prefix + ".b2");
  if (b2.numel() != 1) throw WeightShapeMismatch("bad rep b2 shape");
  mlp.b2 = b2.data[0];
  return mlp;
}

TensorFile RepeatabilityMlp::to_tensors(const std::string& prefix) const {
  TensorFile tf;
  Tensor w1t;
  w1t.dims = {static_cast<uint32_t>(w1.rows()), static_cast<uint32_t>(w1.cols())};
  for (int r = 0; r < w1.rows(); ++r) {
    for (int c = 0; c < w1.cols(); ++c) w1t.data.push_back(static_cast<float>(w1(r, c)));
  }
  tf.tensors[prefix + ".w1"] = std::move(w1t);
  Tensor b1t;
  b1t.dims = {static_cast<uint32_t>(b1.size())};
  for (int r = 0; r < b1.size(); ++r) b1t.data.push_back(static_cast<float>(b1(r)));
  tf.tensors[prefix + ".b1"] = std::move(b1t);
  Tensor w2t;
  w2t.dims = {static_cast<uint32_t>(w2.size())};
  for (int r = 0; r < w2.size(); ++r) w2t.data.push_back(static_cast<float>(w2(r)));
  tf.tensors[prefix + ".w2"] = std::move(w2t);
  Tensor b2t;
  b2t.dims = {1};
  b2t.data.push_back(static_cast<float>(b2));
  tf.tensors[prefix + ".b2"] = std::move(b2t);
  return tf;
}

RepeatabilityMlp RepeatabilityMlp::zeros(int channels) {
  RepeatabilityMlp mlp;
  const int hidden = channels / 2;
  mlp.w1 = Eigen::MatrixXd::Zero(hidden, channels);
  mlp.b1 = Eigen::VectorXd::Zero(hidden);
  mlp.w2 = Eigen::RowVectorXd::Zero(hidden);
  mlp.b2 = 0;
  return mlp;
}

Eigen::VectorXd repeatability_logits(const Eigen::MatrixXd& tokens, const RepeatabilityMlp& mlp) {
  if (tokens.cols() != mlp.w1.cols()) {
    throw WeightShapeMismatch("repeatability MLP input width mismatch");
  }
  Eigen::VectorXd out(tokens.rows());
  for (int i = 0; i < tokens.rows(); ++i) {
    Eigen::VectorXd hidden = (mlp.w1 * tokens.row(i).transpose() + mlp.b1).cwiseMax(0.0);
    out(i) = mlp.w2 * hidden + mlp.b2;
  }
  return out;
}

Eigen::VectorXd repeatability_scores(const Eigen::MatrixXd& tokens, const RepeatabilityMlp& mlp) {
  Eigen::VectorXd z = repeatability_logits(tokens, mlp);
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Eigen::MatrixXd fuse_confidence(const Eigen::MatrixXd& p, const Eigen::VectorXd& rep) {
  if (p.rows() != rep.size()) {
    throw DimensionMismatch("fuse_confidence: row count must equal repeatability length");
  }
  return rep.asDiagonal() * p;
}

CoarseMatchSet extract_coarse_matches(const Eigen::MatrixXd& s, double theta_c) {
  if (!(theta_c > 0 && theta_c < 1)) {
    throw InvalidConfig("theta_c must lie in (0, 1)");
  }
  const Eigen::Index n = s.rows(), m = s.cols();
  CoarseMatchSet out;
  out.threshold = theta_c;

  std::vector<Eigen::Index> row_arg(n), col_arg(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m; ++j) {
      if (s(i, j) > s(i, best)) best = j;
    }
    row_arg[i] = best;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j != best && s(i, j) == s(i, best)) {
        ++out.argmax_ties;
        break;
      }
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (s(i, j) > s(best, j)) best = i;
    }
    col_arg[j] = best;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = row_arg[i];
    if (col_arg[j] == i && s(i, j) >= theta_c) {
      out.matches.push_back({static_cast<int>(i), static_cast<int>(j), s(i, j)});
    }
  }
  return out;
}

std::vector<FineMatch> refine(const CoarseMatchSet& coarse,
                              const FeaturePyramid& pyr_lidar,
                              const FeaturePyramid& pyr_cam,
                              const RefineConfig& cfg,
                              const AttentionWeights* fine_att) {
  const int w = cfg.window;
  if (w < 1 || w % 2 == 0) throw InvalidConfig("refine window must be odd and positive");
  const int half = (w - 1) / 2;
  const FeatureGrid& f0 = pyr_lidar.fine;
  const FeatureGrid& f1 = pyr_cam.fine;
  if (f0.rows < w || f0.cols < w || f1.rows < w || f1.cols < w) {
    throw WindowOutOfRange("fine grid smaller than the refinement window");
  }

  std::vector<FineMatch> out;
  out.reserve(coarse.matches.size());
  for (const auto& cm : coarse.matches) {
    const int r0 = cm.i / pyr_lidar.coarse.cols, c0 = cm.i % pyr_lidar.coarse.cols;
    const int r1 = cm.j / pyr_cam.coarse.cols, c1 = cm.j % pyr_cam.coarse.cols;
    const int fy0 = coarse_to_fine_index(r0), fx0 = coarse_to_fine_index(c0);
    const int fy1 = coarse_to_fine_index(r1), fx1 = coarse_to_fine_index(c1);
    if (fy0 >= f0.rows || fx0 >= f0.cols || fy1 >= f1.rows || fx1 >= f1.cols) {
      throw WindowOutOfRange("coarse match maps outside the fine grid");
    }

    FineMatch fm;
    auto window_start = [&](int center, int limit, bool& clamped) {
      int s = center - half;
      if (s < 0) { s = 0; clamped = true; }
      if (s + w > limit) { s = limit - w; clamped = true; }
      return s;
    };
    bool clamped = false;
    const int sy0 = window_start(fy0, f0.rows, clamped);
    const int sx0 = window_start(fx0, f0.cols, clamped);
    const int sy1 = window_start(fy1, f1.rows, clamped);
    const int sx1 = window_start(fx1, f1.cols, clamped);
    fm.window_clamped = clamped;

    const int c = f0.channels();
    Eigen::MatrixXd win0(w * w, c), win1(w * w, c);
    for (int dy = 0; dy < w; ++dy) {
      for (int dx = 0; dx < w; ++dx) {
        win0.row(dy * w + dx) = f0.tokens.row((sy0 + dy) * f0.cols + (sx0 + dx));
        win1.row(dy * w + dx) = f1.tokens.row((sy1 + dy) * f1.cols + (sx1 + dx));
      }
    }
    if (fine_att != nullptr) attend_tokens(win0, win1, *fine_att);

    const int center_idx = (fy0 - sy0) * w + (fx0 - sx0);
    Eigen::VectorXd corr = win1 * win0.row(center_idx).transpose();
    corr = ((corr.array() - corr.maxCoeff()) / cfg.temperature).exp();
    corr /= corr.sum();

    double ex = 0, ey = 0;
    for (int dy = 0; dy < w; ++dy) {
      for (int dx = 0; dx < w; ++dx) {
        const double h = corr(dy * w + dx);
        ey += h * (sy1 + dy);
        ex += h * (sx1 + dx);
      }
    }
    double var = 0;
    for (int dy = 0; dy < w; ++dy) {
      for (int dx = 0; dx < w; ++dx) {
        const double h = corr(dy * w + dx);
        var += h * ((sy1 + dy - ey) * (sy1 + dy - ey) + (sx1 + dx - ex) * (sx1 + dx - ex));
      }
    }

    fm.u0 = fine_to_pixel(fx0);
    fm.v0 = fine_to_pixel(fy0);
    fm.u1 = fine_to_pixel(ex);
    fm.v1 = fine_to_pixel(ey);
    fm.dx = ex - (sx1 + half);
    fm.dy = ey - (sy1 + half);
    fm.confidence = cm.confidence;
    fm.tau2 = std::max(var, 1e-12);
    out.push_back(fm);
  }
  return out;
}

}  // namespace xmreg
