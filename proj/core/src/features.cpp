#include "xmreg/features.hpp"

#include <cmath>

namespace xmreg {

namespace {

constexpr int kHistBins = 8;
constexpr int kIntensityBins = 8;  // soft (RBF) encoding of the cell mean
constexpr double kPi = 3.14159265358979323846;

// Cosine similarity after ℓ2 normalization is blind to the absolute intensity
// of texture-free cells (every flat cell collapses to the same direction), so
// beyond the mean / orientation-histogram / magnitude core the descriptor
// spreads the mean over a bank of Gaussian bumps and appends signed
// sub-block-vs-cell intensity contrasts. The signed channels keep descriptors
// of unrelated cells near-orthogonal, which the Dual-Softmax needs to produce
// confident peaks.
constexpr double kIntensitySigma = 0.1;
constexpr double kIntensityGain = 0.3;
constexpr double kContrastGain = 6.0;

// sub-block layout: 4×4 for 8-pixel cells, 2×2 for 2-pixel cells
int subblocks_per_side(int cell) { return cell >= 4 ? 4 : 2; }
int descriptor_dim(int cell) {
  const int s = subblocks_per_side(cell);
  return kHistBins + 2 + kIntensityBins + s * s;
}

// Box blur with clamped borders; suppresses the fill-pattern noise of the
// densified projection so the two modalities agree at descriptor scale, and —
// applied more heavily at the coarse level — makes cell descriptors vary
// smoothly under the sub-cell image shifts a pose perturbation induces.
Grid box_blur(const Grid& img, int radius) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  const double inv = 1.0 / ((2 * radius + 1) * (2 * radius + 1));
  Grid out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          acc += img(sy, std::clamp(x + dx, 0, w - 1));
        }
      }
      out(y, x) = acc * inv;
    }
  }
  return out;
}

Grid pad_to_multiple_of_8(const Grid& img) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  const int ph = (h + 7) / 8 * 8;
  const int pw = (w + 7) / 8 * 8;
  if (ph == h && pw == w) return img;
  Grid out(ph, pw);
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, h - 1);
    for (int x = 0; x < pw; ++x) {
      out(y, x) = img(sy, std::min(x, w - 1));
    }
  }
  return out;
}

// Central differences with clamped indices.
void gradients(const Grid& img, Grid& gx, Grid& gy) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  gx.resize(h, w);
  gy.resize(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
      gx(y, x) = 0.5 * (img(y, xr) - img(y, xl));
      gy(y, x) = 0.5 * (img(yd, x) - img(yu, x));
    }
  }
}

FeatureGrid cell_descriptors(const Grid& img, const Grid& gx, const Grid& gy, int cell) {
  const int rows = static_cast<int>(img.rows()) / cell;
  const int cols = static_cast<int>(img.cols()) / cell;
  const int sides = subblocks_per_side(cell);
  const int sub = cell / sides;  // pixels per sub-block side
  const int dim = descriptor_dim(cell);
  FeatureGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.tokens = Eigen::MatrixXd::Zero(rows * cols, dim);

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(dim);
      double mean_i = 0, mean_m = 0;
      std::vector<double> block(static_cast<size_t>(sides) * sides, 0.0);
      for (int dy = 0; dy < cell; ++dy) {
        for (int dx = 0; dx < cell; ++dx) {
          const int y = r * cell + dy, x = c * cell + dx;
          mean_i += img(y, x);
          block[static_cast<size_t>(dy / sub) * sides + dx / sub] += img(y, x);
          const double m = std::hypot(gx(y, x), gy(y, x));
          mean_m += m;
          if (m > 0) {
            const double theta = std::atan2(gy(y, x), gx(y, x));  // [-pi, pi]
            int bin = static_cast<int>((theta + kPi) / (2.0 * kPi / kHistBins));
            if (bin >= kHistBins) bin = kHistBins - 1;
            d(1 + bin) += m;
          }
        }
      }
      const double n = static_cast<double>(cell) * cell;
      d(0) = mean_i / n;
      d(1 + kHistBins) = mean_m / n;
      if (d(0) != 0.0 || d(1 + kHistBins) != 0.0) {  // all-zero cells stay zero
        for (int k = 0; k < kIntensityBins; ++k) {
          const double center = (k + 0.5) / kIntensityBins;
          const double z = (d(0) - center) / kIntensitySigma;
          d(2 + kHistBins + k) = kIntensityGain * std::exp(-0.5 * z * z);
        }
        const double per_block = n / (sides * sides);
        for (int q = 0; q < sides * sides; ++q) {
          d(2 + kHistBins + kIntensityBins + q) =
              kContrastGain * (block[static_cast<size_t>(q)] / per_block - d(0));
        }
      }
      const double norm = d.norm();
      if (norm > 0) d /= norm;
      grid.tokens.row(r * cols + c) = d;
    }
  }
  return grid;
}

}  // namespace

FeaturePyramid extract_handcrafted(const Grid& img) {
  const Grid padded = pad_to_multiple_of_8(img);
  const Grid fine_src = box_blur(padded, 1);
  const Grid coarse_src = box_blur(box_blur(fine_src, 2), 2);
  Grid gxc, gyc, gxf, gyf;
  gradients(coarse_src, gxc, gyc);
  gradients(fine_src, gxf, gyf);
  FeaturePyramid pyr;
  pyr.coarse = cell_descriptors(coarse_src, gxc, gyc, 8);
  pyr.fine = cell_descriptors(fine_src, gxf, gyf, 2);
  return pyr;
}

namespace {

BackboneWeights::Conv load_conv(const TensorFile& tf, const std::string& name, int expect_k) {
  const Tensor& w = tf.get(name + ".weight");
  const Tensor& b = tf.get(name + ".bias");
  if (w.dims.size() != 4 || w.dims[2] != static_cast<uint32_t>(expect_k) ||
      w.dims[3] != static_cast<uint32_t>(expect_k)) {
    throw WeightShapeMismatch("bad conv weight shape: " + name);
  }
  if (b.dims.size() != 1 || b.dims[0] != w.dims[0]) {
    throw WeightShapeMismatch("bad conv bias shape: " + name);
  }
  BackboneWeights::Conv c;
  c.out_ch = static_cast<int>(w.dims[0]);
  c.in_ch = static_cast<int>(w.dims[1]);
  c.k = expect_k;
  c.weight = w.data;
  c.bias = b.data;
  return c;
}

using ChannelMap = std::vector<Grid>;

// stride-2, zero padding (k-1)/2
ChannelMap conv_forward(const ChannelMap& in, const BackboneWeights::Conv& c,
                        int stride, bool relu) {
  if (static_cast<int>(in.size()) != c.in_ch) {
    throw WeightShapeMismatch("conv input channel mismatch");
  }
  const int h = static_cast<int>(in[0].rows());
  const int w = static_cast<int>(in[0].cols());
  const int pad = (c.k - 1) / 2;
  const int oh = (h + 2 * pad - c.k) / stride + 1;
  const int ow = (w + 2 * pad - c.k) / stride + 1;

  ChannelMap out(c.out_ch, Grid::Zero(oh, ow));
  for (int oc = 0; oc < c.out_ch; ++oc) {
    Grid& dst = out[oc];
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = c.bias[oc];
        for (int ic = 0; ic < c.in_ch; ++ic) {
          const Grid& src = in[ic];
          for (int ky = 0; ky < c.k; ++ky) {
            const int sy = y * stride + ky - pad;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < c.k; ++kx) {
              const int sx = x * stride + kx - pad;
              if (sx < 0 || sx >= w) continue;
              acc += src(sy, sx) *
                     c.weight[((oc * c.in_ch + ic) * c.k + ky) * c.k + kx];
            }
          }
        }
        dst(y, x) = relu ? std::max(acc, 0.0) : acc;
      }
    }
  }
  return out;
}

FeatureGrid to_grid(const ChannelMap& maps) {
  FeatureGrid g;
  g.rows = static_cast<int>(maps[0].rows());
  g.cols = static_cast<int>(maps[0].cols());
  g.tokens.resize(g.rows * g.cols, static_cast<Eigen::Index>(maps.size()));
  for (size_t ch = 0; ch < maps.size(); ++ch) {
    for (int r = 0; r < g.rows; ++r) {
      for (int c = 0; c < g.cols; ++c) {
        g.tokens(r * g.cols + c, static_cast<Eigen::Index>(ch)) = maps[ch](r, c);
      }
    }
  }
  return g;
}

}  // namespace

BackboneWeights BackboneWeights::from_tensors(const TensorFile& tf, const std::string& prefix) {
  BackboneWeights w;
  w.conv1 = load_conv(tf, prefix + ".conv1", 3);
  w.fine_head = load_conv(tf, prefix + ".fine", 1);
  w.conv2 = load_conv(tf, prefix + ".conv2", 3);
  w.conv3 = load_conv(tf, prefix + ".conv3", 3);
  if (w.conv1.in_ch != 1 || w.fine_head.in_ch != w.conv1.out_ch ||
      w.conv2.in_ch != w.conv1.out_ch || w.conv3.in_ch != w.conv2.out_ch) {
    throw WeightShapeMismatch("backbone channel chain inconsistent: " + prefix);
  }
  return w;
}

FeaturePyramid extract_backbone(const Grid& img, const BackboneWeights& w) {
  ChannelMap input{pad_to_multiple_of_8(img)};
  ChannelMap half = conv_forward(input, w.conv1, 2, true);
  ChannelMap fine = conv_forward(half, w.fine_head, 1, false);
  ChannelMap quarter = conv_forward(half, w.conv2, 2, true);
  ChannelMap eighth = conv_forward(quarter, w.conv3, 2, false);

  FeaturePyramid pyr;
  pyr.fine = to_grid(fine);
  pyr.coarse = to_grid(eighth);
  return pyr;
}

Eigen::MatrixXd positional_encoding_table(int rows, int cols, int channels) {
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(rows * cols, channels);
  const int half = channels / 2;
  auto fill_axis = [&](int offset, int width, auto pos_of) {
    for (int k = 0; 2 * k < width; ++k) {
      const double freq = std::pow(10000.0, -2.0 * k / width);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const double phase = pos_of(r, c) * freq;
          const int i = r * cols + c;
          table(i, offset + 2 * k) = std::sin(phase);
          if (2 * k + 1 < width) table(i, offset + 2 * k + 1) = std::cos(phase);
        }
      }
    }
  };
  fill_axis(0, half, [](int r, int) { return static_cast<double>(r); });
  fill_axis(half, channels - half, [](int, int c) { return static_cast<double>(c); });
  return table;
}

void positional_encode(FeatureGrid& flat) {
  if (flat.channels() % 2 != 0) {
    throw DimensionMismatch("positional encoding needs an even channel count");
  }
  flat.tokens += positional_encoding_table(flat.rows, flat.cols, flat.channels());
}

namespace {

Eigen::MatrixXd matrix_from(const Tensor& t, int rows, int cols, const std::string& name) {
  if (t.dims.size() != 2 || t.dims[0] != static_cast<uint32_t>(rows) ||
      t.dims[1] != static_cast<uint32_t>(cols)) {
    throw WeightShapeMismatch("bad matrix shape: " + name);
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = t.data[static_cast<size_t>(r) * cols + c];
  }
  return m;
}

Tensor tensor_from(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.data.reserve(m.size());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  }
  return t;
}

Tensor tensor_from(const Eigen::VectorXd& v) {
  Tensor t;
  t.dims = {static_cast<uint32_t>(v.size())};
  for (int i = 0; i < v.size(); ++i) t.data.push_back(static_cast<float>(v(i)));
  return t;
}

Eigen::VectorXd vector_from(const Tensor& t, int n, const std::string& name) {
  if (t.dims.size() != 1 || t.dims[0] != static_cast<uint32_t>(n)) {
    throw WeightShapeMismatch("bad vector shape: " + name);
  }
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = t.data[i];
  return v;
}

// Scaled dot-product attention with residual and a two-layer feed-forward
// with residual. `src` supplies keys/values.
Eigen::MatrixXd layer_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& src,
                              const AttentionLayer& l) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  Eigen::MatrixXd q = x * l.wq;
  Eigen::MatrixXd k = src * l.wk;
  Eigen::MatrixXd v = src * l.wv;
  Eigen::MatrixXd logits = q * k.transpose() * scale;
  for (int r = 0; r < logits.rows(); ++r) {
    Eigen::RowVectorXd row = logits.row(r);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp();
    logits.row(r) = row / row.sum();
  }
  Eigen::MatrixXd attended = x + logits * v * l.wo;
  Eigen::MatrixXd hidden =
      ((attended * l.ff_w1).rowwise() + l.ff_b1.transpose()).cwiseMax(0.0);
  return attended + ((hidden * l.ff_w2).rowwise() + l.ff_b2.transpose());
}

}  // namespace

AttentionWeights AttentionWeights::from_tensors(const TensorFile& tf, const std::string& prefix) {
  const Tensor& layout = tf.get(prefix + ".layout");
  AttentionWeights w;
  for (size_t i = 0; i < layout.data.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    AttentionLayer l;
    l.kind = layout.data[i] == 0.0f ? AttentionLayer::Kind::self : AttentionLayer::Kind::cross;
    const Tensor& wq = tf.get(base + ".wq");
    if (wq.dims.size() != 2) throw WeightShapeMismatch("bad wq rank: " + base);
    const int c = static_cast<int>(wq.dims[0]);
    l.wq = matrix_from(wq, c, c, base + ".wq");
    l.wk = matrix_from(tf.get(base + ".wk"), c, c, base + ".wk");
    l.wv = matrix_from(tf.get(base + ".wv"), c, c, base + ".wv");
    l.wo = matrix_from(tf.get(base + ".wo"), c, c, base + ".wo");
    const Tensor& w1 = tf.get(base + ".ff_w1");
    if (w1.dims.size() != 2 || w1.dims[0] != static_cast<uint32_t>(c)) {
      throw WeightShapeMismatch("bad ff_w1 shape: " + base);
    }
    const int f = static_cast<int>(w1.dims[1]);
    l.ff_w1 = matrix_from(w1, c, f, base + ".ff_w1");
    l.ff_w2 = matrix_from(tf.get(base + ".ff_w2"), f, c, base + ".ff_w2");
    l.ff_b1 = vector_from(tf.get(base + ".ff_b1"), f, base + ".ff_b1");
    l.ff_b2 = vector_from(tf.get(base + ".ff_b2"), c, base + ".ff_b2");
    w.layers.push_back(std::move(l));
  }
  return w;
}

TensorFile AttentionWeights::to_tensors(const std::string& prefix) const {
  TensorFile tf;
  Tensor layout;
  layout.dims = {static_cast<uint32_t>(layers.size())};
  for (const auto& l : layers) {
    layout.data.push_back(l.kind == AttentionLayer::Kind::self ? 0.0f : 1.0f);
  }
  tf.tensors[prefix + ".layout"] = layout;
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    const AttentionLayer& l = layers[i];
    tf.tensors[base + ".wq"] = tensor_from(l.wq);
    tf.tensors[base + ".wk"] = tensor_from(l.wk);
    tf.tensors[base + ".wv"] = tensor_from(l.wv);
    tf.tensors[base + ".wo"] = tensor_from(l.wo);
    tf.tensors[base + ".ff_w1"] = tensor_from(l.ff_w1);
    tf.tensors[base + ".ff_w2"] = tensor_from(l.ff_w2);
    tf.tensors[base + ".ff_b1"] = tensor_from(l.ff_b1);
    tf.tensors[base + ".ff_b2"] = tensor_from(l.ff_b2);
  }
  return tf;
}

AttentionWeights AttentionWeights::zeros(const std::vector<AttentionLayer::Kind>& layout,
                                         int channels, int ff_dim) {
  AttentionWeights w;
  for (auto kind : layout) {
    AttentionLayer l;
    l.kind = kind;
    l.wq = l.wk = l.wv = l.wo = Eigen::MatrixXd::Zero(channels, channels);
    l.ff_w1 = Eigen::MatrixXd::Zero(channels, ff_dim);
    l.ff_w2 = Eigen::MatrixXd::Zero(ff_dim, channels);
    l.ff_b1 = Eigen::VectorXd::Zero(ff_dim);
    l.ff_b2 = Eigen::VectorXd::Zero(channels);
    w.layers.push_back(std::move(l));
  }
  return w;
}

void attend_tokens(Eigen::MatrixXd& a, Eigen::MatrixXd& b, const AttentionWeights& w) {
  for (const auto& l : w.layers) {
    if (a.cols() != l.wq.rows() || b.cols() != l.wq.rows()) {
      throw WeightShapeMismatch("attention channel count does not match tokens");
    }
    if (l.kind == AttentionLayer::Kind::self) {
      Eigen::MatrixXd na = layer_forward(a, a, l);
      Eigen::MatrixXd nb = layer_forward(b, b, l);
      a = std::move(na);
      b = std::move(nb);
    } else {
      Eigen::MatrixXd na = layer_forward(a, b, l);
      Eigen::MatrixXd nb = layer_forward(b, a, l);
      a = std::move(na);
      b = std::move(nb);
    }
  }
}

void attend(FeatureGrid& lidar, FeatureGrid& cam, const AttentionWeights& w) {
  attend_tokens(lidar.tokens, cam.tokens, w);
}

}  // namespace xmreg
