#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "xmreg/geometry.hpp"
#include "xmreg/io.hpp"

namespace xmreg {

// Dense descriptor grid flattened to tokens. Row i of `tokens` is the cell
// (i / cols, i % cols).
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd tokens;  // (rows*cols) × C

  int channels() const { return static_cast<int>(tokens.cols()); }
  int count() const { return rows * cols; }

  Eigen::RowVectorXd cell(int r, int c) const { return tokens.row(r * cols + c); }
};

struct FeaturePyramid {
  FeatureGrid coarse;  // 1/8 resolution
  FeatureGrid fine;    // 1/2 resolution
};

enum class Branch { lidar, camera };

// Pads `img` edge-replicate to multiples of 8 and computes per-cell
// descriptors of local intensity mean, an 8-bin gradient-orientation
// histogram, and gradient magnitude, ℓ2-normalized (all-zero cells stay
// zero). Coarse cells are 8×8 pixels, fine cells 2×2.
FeaturePyramid extract_handcrafted(const Grid& img);

// Strided-convolution backbone with per-branch (non-shared) weights.
struct BackboneWeights {
  struct Conv {
    // weight laid out [out][in][3][3] (or [out][in][1][1] for the fine head)
    std::vector<float> weight;
    std::vector<float> bias;
    int out_ch = 0, in_ch = 0, k = 0;
  };
  Conv conv1, fine_head, conv2, conv3;

  static BackboneWeights from_tensors(const TensorFile& tf, const std::string& prefix);
};

FeaturePyramid extract_backbone(const Grid& img, const BackboneWeights& w);

// Fixed 2D sinusoidal table, channels split evenly between row and column
// frequencies with geometric spacing. Identical (row, col) indices produce
// identical encodings regardless of grid shape.
Eigen::MatrixXd positional_encoding_table(int rows, int cols, int channels);

// Adds the encoding table to the tokens in place.
void positional_encode(FeatureGrid& flat);

struct AttentionLayer {
  enum class Kind { self, cross };
  Kind kind = Kind::self;
  Eigen::MatrixXd wq, wk, wv, wo;  // C×C
  Eigen::MatrixXd ff_w1;           // C×F
  Eigen::MatrixXd ff_w2;           // F×C
  Eigen::VectorXd ff_b1;           // F
  Eigen::VectorXd ff_b2;           // C
};

struct AttentionWeights {
  std::vector<AttentionLayer> layers;

  static AttentionWeights from_tensors(const TensorFile& tf, const std::string& prefix);
  TensorFile to_tensors(const std::string& prefix) const;

  // All-zero weights: the forward pass reduces to the residual identity.
  static AttentionWeights zeros(const std::vector<AttentionLayer::Kind>& layout,
                                int channels, int ff_dim);
};

// Interleaved self/cross attention over two token sets; layer weights are
// shared between the two sets. Token counts are unchanged.
void attend(FeatureGrid& lidar, FeatureGrid& cam, const AttentionWeights& w);

// Same forward pass on raw token matrices (used on fine-level windows).
void attend_tokens(Eigen::MatrixXd& a, Eigen::MatrixXd& b, const AttentionWeights& w);

}  // namespace xmreg
