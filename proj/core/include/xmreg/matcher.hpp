#pragma once

#include <Eigen/Dense>
#include <vector>

#include "xmreg/features.hpp"

namespace xmreg {

struct SimilarityMatrix {
  Eigen::MatrixXd values;  // N0×N1, cosine similarity / temperature
  double temperature = 1.0;
};

// values(i,j) = ⟨aᵢ, bⱼ⟩ / (‖aᵢ‖·‖bⱼ‖·temperature); zero-norm tokens give
// zero rows/columns.
SimilarityMatrix cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   double temperature);

// Elementwise product of row-wise and column-wise softmax, max-subtracted.
Eigen::MatrixXd dual_softmax(const Eigen::MatrixXd& sim);

// Two-layer perceptron (C → C/2 ReLU → 1) followed by a sigmoid, per token.
struct RepeatabilityMlp {
  Eigen::MatrixXd w1;  // hidden×C
  Eigen::VectorXd b1;  // hidden
  Eigen::RowVectorXd w2;  // 1×hidden
  double b2 = 0;

  static RepeatabilityMlp from_tensors(const TensorFile& tf, const std::string& prefix);
  TensorFile to_tensors(const std::string& prefix) const;
  static RepeatabilityMlp zeros(int channels);
};

// Pre-sigmoid logits, one per token.
Eigen::VectorXd repeatability_logits(const Eigen::MatrixXd& tokens, const RepeatabilityMlp& mlp);
Eigen::VectorXd repeatability_scores(const Eigen::MatrixXd& tokens, const RepeatabilityMlp& mlp);

// S(i,j) = P_c(i,j) · S_rep(i)
Eigen::MatrixXd fuse_confidence(const Eigen::MatrixXd& p, const Eigen::VectorXd& rep);

struct CoarseMatch {
  int i = 0;  // lidar coarse-cell index
  int j = 0;  // camera coarse-cell index
  double confidence = 0;
};

struct CoarseMatchSet {
  std::vector<CoarseMatch> matches;
  double threshold = 0;
  int argmax_ties = 0;  // diagnostic: rows/cols whose argmax was tied
};

// Mutual nearest neighbors of S above θ_c; argmax ties break to the
// smallest index.
CoarseMatchSet extract_coarse_matches(const Eigen::MatrixXd& s, double theta_c);

struct FineMatch {
  double u0 = 0, v0 = 0;  // lidar pixel, full resolution
  double u1 = 0, v1 = 0;  // refined camera pixel, full resolution
  double confidence = 0;
  double tau2 = 0;        // trace of heatmap positional covariance (fine-cell units²)
  bool window_clamped = false;
  // refined offset from the window center, fine-cell units (for supervision)
  double dx = 0, dy = 0;
};

struct RefineConfig {
  int window = 5;          // odd
  double temperature = 1.0;  // fine softmax temperature τ_f
};

// Coarse-to-fine refinement: crops w×w fine-feature windows around both
// mapped centers, optionally runs the small fine-level transformer,
// correlates the center lidar descriptor against the camera window and
// soft-argmaxes the heatmap. `fine_att` may be null (no fine attention).
std::vector<FineMatch> refine(const CoarseMatchSet& coarse,
                              const FeaturePyramid& pyr_lidar,
                              const FeaturePyramid& pyr_cam,
                              const RefineConfig& cfg,
                              const AttentionWeights* fine_att);

// fine-grid index of the fine cell holding a coarse cell's center
inline int coarse_to_fine_index(int coarse_index) { return 4 * coarse_index + 2; }
// full-resolution pixel at a (real-valued) fine-grid coordinate
inline double fine_to_pixel(double fine_coord) { return 2.0 * fine_coord + 0.5; }

}  // namespace xmreg
