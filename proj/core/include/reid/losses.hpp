#pragma once

#include <vector>

#include "reid/attention.hpp"

namespace reid {

struct LossWeights {
  Scalar lambda1 = 0.5;  // identification attention
  Scalar lambda2 = 0.05;  // siamese attention
  Scalar sa_alpha = 0.2;  // spatial term inside the siamese attention loss
  void validate() const;
};

// Multi-class cross entropy, summed over the batch. Callers that need a
// batch-size-independent scale divide by N themselves.
Var ide_loss(const Var& logits, const std::vector<int>& labels);

// Two-class cross entropy over pair logits [P,2], labels in {0,1}
// (1 = same identity), summed over pairs.
Var bce_loss(const Var& pair_logits, const std::vector<int>& pair_labels);

struct SiameseLossResult {
  Var mean;        // mean over pairs of bce_p + 1[positive] * sa_alpha * spatial_p
  Var bce_sum;     // summed bce over all pairs
  Var spatial;     // [n_positive] spatial-consistency values (undefined when none)
  std::vector<int> positive_rows;
};

// The pair objective: BCE on every pair, plus the attention-consistency
// penalty on positive pairs only.
SiameseLossResult siamese_attention_loss(Model& model, const FeatureBundle& fb1,
                                         const FeatureBundle& fb2,
                                         const std::vector<int>& pair_labels,
                                         const LossWeights& weights, Scalar trim_t, int l_align,
                                         bool create_graph = true);

struct TotalLossOptions {
  LossWeights weights;
  MaskParams mask;
  Scalar trim_t = 0.5;
  int l_align = 0;  // 0 -> backbone feature height
  bool enable_ia = true;
  bool enable_sa = true;
};

struct TotalLossResult {
  Var total;  // graph-carrying scalar
  Scalar ide = 0, ia = 0, sa = 0;  // per-term means as logged
  Scalar spatial_mean = 0;         // mean spatial consistency over positive pairs
  int n_positive = 0;
};

// Full training objective on a pair batch; each term is averaged per image /
// per pair before weighting.
TotalLossResult total_loss(Model& model, const Tensor& images_a, const Tensor& images_b,
                           const std::vector<int>& labels_a, const std::vector<int>& labels_b,
                           const std::vector<int>& pair_labels, const TotalLossOptions& opts);

// First-dim concatenation (equal trailing dims).
Tensor concat_batch(const Tensor& a, const Tensor& b);

// Graph-preserving row selection on a feature bundle.
FeatureBundle take_bundle(const FeatureBundle& fb, const std::vector<int>& rows);

}  // namespace reid
