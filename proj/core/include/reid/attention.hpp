#pragma once

#include <utility>
#include <vector>

#include "reid/backbone.hpp"

namespace reid {

// Soft-mask sigmoid parameters: Sigma(m) = sigmoid(sharpness * (m - threshold)).
struct MaskParams {
  Scalar sharpness = 8.0;
  Scalar threshold = 0.5;
  void validate() const;
};

// Per-sample min-max normalization of [N,h,w] maps to [0,1]. All-constant
// maps (zero range) come out as zeros.
Var min_max_normalize(const Var& maps);

// Gradient-weighted class activation map: per-channel weights are the
// globally average-pooled gradients of `score` w.r.t. `maps`, the map is
// ReLU(sum_k weight_k * maps_k). With create_graph the result stays
// differentiable w.r.t. everything upstream of both the gradients and the
// maps. Throws GraphError when score does not depend on maps.
Var grad_cam(const Var& score, const Var& maps, bool create_graph);

// Masks high-attention regions out of the input image:
// masked = image * (1 - Sigma(upsample(normalize(map)))).
Var soft_mask(const Var& images, const Var& maps, const MaskParams& params);

struct IdentificationAttention {
  Var probs;   // [N] softmax probability of the true class on the masked image
  Var maps;    // [N,h,w] raw attention maps
  Var masked;  // [N,C,H,W] soft-masked images
};

// Attention loss for the identity branch: per-image probability of the true
// class after masking its attention region (lower is better).
IdentificationAttention identification_attention_loss(Model& model, const Var& images,
                                                      const std::vector<int>& labels,
                                                      const MaskParams& params,
                                                      bool create_graph = true);

// Binary selection of feature-difference coordinates whose gradient on the
// same-identity logit is strictly positive. Detached by design.
Tensor indicator_vector(const Var& pair_logits, const Var& feat_diff);

// s1 = <alpha, f1>, s2 = <alpha, f2> per pair; alpha enters as a constant.
std::pair<Var, Var> importance_scores(const Tensor& alpha, const Var& f1, const Var& f2);

struct SiameseAttention {
  Var m1, m2;    // [P,h,w] raw attention maps per branch
  Var z;         // [P,2] pair logits
  Tensor alpha;  // [P,D] indicator
};

SiameseAttention siamese_attention_maps(Model& model, const Var& images1, const Var& images2,
                                        bool create_graph = true);
// Same pipeline starting from already-extracted features.
SiameseAttention siamese_attention_maps(Model& model, const FeatureBundle& fb1,
                                        const FeatureBundle& fb2, bool create_graph = true);

// [N,h,w] -> [N,h]: highest response across each horizontal row.
Var row_max_pool(const Var& maps);

// Keeps the inclusive span between the first and last entry > t and resizes
// it to `l_align` by linear interpolation. Inputs are expected in [0,1]
// (normalize upstream); rows with no entry above t keep their full span.
Var trim_and_align_one(const Var& profiles, Scalar t, int l_align);
std::pair<Var, Var> trim_and_align(const Var& v1, const Var& v2, Scalar t, int l_align);

// Euclidean distance per row between two aligned profile batches -> [P].
Var spatial_consistency(const Var& v1, const Var& v2);

// normalize(map) -> row max profile, the shared preprocessing before
// trim_and_align in both training and evaluation.
Var attention_profile(const Var& maps);

}  // namespace reid
