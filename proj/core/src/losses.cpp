#include "reid/losses.hpp"

#include <cstring>

namespace reid {

void LossWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || sa_alpha < 0)
    throw ConfigError("loss weights must be non-negative");
}

Var ide_loss(const Var& logits, const std::vector<int>& labels) {
  return cross_entropy_sum(logits, labels);
}

Var bce_loss(const Var& pair_logits, const std::vector<int>& pair_labels) {
  const Tensor& t = pair_logits.value();
  if (t.ndim() != 2 || t.dim(1) != 2)
    throw ShapeError("bce_loss: pair logits must be [P,2], got " + shape_str(t.shape()));
  for (int l : pair_labels)
    if (l != 0 && l != 1) throw DataError("bce_loss: pair label must be 0 or 1");
  return cross_entropy_sum(pair_logits, pair_labels);
}

SiameseLossResult siamese_attention_loss(Model& model, const FeatureBundle& fb1,
                                         const FeatureBundle& fb2,
                                         const std::vector<int>& pair_labels,
                                         const LossWeights& weights, Scalar trim_t, int l_align,
                                         bool create_graph) {
  weights.validate();
  int p = fb1.vector.value().dim(0);
  if (static_cast<int>(pair_labels.size()) != p)
    throw ShapeError("siamese_attention_loss: label count does not match batch");

  SiameseLossResult res;
  Var z = model.bce_logits(sub(fb1.vector, fb2.vector));
  res.bce_sum = bce_loss(z, pair_labels);
  for (int i = 0; i < p; ++i)
    if (pair_labels[i] == 1) res.positive_rows.push_back(i);

  Var penalty;
  if (!res.positive_rows.empty()) {
    FeatureBundle pos1 = take_bundle(fb1, res.positive_rows);
    FeatureBundle pos2 = take_bundle(fb2, res.positive_rows);
    SiameseAttention sam = siamese_attention_maps(model, pos1, pos2, create_graph);
    auto [v1, v2] =
        trim_and_align(attention_profile(sam.m1), attention_profile(sam.m2), trim_t, l_align);
    res.spatial = spatial_consistency(v1, v2);
    penalty = sum(res.spatial) * weights.sa_alpha;
  }
  Var total = penalty.defined() ? add(res.bce_sum, penalty) : res.bce_sum;
  res.mean = total * (1.0 / static_cast<Scalar>(p));
  return res;
}

TotalLossResult total_loss(Model& model, const Tensor& images_a, const Tensor& images_b,
                           const std::vector<int>& labels_a, const std::vector<int>& labels_b,
                           const std::vector<int>& pair_labels, const TotalLossOptions& opts) {
  opts.weights.validate();
  opts.mask.validate();
  int b = images_a.dim(0);
  if (images_b.dim(0) != b || static_cast<int>(labels_a.size()) != b ||
      static_cast<int>(labels_b.size()) != b || static_cast<int>(pair_labels.size()) != b)
    throw ShapeError("total_loss: inconsistent batch sizes");

  // One shared forward serves the identity loss on all 2B images and both
  // Siamese branches.
  Var images = Var::constant(concat_batch(images_a, images_b));
  std::vector<int> labels(labels_a);
  labels.insert(labels.end(), labels_b.begin(), labels_b.end());
  FeatureBundle fb = model.extract_features(images);
  Var logits = model.ide_logits(fb.vector);

  TotalLossResult res;
  Var mean_ide = ide_loss(logits, labels) * (1.0 / static_cast<Scalar>(2 * b));
  res.ide = mean_ide.item();
  Var total = mean_ide;

  if (opts.enable_ia) {
    IdentificationAttention ia =
        identification_attention_loss(model, images, labels, opts.mask, /*create_graph=*/true);
    Var mean_ia = mean(ia.probs);
    res.ia = mean_ia.item();
    total = add(total, mean_ia * opts.weights.lambda1);
  }

  if (opts.enable_sa) {
    std::vector<int> rows_a(b), rows_b(b);
    for (int i = 0; i < b; ++i) {
      rows_a[i] = i;
      rows_b[i] = b + i;
    }
    FeatureBundle fb_a = take_bundle(fb, rows_a);
    FeatureBundle fb_b = take_bundle(fb, rows_b);
    int l_align = opts.l_align > 0 ? opts.l_align : fb.maps.value().dim(2);
    SiameseLossResult sa = siamese_attention_loss(model, fb_a, fb_b, pair_labels, opts.weights,
                                                  opts.trim_t, l_align, /*create_graph=*/true);
    res.sa = sa.mean.item();
    res.n_positive = static_cast<int>(sa.positive_rows.size());
    if (sa.spatial.defined()) {
      Scalar s = 0;
      for (int i = 0; i < res.n_positive; ++i) s += sa.spatial.value().data()[i];
      res.spatial_mean = s / res.n_positive;
    }
    total = add(total, sa.mean * opts.weights.lambda2);
  }

  res.total = total;
  if (!res.total.value().all_finite()) throw GraphError("total_loss: non-finite loss value");
  return res;
}

Tensor concat_batch(const Tensor& a, const Tensor& b) {
  if (a.ndim() != b.ndim() || a.ndim() < 1)
    throw ShapeError("concat_batch: rank mismatch");
  for (int i = 1; i < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i)) throw ShapeError("concat_batch: trailing dims differ");
  Shape os = a.shape();
  os[0] = a.dim(0) + b.dim(0);
  Tensor out(os);
  std::memcpy(out.data(), a.data(), sizeof(Scalar) * a.numel());
  std::memcpy(out.data() + a.numel(), b.data(), sizeof(Scalar) * b.numel());
  return out;
}

FeatureBundle take_bundle(const FeatureBundle& fb, const std::vector<int>& rows) {
  FeatureBundle out;
  out.maps = take_rows(fb.maps, rows);
  // Re-pool from the sliced maps so the vector stays downstream of them in
  // the graph (gradients of scores w.r.t. the sliced maps must exist).
  out.vector = global_avg_pool(out.maps);
  return out;
}

}  // namespace reid
