#include "reid/attention.hpp"

#include <cmath>

namespace reid {

void MaskParams::validate() const {
  if (!(sharpness > 0)) throw ConfigError("mask sharpness must be > 0");
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("mask threshold must be in (0,1)");
}

Var min_max_normalize(const Var& maps) {
  const Tensor& t = maps.value();
  if (t.ndim() != 3) throw ShapeError("min_max_normalize: expected [N,h,w], got " + shape_str(t.shape()));
  int n = t.dim(0), h = t.dim(1), w = t.dim(2);
  Var flat = reshape(maps, {n, h * w});
  Var mn = reshape(rowwise_min(flat), {n, 1});
  Var mx = reshape(rowwise_max(flat), {n, 1});
  Var range = sub(mx, mn);
  // Degenerate (constant) maps skip normalization and keep their values:
  // all-zero maps stay zero, a uniform map keeps its level.
  Tensor gate_t({n, 1});
  for (int i = 0; i < n; ++i) gate_t.data()[i] = range.value().data()[i] > 1e-9 ? 1.0 : 0.0;
  Var gate = Var::constant(gate_t);
  Var scale = add(div(gate, range + 1e-12), neg(gate) + 1.0);
  Var shift = mul(mn, gate);
  return reshape(mul(sub(flat, shift), scale), {n, h, w});
}

Var grad_cam(const Var& score, const Var& maps, bool create_graph) {
  const Tensor& t = maps.value();
  if (t.ndim() != 4) throw ShapeError("grad_cam: maps must be [N,K,h,w], got " + shape_str(t.shape()));
  if (score.numel() != 1) throw ShapeError("grad_cam: score must be scalar");
  int n = t.dim(0), k = t.dim(1), h = t.dim(2), w = t.dim(3);
  Var g = grad(score, {maps}, create_graph)[0];  // [N,K,h,w]
  Var weights = sum_to(g, {n, k, 1, 1}) * (1.0 / static_cast<Scalar>(h * w));
  Var weighted = sum_to(mul(weights, maps), {n, 1, h, w});
  return relu(reshape(weighted, {n, h, w}));
}

Var soft_mask(const Var& images, const Var& maps, const MaskParams& params) {
  params.validate();
  const Tensor& ti = images.value();
  if (ti.ndim() != 4) throw ShapeError("soft_mask: images must be [N,C,H,W]");
  const Tensor& tm = maps.value();
  if (tm.ndim() != 3 || tm.dim(0) != ti.dim(0))
    throw ShapeError("soft_mask: maps must be [N,h,w] matching the image batch");
  int n = ti.dim(0), ih = ti.dim(2), iw = ti.dim(3);
  Var up = upsample_bilinear(min_max_normalize(maps), ih, iw);
  Var sig = sigmoid((up - params.threshold) * params.sharpness);
  Var keep = neg(sig) + 1.0;
  return mul(images, reshape(keep, {n, 1, ih, iw}));
}

IdentificationAttention identification_attention_loss(Model& model, const Var& images,
                                                      const std::vector<int>& labels,
                                                      const MaskParams& params, bool create_graph) {
  FeatureBundle fb = model.extract_features(images);
  Var logits = model.ide_logits(fb.vector);
  int n = logits.value().dim(0), c = logits.value().dim(1);
  auto idx = std::make_shared<std::vector<int64_t>>(n);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw DataError("identification_attention_loss: label " + std::to_string(labels[i]) +
                      " out of range [0," + std::to_string(c) + ")");
    (*idx)[i] = static_cast<int64_t>(i) * c + labels[i];
  }
  // One backward produces every per-image map: image i only influences row i.
  Var score = sum(gather(logits, idx, {n}));
  IdentificationAttention out;
  out.maps = grad_cam(score, fb.maps, create_graph);
  out.masked = soft_mask(images, out.maps, params);
  FeatureBundle masked_fb = model.extract_features(out.masked);
  Var masked_probs = softmax(model.ide_logits(masked_fb.vector));
  out.probs = gather(masked_probs, idx, {n});
  return out;
}

Tensor indicator_vector(const Var& pair_logits, const Var& feat_diff) {
  const Tensor& tz = pair_logits.value();
  if (tz.ndim() != 2 || tz.dim(1) != 2)
    throw ShapeError("indicator_vector: pair logits must be [P,2], got " + shape_str(tz.shape()));
  int p = tz.dim(0);
  auto idx = std::make_shared<std::vector<int64_t>>(p);
  for (int i = 0; i < p; ++i) (*idx)[i] = static_cast<int64_t>(i) * 2 + 1;
  Var z1 = sum(gather(pair_logits, idx, {p}));
  Tensor g = grad(z1, {feat_diff}, /*create_graph=*/false)[0].value();
  Tensor alpha(g.shape());
  const Scalar* pg = g.data();
  Scalar* pa = alpha.data();
  for (int64_t i = 0, m = g.numel(); i < m; ++i) pa[i] = pg[i] > 0 ? 1.0 : 0.0;
  return alpha;
}

std::pair<Var, Var> importance_scores(const Tensor& alpha, const Var& f1, const Var& f2) {
  if (!f1.value().same_shape(alpha) || !f2.value().same_shape(alpha))
    throw ShapeError("importance_scores: alpha " + shape_str(alpha.shape()) +
                     " does not match features " + shape_str(f1.shape()));
  int p = alpha.dim(0);
  Var a = Var::constant(alpha);
  Var s1 = reshape(sum_to(mul(f1, a), {p, 1}), {p});
  Var s2 = reshape(sum_to(mul(f2, a), {p, 1}), {p});
  return {s1, s2};
}

SiameseAttention siamese_attention_maps(Model& model, const FeatureBundle& fb1,
                                        const FeatureBundle& fb2, bool create_graph) {
  SiameseAttention out;
  Var fdiff = sub(fb1.vector, fb2.vector);
  out.z = model.bce_logits(fdiff);
  out.alpha = indicator_vector(out.z, fdiff);
  auto [s1, s2] = importance_scores(out.alpha, fb1.vector, fb2.vector);
  // Pair p's score only reaches its own maps, so one summed backward per
  // branch yields all per-pair maps.
  out.m1 = grad_cam(sum(s1), fb1.maps, create_graph);
  out.m2 = grad_cam(sum(s2), fb2.maps, create_graph);
  return out;
}

SiameseAttention siamese_attention_maps(Model& model, const Var& images1, const Var& images2,
                                        bool create_graph) {
  FeatureBundle fb1 = model.extract_features(images1);
  FeatureBundle fb2 = model.extract_features(images2);
  return siamese_attention_maps(model, fb1, fb2, create_graph);
}

Var row_max_pool(const Var& maps) {
  const Tensor& t = maps.value();
  if (t.ndim() != 3) throw ShapeError("row_max_pool: expected [N,h,w], got " + shape_str(t.shape()));
  int n = t.dim(0), h = t.dim(1), w = t.dim(2);
  return reshape(rowwise_max(reshape(maps, {n * h, w})), {n, h});
}

Var trim_and_align_one(const Var& profiles, Scalar t, int l_align) {
  const Tensor& tv = profiles.value();
  if (tv.ndim() != 2) throw ShapeError("trim_and_align: expected [P,L], got " + shape_str(tv.shape()));
  if (!(t > 0 && t < 1)) throw ConfigError("trim threshold must be in (0,1)");
  if (l_align < 1) throw ConfigError("l_align must be >= 1");
  int p = tv.dim(0), l = tv.dim(1);
  auto i0 = std::make_shared<std::vector<int64_t>>(static_cast<int64_t>(p) * l_align);
  auto i1 = std::make_shared<std::vector<int64_t>>(static_cast<int64_t>(p) * l_align);
  Tensor w({p, l_align});
  const Scalar* pv = tv.data();
  int64_t pos = 0;
  for (int i = 0; i < p; ++i) {
    const Scalar* row = pv + static_cast<int64_t>(i) * l;
    int lo = -1, hi = -1;
    for (int j = 0; j < l; ++j) {
      if (row[j] > t) {
        if (lo < 0) lo = j;
        hi = j;
      }
    }
    if (lo < 0) {  // nothing above threshold: keep the full vector
      lo = 0;
      hi = l - 1;
    }
    for (int j = 0; j < l_align; ++j) {
      Scalar fpos = (hi == lo || l_align == 1)
                        ? static_cast<Scalar>(lo)
                        : lo + static_cast<Scalar>(j) * (hi - lo) / (l_align - 1);
      int j0 = static_cast<int>(fpos);
      int j1 = std::min(j0 + 1, hi);
      Scalar frac = fpos - j0;
      (*i0)[pos] = static_cast<int64_t>(i) * l + j0;
      (*i1)[pos] = static_cast<int64_t>(i) * l + j1;
      w.data()[pos] = frac;
      ++pos;
    }
  }
  Shape os{p, l_align};
  Var wv = Var::constant(w);
  Var one_minus = neg(wv) + 1.0;
  return add(mul(gather(profiles, i0, os), one_minus), mul(gather(profiles, i1, os), wv));
}

std::pair<Var, Var> trim_and_align(const Var& v1, const Var& v2, Scalar t, int l_align) {
  return {trim_and_align_one(v1, t, l_align), trim_and_align_one(v2, t, l_align)};
}

Var spatial_consistency(const Var& v1, const Var& v2) {
  if (v1.shape() != v2.shape())
    throw ShapeError("spatial_consistency: length mismatch " + shape_str(v1.shape()) + " vs " +
                     shape_str(v2.shape()));
  return rowwise_l2_norm(sub(v1, v2));
}

Var attention_profile(const Var& maps) { return row_max_pool(min_max_normalize(maps)); }

}  // namespace reid
