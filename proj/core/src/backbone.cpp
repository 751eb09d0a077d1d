#include "reid/backbone.hpp"

namespace reid {

int BackbonePreset::total_stride() const {
  int s = stem_stride * (stem_pool ? 2 : 1);
  for (const auto& st : stages) s *= st.stride;
  return s;
}

static int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::pair<int, int> BackbonePreset::map_size(int in_h, int in_w) const {
  // Every strided layer uses "same"-style padding, so each one ceil-divides.
  int h = ceil_div(in_h, stem_stride), w = ceil_div(in_w, stem_stride);
  if (stem_pool) {
    h = ceil_div(h, 2);
    w = ceil_div(w, 2);
  }
  for (const auto& st : stages) {
    h = ceil_div(h, st.stride);
    w = ceil_div(w, st.stride);
  }
  return {h, w};
}

BackbonePreset backbone_preset(const std::string& name) {
  if (name == "tiny") {
    return BackbonePreset{"tiny", 4, 1, false, {{4, 1, 1}, {8, 2, 1}, {8, 2, 1}, {16, 2, 1}}};
  }
  if (name == "small") {
    return BackbonePreset{
        "small", 16, 2, true, {{16, 1, 2}, {32, 2, 2}, {64, 2, 2}, {128, 2, 2}}};
  }
  throw ConfigError("unknown backbone preset '" + name + "' (expected tiny or small)");
}

Extractor::Extractor(const BackbonePreset& preset, int in_channels, Rng& rng)
    : stem_(in_channels, preset.stem_channels, 3, preset.stem_stride, 1, rng),
      has_pool_(preset.stem_pool),
      pool_(3, 2, 1) {
  int ch = preset.stem_channels;
  for (const auto& st : preset.stages) {
    for (int b = 0; b < st.blocks; ++b) {
      int stride = b == 0 ? st.stride : 1;
      blocks_.emplace_back(ch, st.channels, stride, rng);
      ch = st.channels;
    }
  }
}

FeatureBundle Extractor::forward(const Var& images) {
  Var x = relu(stem_.forward(images));
  if (has_pool_) x = pool_.forward(x);
  for (auto& block : blocks_) x = block.forward(x);
  FeatureBundle fb;
  fb.maps = x;
  fb.vector = global_avg_pool(x);
  return fb;
}

void Extractor::collect_params(const std::string& prefix, NamedParams& out) {
  stem_.collect_params(prefix + ".stem", out);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_params(prefix + ".block" + std::to_string(i), out);
}

Model::Model(const ModelConfig& config) : config_(config), preset_(backbone_preset(config.preset)) {
  Rng rng(config.seed);
  extractor_ = Extractor(preset_, config.in_channels, rng);
  ide_head_ = Mlp2(preset_.feature_dim(), config.head_hidden, config.num_classes, rng);
  bce_head_ = Mlp2(preset_.feature_dim(), config.head_hidden, 2, rng);
}

FeatureBundle Model::extract_features(const Var& images) {
  const Tensor& t = images.value();
  if (t.ndim() != 4)
    throw ShapeError("extract_features: expected [N,C,H,W], got " + shape_str(t.shape()));
  if (!t.all_finite()) throw DataError("extract_features: input contains non-finite values");
  return extractor_.forward(images);
}

FeatureBundle Model::extract_features(const Tensor& images) {
  return extract_features(Var::constant(images));
}

Var Model::ide_logits(const Var& feature) { return ide_head_.forward(feature); }

Var Model::bce_logits(const Var& feat_diff) { return bce_head_.forward(feat_diff); }

NamedParams Model::named_params() {
  NamedParams out;
  extractor_.collect_params("extractor", out);
  ide_head_.collect_params("ide_head", out);
  bce_head_.collect_params("bce_head", out);
  return out;
}

}  // namespace reid
