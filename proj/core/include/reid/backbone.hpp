#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reid/nn.hpp"

namespace reid {

struct BackboneStage {
  int channels;
  int stride;
  int blocks;
};

// Residual CNN family. "small" is the default working preset (total stride
// 32); "tiny" keeps parameter counts low enough for finite-difference checks.
struct BackbonePreset {
  std::string name;
  int stem_channels;
  int stem_stride;
  bool stem_pool;  // 3x3 stride-2 max pool after the stem conv
  std::vector<BackboneStage> stages;

  int feature_dim() const { return stages.back().channels; }
  int total_stride() const;
  // Feature-map size for a given input size (ceil division per strided layer).
  std::pair<int, int> map_size(int in_h, int in_w) const;
};

BackbonePreset backbone_preset(const std::string& name);

// Last-stage feature maps plus the pooled feature vector. Both carry the
// graph back to the input, so gradients of any downstream scalar w.r.t.
// either are available.
struct FeatureBundle {
  Var maps;    // [N,K,h,w]
  Var vector;  // [N,D], D == K (global average pooling)
};

class Extractor {
 public:
  Extractor() = default;
  Extractor(const BackbonePreset& preset, int in_channels, Rng& rng);
  FeatureBundle forward(const Var& images);
  void collect_params(const std::string& prefix, NamedParams& out);

 private:
  Conv2d stem_;
  bool has_pool_ = false;
  MaxPool2d pool_;
  std::vector<ResidualBlock> blocks_;
};

struct ModelConfig {
  std::string preset = "small";
  int in_channels = 3;
  int num_classes = 2;
  int head_hidden = 512;
  uint64_t seed = 42;
};

// Shared-weight feature extractor plus the identity and pair classifier
// heads. One extractor instance serves both branch inputs.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  // Rejects non-finite input. images: [N,C,H,W].
  FeatureBundle extract_features(const Var& images);
  FeatureBundle extract_features(const Tensor& images);

  Var ide_logits(const Var& feature);    // [N,D] -> [N,C]
  Var bce_logits(const Var& feat_diff);  // [N,D] -> [N,2]

  int num_classes() const { return config_.num_classes; }
  int feature_dim() const { return preset_.feature_dim(); }
  const BackbonePreset& preset() const { return preset_; }
  const ModelConfig& config() const { return config_; }

  NamedParams named_params();

 private:
  ModelConfig config_;
  BackbonePreset preset_;
  Extractor extractor_;
  Mlp2 ide_head_;
  Mlp2 bce_head_;
};

}  // namespace reid
