#pragma once

#include <cstdint>
#include <string>

#include "reid/common.hpp"

namespace reid {

// One flat key/value file with sections drives every command. Serialization
// is canonical (fixed order, shortest float form) so serialize(parse(s)) is
// byte-identical for any canonical s.
struct RunConfig {
  // [data]
  std::string data_root = "data";
  int image_height = 288;
  int image_width = 144;
  bool augment_flip = false;
  double norm_mean = 0.5;
  double norm_std = 0.5;

  // [backbone]
  std::string backbone = "small";
  int head_hidden = 512;

  // [optim]
  double lr = 0.03;
  double momentum = 0.9;
  int epochs = 40;
  int lr_decay_epoch = 30;
  double lr_decay_factor = 0.1;
  int batch_size = 16;
  double positive_fraction = 0.5;

  // [loss]
  double lambda1 = 0.5;
  double lambda2 = 0.05;
  double sa_alpha = 0.2;

  // [attention]
  double mask_sharpness = 8.0;
  double mask_threshold = 0.5;
  double trim_threshold = 0.5;
  int l_align = 0;  // 0 -> backbone feature height

  // [ablation]
  bool enable_ia = true;
  bool enable_sa = true;

  // [eval]
  std::string eval_mode = "feature_only";  // feature_only | fused
  int max_rank = 10;
  int max_gallery = 0;  // 0 -> use the whole gallery

  // [synth]
  int synth_identities = 8;
  int synth_images_per_identity = 6;
  int synth_cameras = 2;

  // [run]
  uint64_t seed = 42;
  std::string output_dir = "runs/out";

  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

// Applies "section.key=value" (the CLI --set form).
void apply_override(RunConfig& cfg, const std::string& assignment);

// FNV-1a over the canonical serialization.
uint64_t config_fingerprint(const RunConfig& cfg);

// The shipped desk-scale synthetic reference run (configs/synthetic.ini
// mirrors this). The ablation table flips enable_ia / enable_sa on top.
RunConfig reference_synthetic_config();

std::string format_double(double v);

}  // namespace reid
