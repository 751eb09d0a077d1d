#pragma once

#include <map>
#include <string>

#include "reid/backbone.hpp"
#include "reid/config.hpp"

namespace reid {

// Single-file archive: config text + fingerprint, seed, epoch, class count,
// and a named-tensor table holding model parameters ("model/...") and
// optimizer state ("optim/...").
struct Checkpoint {
  RunConfig config;
  uint64_t fingerprint = 0;
  uint64_t seed = 0;
  int epoch = 0;
  int num_classes = 0;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(Model& model, const RunConfig& cfg, int epoch,
                           const std::map<std::string, Tensor>& optim_state);

// Copies "model/..." tensors into the model's parameters. A missing tensor or
// a shape mismatch raises an error naming the offending parameter and dims.
void load_model_params(Model& model, const Checkpoint& ck);

}  // namespace reid
