#pragma once

#include <map>
#include <string>
#include <vector>

#include "reid/checkpoint.hpp"
#include "reid/data.hpp"
#include "reid/evaluation.hpp"
#include "reid/losses.hpp"

namespace reid {

// SGD with classic momentum: v = mu*v + g; p -= lr*v.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  void step(NamedParams& params, const std::vector<Tensor>& grads);
  const std::map<std::string, Tensor>& state() const { return velocity_; }
  void load_state(const std::map<std::string, Tensor>& state) { velocity_ = state; }

 private:
  double lr_, momentum_;
  std::map<std::string, Tensor> velocity_;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double ide = 0, ia = 0, sa = 0, total = 0;
};

struct TrainResult {
  std::vector<EpochLog> history;
  double step0_total = 0;
  std::string checkpoint_path;  // empty when no output dir was given
};

TotalLossOptions loss_options(const RunConfig& cfg);

// Full training loop per the config. Writes metrics.txt, loss_curve.png and
// checkpoint.bin into out_dir (pass "" to keep everything in memory).
TrainResult train_model(Model& model, const DatasetIndex& data, const RunConfig& cfg,
                        const std::string& out_dir);

// Command-level entry points shared by the CLI and tests.
TrainResult cmd_train(const RunConfig& cfg);

struct EvalReport {
  CmcResult cmc;
  MapResult map;
  std::string mode;
  std::string results_path;
};

EvalReport cmd_eval(const std::string& checkpoint_path, const RunConfig& cfg);

// Exports grayscale maps + overlays (and aligned profiles for pairs).
// Either a single image with a dense train label, or a pair of images.
std::vector<std::string> cmd_export_attention(const std::string& checkpoint_path,
                                              const RunConfig& cfg,
                                              const std::vector<std::string>& images, int label,
                                              const std::string& out_dir);

SynthManifest cmd_generate(const RunConfig& cfg);

// Rebuilds the model a checkpoint was trained with (uses the embedded config).
Model model_from_checkpoint(const Checkpoint& ck);

}  // namespace reid
