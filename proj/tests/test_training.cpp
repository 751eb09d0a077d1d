#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "reid/train.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "reid_train_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig tiny_config(const std::string& root, const std::string& out) {
  RunConfig cfg;
  cfg.data_root = root;
  cfg.output_dir = out;
  cfg.backbone = "tiny";
  cfg.head_hidden = 16;
  cfg.image_height = 32;
  cfg.image_width = 16;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.lr = 0.005;  // no normalization layers; 0.01 destabilizes the tiny net
  cfg.lr_decay_epoch = 1000;
  cfg.synth_identities = 4;
  cfg.synth_images_per_identity = 6;
  cfg.seed = 11;
  return cfg;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("fixed seed reproduces the step-0 loss; training writes its artifacts") {
  fs::path root = fresh_dir("det_data");
  fs::path out1 = fresh_dir("det_out1");
  fs::path out2 = fresh_dir("det_out2");
  RunConfig cfg = tiny_config(root.string(), out1.string());
  cmd_generate(cfg);

  TrainResult r1 = cmd_train(cfg);
  cfg.output_dir = out2.string();
  TrainResult r2 = cmd_train(cfg);
  CHECK(r1.step0_total == r2.step0_total);
  CHECK(r1.history.size() == 2);
  CHECK(r1.history.back().total == doctest::Approx(r2.history.back().total).epsilon(1e-12));

  CHECK(fs::exists(out1 / "metrics.txt"));
  CHECK(fs::exists(out1 / "loss_curve.png"));
  CHECK(fs::exists(out1 / "checkpoint.bin"));

  std::ifstream metrics(out1 / "metrics.txt");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line))
    if (line.rfind("epoch=", 0) == 0) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("baseline ablation logs total == ide every epoch") {
  fs::path root = fresh_dir("abl_data");
  RunConfig cfg = tiny_config(root.string(), "");
  cmd_generate(cfg);
  cfg.enable_ia = false;
  cfg.enable_sa = false;

  DatasetIndex data = scan_dataset(cfg.data_root);
  ModelConfig mc;
  mc.preset = cfg.backbone;
  mc.num_classes = data.num_train_identities;
  mc.head_hidden = cfg.head_hidden;
  mc.seed = cfg.seed;
  Model model(mc);
  TrainResult res = train_model(model, data, cfg, "");
  for (const auto& log : res.history) {
    CHECK(log.total == log.ide);
    CHECK(log.ia == 0.0);
    CHECK(log.sa == 0.0);
  }
}

TEST_CASE("mean identification-attention loss decreases over 200 steps") {
  fs::path root = fresh_dir("ia_data");
  RunConfig cfg = tiny_config(root.string(), "");
  cmd_generate(cfg);

  // 16 train images / batch 8 -> 2 steps per epoch; 100 epochs = 200 steps.
  cfg.epochs = 100;
  cfg.enable_sa = false;  // isolate the identification-attention objective
  cfg.lambda1 = 0.5;

  DatasetIndex data = scan_dataset(cfg.data_root);
  ModelConfig mc;
  mc.preset = cfg.backbone;
  mc.num_classes = data.num_train_identities;
  mc.head_hidden = cfg.head_hidden;
  mc.seed = cfg.seed;
  Model model(mc);
  TrainResult res = train_model(model, data, cfg, "");
  CHECK(res.history.back().ia < res.history.front().ia);
}

TEST_CASE("degenerate retrieval: gallery of byte-identical cross-camera copies gives rank-1 = 1") {
  fs::path root = fresh_dir("degen_data");
  fs::path out = fresh_dir("degen_out");
  RunConfig cfg = tiny_config(root.string(), out.string());
  cmd_generate(cfg);

  // Replace the gallery with byte-identical copies of the query images,
  // relabeled to the other camera so the exclusion rule keeps them valid.
  DatasetIndex scanned = scan_dataset(root.string());
  REQUIRE_FALSE(scanned.query.empty());
  fs::remove_all(root / "gallery");
  fs::create_directories(root / "gallery");
  for (int qi : scanned.query) {
    const auto& s = scanned.samples[qi];
    char name[64];
    std::snprintf(name, sizeof(name), "%04d_c%d_%04d.png", s.identity, 1 - s.camera, 99);
    fs::copy_file(s.path, root / "gallery" / name);
  }

  TrainResult tr = cmd_train(cfg);
  RunConfig eval_cfg = cfg;
  eval_cfg.output_dir = out.string();
  EvalReport rep = cmd_eval(tr.checkpoint_path, eval_cfg);
  CHECK(rep.cmc.curve[0] == doctest::Approx(1.0));
  CHECK(rep.cmc.skipped == 0);
  CHECK(fs::exists(out / "results.txt"));
  CHECK(fs::exists(out / "cmc_curve.png"));

  // Both evaluation modes produce a report.
  RunConfig fused_cfg = eval_cfg;
  fused_cfg.eval_mode = "fused";
  fused_cfg.output_dir = (out / "fused").string();
  EvalReport fused = cmd_eval(tr.checkpoint_path, fused_cfg);
  CHECK(fs::exists(fs::path(fused_cfg.output_dir) / "results.txt"));
  CHECK(fused.mode == "fused");
}

TEST_CASE("incompatible checkpoint is reported with the mismatched dims") {
  fs::path root = fresh_dir("mismatch_data");
  fs::path out = fresh_dir("mismatch_out");
  RunConfig cfg = tiny_config(root.string(), out.string());
  cfg.epochs = 1;
  cmd_generate(cfg);
  TrainResult tr = cmd_train(cfg);

  // Evaluating against a differently-sized dataset root is fine, but a
  // checkpoint trained with another head size must be rejected by name.
  Checkpoint ck = load_checkpoint(tr.checkpoint_path);
  ck.config.head_hidden = 32;  // model_from_checkpoint builds a wrong-size head
  try {
    Model m = model_from_checkpoint(ck);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("fc1") != std::string::npos);
  }
}

TEST_CASE("attention export writes maps, overlays and pair profiles") {
  fs::path root = fresh_dir("export_data");
  fs::path out = fresh_dir("export_out");
  RunConfig cfg = tiny_config(root.string(), (out / "run").string());
  cfg.epochs = 1;
  cmd_generate(cfg);
  TrainResult tr = cmd_train(cfg);
  DatasetIndex data = scan_dataset(root.string());

  const std::string img = data.samples[data.query[0]].path;

  SUBCASE("identical pair exports identical maps") {
    auto files = cmd_export_attention(tr.checkpoint_path, cfg, {img, img}, -1,
                                      (out / "pair").string());
    REQUIRE(files.size() == 5);  // a.png, a_overlay, b.png, b_overlay, profiles
    CHECK(slurp(files[0]) == slurp(files[2]));  // same map both branches
    CHECK(slurp(files[1]) == slurp(files[3]));  // same overlay
    std::ifstream profiles(files[4]);
    std::string l1, l2;
    std::getline(profiles, l1);
    std::getline(profiles, l2);
    CHECK(l1.rfind("v1*", 0) == 0);
    CHECK(l2.rfind("v2*", 0) == 0);
    CHECK(l1.substr(3) == l2.substr(3));
  }

  SUBCASE("single image with a label exports the identification map") {
    auto files =
        cmd_export_attention(tr.checkpoint_path, cfg, {img}, 0, (out / "single").string());
    REQUIRE(files.size() == 2);
    CHECK(files[0].find("_id.png") != std::string::npos);
    CHECK(fs::exists(files[0]));
    CHECK(fs::exists(files[1]));
    CHECK(files[0].find("query_") != std::string::npos);  // split prefix from the path
  }

  SUBCASE("bad label is rejected") {
    CHECK_THROWS_AS(
        cmd_export_attention(tr.checkpoint_path, cfg, {img}, 99, (out / "bad").string()),
        ConfigError);
  }
}
