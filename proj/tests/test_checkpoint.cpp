#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "reid/checkpoint.hpp"
#include "reid/rng.hpp"
#include "reid/train.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

Model tiny_model(int classes, uint64_t seed = 7) {
  ModelConfig mc;
  mc.preset = "tiny";
  mc.num_classes = classes;
  mc.head_hidden = 8;
  mc.seed = seed;
  return Model(mc);
}

Tensor random_images(int n, int h, int w, uint64_t seed) {
  Tensor t({n, 3, h, w});
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1, 1);
  return t;
}

fs::path fresh_dir() {
  fs::path dir = fs::temp_directory_path() / "reid_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("checkpoint round trip restores the exact model") {
  fs::path dir = fresh_dir();
  Model model = tiny_model(5, 42);
  RunConfig cfg;
  cfg.backbone = "tiny";
  cfg.head_hidden = 8;
  cfg.seed = 42;

  std::map<std::string, Tensor> optim;
  optim["extractor.stem.weight"] = Tensor::full({4, 27}, 0.5);

  Checkpoint ck = make_checkpoint(model, cfg, 17, optim);
  std::string path = (dir / "ck.bin").string();
  save_checkpoint(path, ck);

  Checkpoint back = load_checkpoint(path);
  CHECK(back.epoch == 17);
  CHECK(back.seed == 42);
  CHECK(back.num_classes == 5);
  CHECK(back.fingerprint == config_fingerprint(cfg));
  CHECK(serialize_config(back.config) == serialize_config(cfg));
  CHECK(back.tensors.count("optim/extractor.stem.weight") == 1);

  // A model rebuilt from the checkpoint produces bitwise-equal outputs.
  Model rebuilt = model_from_checkpoint(back);
  Tensor images = random_images(1, 32, 16, 3);
  Tensor f1 = model.extract_features(images).vector.value();
  Tensor f2 = rebuilt.extract_features(images).vector.value();
  for (int64_t i = 0; i < f1.numel(); ++i) CHECK(f1.data()[i] == f2.data()[i]);
}

TEST_CASE("loading into an incompatible model names the mismatched parameter") {
  fs::path dir = fresh_dir();
  Model small_heads = tiny_model(5, 1);
  RunConfig cfg;
  cfg.backbone = "tiny";
  cfg.head_hidden = 8;
  Checkpoint ck = make_checkpoint(small_heads, cfg, 1, {});
  std::string path = (dir / "ck.bin").string();
  save_checkpoint(path, ck);

  // Different class count -> ide head output dims differ.
  Model other = tiny_model(9, 1);
  Checkpoint loaded = load_checkpoint(path);
  try {
    load_model_params(other, loaded);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    std::string msg = e.what();
    CHECK(msg.find("ide_head.fc2") != std::string::npos);
    CHECK(msg.find("[9,8]") != std::string::npos);
    CHECK(msg.find("[5,8]") != std::string::npos);
  }
}

TEST_CASE("corrupt checkpoint files are rejected") {
  fs::path dir = fresh_dir();
  std::string path = (dir / "bad.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  Model model = tiny_model(3, 2);
  RunConfig cfg;
  cfg.backbone = "tiny";
  cfg.head_hidden = 8;
  std::string good = (dir / "good.bin").string();
  save_checkpoint(good, make_checkpoint(model, cfg, 1, {}));
  // Truncate it.
  auto size = fs::file_size(good);
  fs::resize_file(good, size / 2);
  CHECK_THROWS_AS(load_checkpoint(good), IoError);

  CHECK_THROWS_AS(load_checkpoint((dir / "missing.bin").string()), IoError);
}
