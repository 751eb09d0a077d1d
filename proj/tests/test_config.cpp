#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "reid/config.hpp"

using namespace reid;

TEST_CASE("serialize -> parse -> serialize is byte-identical") {
  RunConfig cfg;
  std::string s1 = serialize_config(cfg);
  RunConfig parsed = parse_config(s1);
  std::string s2 = serialize_config(parsed);
  CHECK(s1 == s2);

  // Values without short decimal representations survive the round trip.
  cfg.lr = 0.1 + 0.2;
  cfg.lambda2 = 1e-7;
  cfg.positive_fraction = 1.0 / 3.0;
  cfg.seed = 18446744073709551557ULL;
  cfg.data_root = "some/dir with spaces";
  std::string t1 = serialize_config(cfg);
  RunConfig cfg2 = parse_config(t1);
  CHECK(serialize_config(cfg2) == t1);
  CHECK(cfg2.lr == cfg.lr);
  CHECK(cfg2.lambda2 == cfg.lambda2);
  CHECK(cfg2.positive_fraction == cfg.positive_fraction);
  CHECK(cfg2.seed == cfg.seed);
  CHECK(cfg2.data_root == cfg.data_root);
}

TEST_CASE("parser accepts comments and blank lines, rejects junk") {
  RunConfig cfg = parse_config(
      "# comment\n"
      "[optim]\n"
      "lr = 0.005\n"
      "; another comment\n"
      "\n"
      "[ablation]\n"
      "enable_ia = false\n");
  CHECK(cfg.lr == 0.005);
  CHECK_FALSE(cfg.enable_ia);
  CHECK(cfg.enable_sa);  // untouched default

  CHECK_THROWS_AS(parse_config("[optim]\nnot a key value line\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optim]\nunknown_key = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nosection\nlr = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optim]\nlr = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[optim]\nepochs = 2.5\n"), ConfigError);
}

TEST_CASE("overrides hit every field type") {
  RunConfig cfg;
  apply_override(cfg, "optim.lr=0.25");
  apply_override(cfg, "optim.epochs=7");
  apply_override(cfg, "ablation.enable_sa=false");
  apply_override(cfg, "run.seed=123");
  apply_override(cfg, "data.root=/tmp/x");
  CHECK(cfg.lr == 0.25);
  CHECK(cfg.epochs == 7);
  CHECK_FALSE(cfg.enable_sa);
  CHECK(cfg.seed == 123);
  CHECK(cfg.data_root == "/tmp/x");

  CHECK_THROWS_AS(apply_override(cfg, "optim.lr"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "lr=0.1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "optim.banana=1"), ConfigError);
}

TEST_CASE("validation rejects out-of-range fields before any compute") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto expect_bad = [](void (*mutate)(RunConfig&)) {
    RunConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  expect_bad([](RunConfig& c) { c.lr = 0; });
  expect_bad([](RunConfig& c) { c.momentum = 1.0; });
  expect_bad([](RunConfig& c) { c.batch_size = 0; });
  expect_bad([](RunConfig& c) { c.positive_fraction = 1.5; });
  expect_bad([](RunConfig& c) { c.mask_threshold = 1.0; });
  expect_bad([](RunConfig& c) { c.trim_threshold = 0.0; });
  expect_bad([](RunConfig& c) { c.backbone = "resnet50"; });
  expect_bad([](RunConfig& c) { c.eval_mode = "both"; });
  expect_bad([](RunConfig& c) { c.norm_std = 0.0; });
  expect_bad([](RunConfig& c) { c.image_height = 4; });
}

TEST_CASE("config file io and fingerprints") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "reid_cfg_test";
  fs::create_directories(dir);
  RunConfig cfg;
  cfg.lr = 0.007;
  save_config(cfg, (dir / "a.ini").string());
  RunConfig back = load_config((dir / "a.ini").string());
  CHECK(back.lr == 0.007);
  CHECK_THROWS_AS(load_config((dir / "missing.ini").string()), IoError);

  uint64_t f1 = config_fingerprint(cfg);
  cfg.seed += 1;
  CHECK(config_fingerprint(cfg) != f1);
}
