#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "reid/data.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("reid_data_test" ) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p).put('x');
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("filename parsing and dense identity assignment") {
  fs::path root = fresh_dir("scan");
  touch(root / "train" / "0007_c2_0001.png");
  touch(root / "train" / "0007_c1_0002.png");
  touch(root / "train" / "0003_c1_0001.png");
  touch(root / "query" / "0007_c1_0003.png");
  touch(root / "gallery" / "0007_c2_0004.png");

  DatasetIndex data = scan_dataset(root.string());
  REQUIRE(data.samples.size() == 5);
  CHECK(data.num_train_identities == 2);

  // Sorted within split; train comes first.
  CHECK(data.samples[0].identity == 3);
  CHECK(data.samples[1].identity == 7);
  CHECK(data.samples[1].camera == 1);
  CHECK(data.samples[2].camera == 2);

  // Same identity across cameras -> same dense label; sorted raw ids map 3->0, 7->1.
  CHECK(data.samples[1].label == 1);
  CHECK(data.samples[2].label == 1);
  CHECK(data.samples[0].label == 0);
  CHECK(data.dense_label.at(7) == 1);

  // Scanning is idempotent and order-stable.
  DatasetIndex again = scan_dataset(root.string());
  REQUIRE(again.samples.size() == data.samples.size());
  for (size_t i = 0; i < data.samples.size(); ++i) {
    CHECK(again.samples[i].path == data.samples[i].path);
    CHECK(again.samples[i].label == data.samples[i].label);
  }
}

TEST_CASE("scan errors: malformed filename names the file; empty split reported") {
  fs::path root = fresh_dir("scan_bad");
  touch(root / "train" / "0001_c1_0001.png");
  touch(root / "query" / "0001_c2_0001.png");
  touch(root / "gallery" / "badname.png");
  try {
    scan_dataset(root.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("badname.png") != std::string::npos);
  }

  fs::path root2 = fresh_dir("scan_empty");
  touch(root2 / "train" / "0001_c1_0001.png");
  fs::create_directories(root2 / "query");
  fs::create_directories(root2 / "gallery");
  CHECK_THROWS_AS(scan_dataset(root2.string()), DataError);
}

TEST_CASE("synthetic generator: counts, splits, manifest, determinism") {
  fs::path root = fresh_dir("synth_a");
  SynthManifest mf = generate_synthetic(root.string(), 8, 6, 48, 24, 2, 99);
  CHECK(mf.total == 48);
  CHECK(mf.train == 32);
  CHECK(mf.query == 8);
  CHECK(mf.gallery == 8);

  DatasetIndex data = scan_dataset(root.string());
  CHECK(static_cast<int>(data.samples.size()) == mf.total);
  CHECK(data.train.size() == 32);
  CHECK(data.query.size() == 8);
  CHECK(data.gallery.size() == 8);
  CHECK(data.num_train_identities == 8);

  // Manifest line count matches the scan.
  std::ifstream manifest(mf.manifest_path);
  int lines = 0;
  std::string line;
  while (std::getline(manifest, line))
    if (!line.empty()) ++lines;
  CHECK(lines == mf.total);

  // Every identity is retrievable: query and gallery identity sets overlap,
  // and the query's same-id gallery image is on a different camera.
  for (int qi : data.query) {
    bool has_valid = false;
    for (int gi : data.gallery)
      if (data.samples[gi].identity == data.samples[qi].identity &&
          data.samples[gi].camera != data.samples[qi].camera)
        has_valid = true;
    CHECK(has_valid);
  }

  // Same seed -> bitwise-identical images.
  fs::path root2 = fresh_dir("synth_b");
  generate_synthetic(root2.string(), 8, 6, 48, 24, 2, 99);
  int compared = 0;
  for (const auto& s : data.samples) {
    fs::path rel = fs::relative(s.path, root);
    CHECK(slurp(s.path) == slurp(root2 / rel));
    ++compared;
  }
  CHECK(compared == 48);

  // Different seed -> different pixels somewhere.
  fs::path root3 = fresh_dir("synth_c");
  generate_synthetic(root3.string(), 8, 6, 48, 24, 2, 100);
  bool any_diff = false;
  for (const auto& s : data.samples) {
    fs::path rel = fs::relative(s.path, root);
    if (slurp(s.path) != slurp(root3 / rel)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("image loader shapes, range and caching") {
  fs::path root = fresh_dir("loader");
  generate_synthetic(root.string(), 2, 3, 32, 16, 2, 5);
  DatasetIndex data = scan_dataset(root.string());
  ImageLoader loader(32, 16, 0.5, 0.5);
  const Tensor& img = loader.load(data.samples[0].path);
  CHECK(img.shape() == Shape{3, 32, 16});
  for (int64_t i = 0; i < img.numel(); ++i) {
    CHECK(img.data()[i] >= -1.0);
    CHECK(img.data()[i] <= 1.0);
  }
  Tensor batch = loader.load_batch({data.samples[0].path, data.samples[1].path});
  CHECK(batch.shape() == Shape{2, 3, 32, 16});
}

TEST_CASE("pair sampler composition and determinism") {
  fs::path root = fresh_dir("sampler");
  generate_synthetic(root.string(), 4, 6, 32, 16, 2, 7);
  DatasetIndex data = scan_dataset(root.string());

  SUBCASE("positive_fraction extremes") {
    PairSampler all_pos(data, 6, 1.0, 3);
    for (const auto& p : all_pos.next_indices()) {
      CHECK(p.label == 1);
      CHECK(data.samples[p.a].identity == data.samples[p.b].identity);
    }
    PairSampler all_neg(data, 6, 0.0, 3);
    for (const auto& p : all_neg.next_indices()) {
      CHECK(p.label == 0);
      CHECK(data.samples[p.a].identity != data.samples[p.b].identity);
    }
  }

  SUBCASE("fixed seed reproduces the pair stream") {
    PairSampler s1(data, 8, 0.5, 11), s2(data, 8, 0.5, 11);
    for (int round = 0; round < 3; ++round) {
      auto p1 = s1.next_indices();
      auto p2 = s2.next_indices();
      REQUIRE(p1.size() == p2.size());
      for (size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].a == p2[i].a);
        CHECK(p1[i].b == p2[i].b);
        CHECK(p1[i].label == p2[i].label);
      }
    }
  }

  SUBCASE("positives prefer cross-camera images") {
    PairSampler s(data, 16, 1.0, 13);
    int cross = 0, total = 0;
    for (const auto& p : s.next_indices()) {
      ++total;
      if (data.samples[p.a].camera != data.samples[p.b].camera) ++cross;
    }
    CHECK(cross == total);  // every identity here has both cameras
  }

  SUBCASE("batches satisfy the pair_label invariant") {
    PairSampler s(data, 8, 0.5, 17);
    ImageLoader loader(32, 16, 0.5, 0.5);
    PairBatch batch = make_pair_batch(data, s.next_indices(), loader);
    CHECK_NOTHROW(batch.check_invariants());
    CHECK(batch.images_a.dim(0) == 8);
    int pos = 0;
    for (int l : batch.pair_label) pos += l;
    CHECK(pos == 4);  // round(0.5 * 8)
  }
}

TEST_CASE("pair sampler error paths") {
  fs::path root = fresh_dir("sampler_bad");
  // Each identity has exactly one train image (ipi=3 -> 1 train, 1 query, 1 gallery).
  generate_synthetic(root.string(), 3, 3, 32, 16, 2, 9);
  DatasetIndex data = scan_dataset(root.string());
  CHECK_THROWS_AS(PairSampler(data, 4, 0.5, 1), DataError);   // positives impossible
  CHECK_NOTHROW(PairSampler(data, 4, 0.0, 1));                // negatives still fine
}

TEST_CASE("pixel-space nearest neighbor beats chance on the synthetic set") {
  fs::path root = fresh_dir("pixel_nn");
  generate_synthetic(root.string(), 8, 6, 48, 24, 2, 21);
  DatasetIndex data = scan_dataset(root.string());
  ImageLoader loader(48, 24, 0.5, 0.5);
  int correct = 0;
  for (int qi : data.query) {
    const Tensor& q = loader.load(data.samples[qi].path);
    double best = 1e300;
    int best_g = -1;
    for (int gi : data.gallery) {
      if (data.samples[gi].identity == data.samples[qi].identity &&
          data.samples[gi].camera == data.samples[qi].camera)
        continue;
      const Tensor& g = loader.load(data.samples[gi].path);
      double d = 0;
      for (int64_t i = 0; i < q.numel(); ++i) {
        double x = q.data()[i] - g.data()[i];
        d += x * x;
      }
      if (d < best) {
        best = d;
        best_g = gi;
      }
    }
    if (best_g >= 0 && data.samples[best_g].identity == data.samples[qi].identity) ++correct;
  }
  double rank1 = static_cast<double>(correct) / data.query.size();
  CHECK(rank1 > 1.0 / 8.0);  // sanity floor: must beat chance
}
