#pragma once

#include <map>
#include <string>
#include <vector>

#include "reid/rng.hpp"
#include "reid/tensor.hpp"

namespace reid {

enum class Split { train, query, gallery };
const char* split_name(Split s);

struct ReidSample {
  std::string path;
  int identity = 0;  // raw id parsed from the filename
  int camera = 0;
  Split split = Split::train;
  int label = -1;  // dense train label; -1 when the identity is not in train
};

struct DatasetIndex {
  std::vector<ReidSample> samples;
  std::vector<int> train, query, gallery;  // indices into samples
  int num_train_identities = 0;
  std::map<int, int> dense_label;  // raw identity -> dense label
};

// Scans root/{train,query,gallery} for `<identity>_c<camera>_<seq>.<ext>`
// files. Deterministic order; identities re-indexed densely from train.
DatasetIndex scan_dataset(const std::string& root);

// Loads, resizes and per-channel normalizes images, caching decoded tensors.
class ImageLoader {
 public:
  ImageLoader(int height, int width, double mean, double stddev);
  const Tensor& load(const std::string& path);  // [3,H,W]
  Tensor load_batch(const std::vector<std::string>& paths);  // [N,3,H,W]

 private:
  int h_, w_;
  double mean_, std_;
  std::map<std::string, Tensor> cache_;
};

struct PairBatch {
  Tensor images_a, images_b;  // [B,3,H,W]
  std::vector<int> labels_a, labels_b;      // dense train labels
  std::vector<int> identity_a, identity_b;  // raw ids
  std::vector<int> pair_label;              // 1 = same identity
  void check_invariants() const;
};

// Seeded pair stream over the train split. Positives prefer cross-camera
// image pairs; batch composition is round(positive_fraction * batch_size)
// positives, the rest negatives.
class PairSampler {
 public:
  PairSampler(const DatasetIndex& data, int batch_size, double positive_fraction, uint64_t seed);

  struct IndexPair {
    int a, b;   // indices into data.samples
    int label;  // 1 = same identity
  };
  std::vector<IndexPair> next_indices();

  int positives_per_batch() const { return n_pos_; }

 private:
  const DatasetIndex& data_;
  int batch_size_;
  int n_pos_;
  Rng rng_;
  std::vector<int> identities_;                     // dense ids with >=1 image
  std::vector<int> pair_identities_;                // dense ids with >=2 images
  std::map<int, std::vector<int>> by_identity_;     // dense id -> sample indices
  std::map<int, std::map<int, std::vector<int>>> by_identity_camera_;
};

PairBatch make_pair_batch(const DatasetIndex& data, const std::vector<PairSampler::IndexPair>& pairs,
                          ImageLoader& loader, bool augment_flip = false, Rng* flip_rng = nullptr);

struct SynthManifest {
  int total = 0;
  int train = 0, query = 0, gallery = 0;
  std::string manifest_path;
};

// Renders per-identity colored figures over cluttered backgrounds with
// per-image jitter and camera-dependent tint, then splits and writes a
// manifest. Bitwise deterministic for a fixed seed.
SynthManifest generate_synthetic(const std::string& root, int n_identities,
                                 int images_per_identity, int height, int width, int n_cameras,
                                 uint64_t seed);

}  // namespace reid
