#include "reid/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>

namespace fs = std::filesystem;

namespace reid {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    default: return "gallery";
  }
}

static bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

DatasetIndex scan_dataset(const std::string& root) {
  static const std::regex name_re(R"((\d+)_c(\d+)_(\d+))");
  DatasetIndex out;
  const Split splits[] = {Split::train, Split::query, Split::gallery};
  for (Split split : splits) {
    fs::path dir = fs::path(root) / split_name(split);
    if (!fs::is_directory(dir))
      throw DataError("dataset root missing directory: " + dir.string());
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
      files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError(std::string("empty split: ") + split_name(split));
    for (const auto& file : files) {
      std::string stem = fs::path(file).stem().string();
      std::smatch m;
      if (!std::regex_match(stem, m, name_re))
        throw DataError("malformed filename (want <identity>_c<camera>_<seq>.<ext>): " + file);
      ReidSample s;
      s.path = file;
      s.identity = std::stoi(m[1]);
      s.camera = std::stoi(m[2]);
      s.split = split;
      out.samples.push_back(std::move(s));
    }
  }

  std::set<int> train_ids;
  for (const auto& s : out.samples)
    if (s.split == Split::train) train_ids.insert(s.identity);
  int dense = 0;
  for (int id : train_ids) out.dense_label[id] = dense++;
  out.num_train_identities = dense;

  for (size_t i = 0; i < out.samples.size(); ++i) {
    auto& s = out.samples[i];
    auto it = out.dense_label.find(s.identity);
    s.label = it == out.dense_label.end() ? -1 : it->second;
    switch (s.split) {
      case Split::train: out.train.push_back(static_cast<int>(i)); break;
      case Split::query: out.query.push_back(static_cast<int>(i)); break;
      case Split::gallery: out.gallery.push_back(static_cast<int>(i)); break;
    }
  }
  return out;
}

ImageLoader::ImageLoader(int height, int width, double mean, double stddev)
    : h_(height), w_(width), mean_(mean), std_(stddev) {
  if (stddev <= 0) throw ConfigError("image normalization std must be > 0");
}

const Tensor& ImageLoader::load(const std::string& path) {
  auto it = cache_.find(path);
  if (it != cache_.end()) return it->second;
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty()) throw IoError("cannot read image: " + path);
  cv::Mat resized;
  cv::resize(img, resized, cv::Size(w_, h_), 0, 0, cv::INTER_LINEAR);
  Tensor t({3, h_, w_});
  Scalar* p = t.data();
  // BGR -> RGB, channel-planar layout.
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x)
        p[(static_cast<int64_t>(c) * h_ + y) * w_ + x] =
            (resized.at<cv::Vec3b>(y, x)[2 - c] / 255.0 - mean_) / std_;
  return cache_.emplace(path, std::move(t)).first->second;
}

Tensor ImageLoader::load_batch(const std::vector<std::string>& paths) {
  if (paths.empty()) throw DataError("load_batch: no paths");
  Tensor out({static_cast<int>(paths.size()), 3, h_, w_});
  int64_t block = static_cast<int64_t>(3) * h_ * w_;
  for (size_t i = 0; i < paths.size(); ++i) {
    const Tensor& img = load(paths[i]);
    std::copy(img.data(), img.data() + block, out.data() + i * block);
  }
  return out;
}

void PairBatch::check_invariants() const {
  size_t b = pair_label.size();
  if (identity_a.size() != b || identity_b.size() != b || labels_a.size() != b ||
      labels_b.size() != b)
    throw DataError("pair batch: inconsistent sizes");
  for (size_t i = 0; i < b; ++i)
    if (pair_label[i] != (identity_a[i] == identity_b[i] ? 1 : 0))
      throw DataError("pair batch: pair_label does not match identities at row " +
                      std::to_string(i));
}

PairSampler::PairSampler(const DatasetIndex& data, int batch_size, double positive_fraction,
                         uint64_t seed)
    : data_(data), batch_size_(batch_size), rng_(seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (positive_fraction < 0 || positive_fraction > 1)
    throw ConfigError("positive_fraction must be in [0,1]");
  n_pos_ = static_cast<int>(std::lround(positive_fraction * batch_size));

  for (int idx : data.train) {
    const auto& s = data.samples[idx];
    by_identity_[s.label].push_back(idx);
    by_identity_camera_[s.label][s.camera].push_back(idx);
  }
  for (const auto& [id, list] : by_identity_) {
    identities_.push_back(id);
    if (list.size() >= 2) pair_identities_.push_back(id);
  }
  if (identities_.empty()) throw DataError("pair sampler: empty train split");
  if (n_pos_ > 0 && pair_identities_.empty())
    throw DataError("pair sampler: no identity has >= 2 images; cannot form positive pairs");
  if (n_pos_ < batch_size_ && identities_.size() < 2)
    throw DataError("pair sampler: need >= 2 identities to form negative pairs");
}

std::vector<PairSampler::IndexPair> PairSampler::next_indices() {
  std::vector<IndexPair> out;
  out.reserve(batch_size_);
  for (int i = 0; i < batch_size_; ++i) {
    if (i < n_pos_) {
      int id = pair_identities_[rng_.uniform_int(pair_identities_.size())];
      const auto& by_cam = by_identity_camera_.at(id);
      int a, b;
      if (by_cam.size() >= 2) {
        // Prefer a cross-camera positive.
        std::vector<int> cams;
        for (const auto& [cam, _] : by_cam) cams.push_back(cam);
        int ci = static_cast<int>(rng_.uniform_int(cams.size()));
        int cj = static_cast<int>(rng_.uniform_int(cams.size() - 1));
        if (cj >= ci) ++cj;
        const auto& la = by_cam.at(cams[ci]);
        const auto& lb = by_cam.at(cams[cj]);
        a = la[rng_.uniform_int(la.size())];
        b = lb[rng_.uniform_int(lb.size())];
      } else {
        const auto& list = by_identity_.at(id);
        int ia = static_cast<int>(rng_.uniform_int(list.size()));
        int ib = static_cast<int>(rng_.uniform_int(list.size() - 1));
        if (ib >= ia) ++ib;
        a = list[ia];
        b = list[ib];
      }
      out.push_back({a, b, 1});
    } else {
      int ii = static_cast<int>(rng_.uniform_int(identities_.size()));
      int ij = static_cast<int>(rng_.uniform_int(identities_.size() - 1));
      if (ij >= ii) ++ij;
      const auto& la = by_identity_.at(identities_[ii]);
      const auto& lb = by_identity_.at(identities_[ij]);
      out.push_back({la[rng_.uniform_int(la.size())], lb[rng_.uniform_int(lb.size())], 0});
    }
  }
  return out;
}

static void flip_horizontal(Tensor& batch, int row) {
  int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Scalar* p = batch.data() + static_cast<int64_t>(row) * c * h * w;
  for (int ic = 0; ic < c; ++ic)
    for (int y = 0; y < h; ++y) {
      Scalar* line = p + (static_cast<int64_t>(ic) * h + y) * w;
      std::reverse(line, line + w);
    }
}

PairBatch make_pair_batch(const DatasetIndex& data, const std::vector<PairSampler::IndexPair>& pairs,
                          ImageLoader& loader, bool augment_flip, Rng* flip_rng) {
  if (pairs.empty()) throw DataError("make_pair_batch: empty pair list");
  std::vector<std::string> paths_a, paths_b;
  PairBatch batch;
  for (const auto& pr : pairs) {
    const auto& sa = data.samples[pr.a];
    const auto& sb = data.samples[pr.b];
    paths_a.push_back(sa.path);
    paths_b.push_back(sb.path);
    batch.labels_a.push_back(sa.label);
    batch.labels_b.push_back(sb.label);
    batch.identity_a.push_back(sa.identity);
    batch.identity_b.push_back(sb.identity);
    batch.pair_label.push_back(pr.label);
  }
  batch.images_a = loader.load_batch(paths_a);
  batch.images_b = loader.load_batch(paths_b);
  if (augment_flip && flip_rng) {
    for (size_t i = 0; i < pairs.size(); ++i) {
      if (flip_rng->uniform() < 0.5) flip_horizontal(batch.images_a, static_cast<int>(i));
      if (flip_rng->uniform() < 0.5) flip_horizontal(batch.images_b, static_cast<int>(i));
    }
  }
  batch.check_invariants();
  return batch;
}

// --- synthetic data ----------------------------------------------------------

static uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

static cv::Scalar hsv_color(double hue, double sat, double val) {
  cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue * 179, sat * 255, val * 255));
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  auto v = bgr.at<cv::Vec3b>(0, 0);
  return cv::Scalar(v[0], v[1], v[2]);
}

namespace {
struct IdentitySignature {
  cv::Scalar torso, legs, head, accent;
  bool ellipse_torso;
  double body_width;   // relative to image width
  double head_radius;  // relative to body width
  double accent_y;     // relative position of the accent stripe on the torso
};
}  // namespace

static IdentitySignature identity_signature(uint64_t seed, int id) {
  Rng rng(mix(seed, 0x5151ULL + id));
  IdentitySignature sig;
  double hue = rng.uniform();
  sig.torso = hsv_color(hue, 0.85, 0.9);
  sig.legs = hsv_color(std::fmod(hue + 0.35 + 0.3 * rng.uniform(), 1.0), 0.8, 0.8);
  sig.head = hsv_color(std::fmod(hue + 0.1, 1.0), 0.3, 0.95);
  sig.accent = hsv_color(std::fmod(hue + 0.5, 1.0), 0.9, 1.0);
  sig.ellipse_torso = rng.uniform() < 0.5;
  sig.body_width = 0.28 + 0.12 * rng.uniform();
  sig.head_radius = 0.35 + 0.2 * rng.uniform();
  sig.accent_y = 0.25 + 0.5 * rng.uniform();
  return sig;
}

static cv::Mat render_person(const IdentitySignature& sig, int h, int w, int camera, Rng& rng) {
  // Cluttered background with a camera-dependent tint.
  double base = 120 + 60 * rng.uniform();
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(base, base, base));
  int n_clutter = 6 + static_cast<int>(rng.uniform_int(6));
  for (int i = 0; i < n_clutter; ++i) {
    cv::Scalar color = hsv_color(rng.uniform(), 0.3 * rng.uniform(), 0.4 + 0.5 * rng.uniform());
    int x0 = static_cast<int>(rng.uniform_int(w)), y0 = static_cast<int>(rng.uniform_int(h));
    int x1 = static_cast<int>(rng.uniform_int(w)), y1 = static_cast<int>(rng.uniform_int(h));
    cv::rectangle(img, {std::min(x0, x1), std::min(y0, y1)}, {std::max(x0, x1), std::max(y0, y1)},
                  color, cv::FILLED);
  }

  // Figure with translation/scale jitter simulating viewpoint change.
  double scale = 0.8 + 0.25 * rng.uniform();
  double cx = w * (0.5 + 0.2 * (rng.uniform() - 0.5));
  double body_w = sig.body_width * w * scale;
  double top = h * (0.12 + 0.08 * rng.uniform());
  double head_r = sig.head_radius * body_w * 0.5;
  double torso_h = h * 0.38 * scale;
  double legs_h = h * 0.32 * scale;

  cv::circle(img, cv::Point2d(cx, top + head_r), static_cast<int>(head_r), sig.head, cv::FILLED);
  double torso_top = top + 2 * head_r;
  cv::Rect2d torso(cx - body_w / 2, torso_top, body_w, torso_h);
  if (sig.ellipse_torso)
    cv::ellipse(img, cv::Point2d(cx, torso_top + torso_h / 2),
                cv::Size2d(body_w / 2, torso_h / 2), 0, 0, 360, sig.torso, cv::FILLED);
  else
    cv::rectangle(img, torso, sig.torso, cv::FILLED);
  cv::rectangle(img,
                cv::Rect2d(cx - body_w / 2, torso_top + sig.accent_y * torso_h, body_w,
                           std::max(2.0, torso_h * 0.12)),
                sig.accent, cv::FILLED);
  double leg_w = body_w * 0.35;
  double legs_top = torso_top + torso_h;
  cv::rectangle(img, cv::Rect2d(cx - body_w / 2, legs_top, leg_w, legs_h), sig.legs, cv::FILLED);
  cv::rectangle(img, cv::Rect2d(cx + body_w / 2 - leg_w, legs_top, leg_w, legs_h), sig.legs,
                cv::FILLED);

  // Occasional occluding bar.
  if (rng.uniform() < 0.3) {
    int oy = static_cast<int>(h * (0.2 + 0.6 * rng.uniform()));
    int oh = std::max(2, static_cast<int>(h * 0.08));
    cv::rectangle(img, cv::Rect(0, oy, w, oh), cv::Scalar(90, 90, 90), cv::FILLED);
  }

  // Camera tint + brightness offset.
  double tint = camera % 2 == 0 ? 1.0 : 0.92;
  double warm = camera % 2 == 0 ? 0 : 12;
  img.convertTo(img, -1, tint, 0);
  img += cv::Scalar(-warm * 0.5, 0, warm);
  return img;
}

SynthManifest generate_synthetic(const std::string& root, int n_identities,
                                 int images_per_identity, int height, int width, int n_cameras,
                                 uint64_t seed) {
  if (n_identities < 2) throw ConfigError("generate_synthetic: need >= 2 identities");
  if (images_per_identity < 3) throw ConfigError("generate_synthetic: need >= 3 images per identity");
  if (n_cameras < 2) throw ConfigError("generate_synthetic: need >= 2 cameras");

  fs::path rootp(root);
  std::error_code ec;
  fs::create_directories(rootp, ec);
  for (const char* split : {"train", "query", "gallery"}) {
    fs::create_directories(rootp / split, ec);
    if (ec) throw IoError("cannot create directory under " + root + ": " + ec.message());
  }

  int n_query = std::max(1, images_per_identity / 6);
  int n_gallery = std::max(1, images_per_identity / 6);

  SynthManifest mf;
  std::ofstream manifest(rootp / "manifest.txt");
  if (!manifest) throw IoError("cannot write manifest under " + root);
  for (int id = 0; id < n_identities; ++id) {
    IdentitySignature sig = identity_signature(seed, id);
    for (int j = 0; j < images_per_identity; ++j) {
      int camera = j % n_cameras;
      Rng rng(mix(mix(seed, 0xA11CE + id), j));
      cv::Mat img = render_person(sig, height, width, camera, rng);
      const char* split = j >= images_per_identity - n_gallery ? "gallery"
                          : j >= images_per_identity - n_gallery - n_query ? "query"
                                                                           : "train";
      char name[64];
      std::snprintf(name, sizeof(name), "%04d_c%d_%04d.png", id, camera, j);
      fs::path file = rootp / split / name;
      if (!cv::imwrite(file.string(), img))
        throw IoError("cannot write image: " + file.string());
      manifest << split << "/" << name << "," << id << "," << camera << "," << split << "\n";
      mf.total++;
      if (std::string(split) == "train") mf.train++;
      else if (std::string(split) == "query") mf.query++;
      else mf.gallery++;
    }
  }
  mf.manifest_path = (rootp / "manifest.txt").string();
  return mf;
}

}  // namespace reid
