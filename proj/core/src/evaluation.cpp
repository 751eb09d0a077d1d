#include "reid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "reid/attention.hpp"

namespace reid {

void DistanceMatrix::validate() const {
  if (q < 1 || g < 1) throw DataError("distance matrix: empty query or gallery");
  if (values.size() != static_cast<size_t>(q) * g ||
      query_ids.size() != static_cast<size_t>(q) || gallery_ids.size() != static_cast<size_t>(g) ||
      query_cams.size() != static_cast<size_t>(q) || gallery_cams.size() != static_cast<size_t>(g))
    throw DataError("distance matrix: inconsistent sizes");
  for (double v : values)
    if (!std::isfinite(v) || v < 0) throw DataError("distance matrix: entries must be finite and >= 0");
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "feature_only") return EvalMode::feature_only;
  if (name == "fused") return EvalMode::fused;
  throw ConfigError("unknown eval mode '" + name + "'");
}

namespace {

struct EvalSets {
  std::vector<int> query, gallery;  // sample indices
};

EvalSets eval_sets(const DatasetIndex& data, int max_gallery) {
  EvalSets s;
  s.query = data.query;
  s.gallery = data.gallery;
  if (s.query.empty() || s.gallery.empty())
    throw DataError("evaluation requires non-empty query and gallery splits");
  if (max_gallery > 0 && static_cast<int>(s.gallery.size()) > max_gallery)
    s.gallery.resize(max_gallery);
  return s;
}

void fill_meta(const DatasetIndex& data, const EvalSets& sets, DistanceMatrix& dm) {
  dm.q = static_cast<int>(sets.query.size());
  dm.g = static_cast<int>(sets.gallery.size());
  for (int i : sets.query) {
    dm.query_ids.push_back(data.samples[i].identity);
    dm.query_cams.push_back(data.samples[i].camera);
  }
  for (int i : sets.gallery) {
    dm.gallery_ids.push_back(data.samples[i].identity);
    dm.gallery_cams.push_back(data.samples[i].camera);
  }
}

// Feature vectors for a list of samples, batched to bound graph size.
std::vector<std::vector<Scalar>> features_for(Model& model, const DatasetIndex& data,
                                              ImageLoader& loader, const std::vector<int>& idx) {
  std::vector<std::vector<Scalar>> out;
  const int chunk = 16;
  for (size_t start = 0; start < idx.size(); start += chunk) {
    std::vector<std::string> paths;
    for (size_t i = start; i < std::min(idx.size(), start + chunk); ++i)
      paths.push_back(data.samples[idx[i]].path);
    FeatureBundle fb = model.extract_features(loader.load_batch(paths));
    const Tensor& f = fb.vector.value();
    int d = f.dim(1);
    for (int r = 0; r < f.dim(0); ++r)
      out.emplace_back(f.data() + static_cast<int64_t>(r) * d,
                       f.data() + static_cast<int64_t>(r + 1) * d);
  }
  return out;
}

double min_max_scale(std::vector<double>& v) {
  auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
  const double mn = *mn_it, mx = *mx_it;
  const double range = mx - mn;
  if (range <= 0) {
    std::fill(v.begin(), v.end(), 0.0);
    return 0;
  }
  for (double& x : v) x = (x - mn) / range;
  return range;
}

}  // namespace

DistanceMatrix feature_distance_matrix(Model& model, const DatasetIndex& data, ImageLoader& loader,
                                       int max_gallery) {
  EvalSets sets = eval_sets(data, max_gallery);
  DistanceMatrix dm;
  fill_meta(data, sets, dm);
  auto fq = features_for(model, data, loader, sets.query);
  auto fg = features_for(model, data, loader, sets.gallery);
  dm.values.resize(static_cast<size_t>(dm.q) * dm.g);
  for (int i = 0; i < dm.q; ++i)
    for (int j = 0; j < dm.g; ++j) {
      double s = 0;
      for (size_t k = 0; k < fq[i].size(); ++k) {
        double d = fq[i][k] - fg[j][k];
        s += d * d;
      }
      dm.values[static_cast<size_t>(i) * dm.g + j] = std::sqrt(s);
    }
  dm.validate();
  return dm;
}

DistanceMatrix attention_distance_matrix(Model& model, const DatasetIndex& data,
                                         ImageLoader& loader, Scalar trim_t, int l_align,
                                         int max_gallery) {
  EvalSets sets = eval_sets(data, max_gallery);
  DistanceMatrix dm;
  fill_meta(data, sets, dm);
  dm.values.resize(static_cast<size_t>(dm.q) * dm.g);

  const int chunk = 8;
  for (int i = 0; i < dm.q; ++i) {
    const std::string& qpath = data.samples[sets.query[i]].path;
    for (int j0 = 0; j0 < dm.g; j0 += chunk) {
      int n = std::min(chunk, dm.g - j0);
      std::vector<std::string> paths_q(n, qpath), paths_g;
      for (int j = j0; j < j0 + n; ++j) paths_g.push_back(data.samples[sets.gallery[j]].path);
      SiameseAttention sam =
          siamese_attention_maps(model, Var::constant(loader.load_batch(paths_q)),
                                 Var::constant(loader.load_batch(paths_g)),
                                 /*create_graph=*/false);
      int la = l_align > 0 ? l_align : sam.m1.value().dim(1);
      auto [v1, v2] =
          trim_and_align(attention_profile(sam.m1), attention_profile(sam.m2), trim_t, la);
      Tensor d = spatial_consistency(v1, v2).value();
      for (int j = 0; j < n; ++j)
        dm.values[static_cast<size_t>(i) * dm.g + j0 + j] = d.data()[j];
    }
  }
  dm.validate();
  return dm;
}

DistanceMatrix fuse_components(const DistanceMatrix& d_f, const DistanceMatrix& d_a) {
  d_f.validate();
  d_a.validate();
  if (d_f.q != d_a.q || d_f.g != d_a.g)
    throw ShapeError("fuse_components: component matrices disagree in size");
  DistanceMatrix out = d_f;
  std::vector<double> nf = d_f.values, na = d_a.values;
  min_max_scale(nf);
  min_max_scale(na);
  for (size_t i = 0; i < nf.size(); ++i) out.values[i] = nf[i] + na[i];
  out.validate();
  return out;
}

DistanceMatrix fused_distances(Model& model, const DatasetIndex& data, ImageLoader& loader,
                               const EvalOptions& opts) {
  DistanceMatrix d_f = feature_distance_matrix(model, data, loader, opts.max_gallery);
  if (opts.mode == EvalMode::feature_only) return d_f;
  DistanceMatrix d_a =
      attention_distance_matrix(model, data, loader, opts.trim_t, opts.l_align, opts.max_gallery);
  return fuse_components(d_f, d_a);
}

// Ranked gallery indices for one query; ties keep gallery order (stable).
static std::vector<int> ranked_row(const DistanceMatrix& dm, int qi) {
  std::vector<int> order(dm.g);
  std::iota(order.begin(), order.end(), 0);
  const double* row = dm.values.data() + static_cast<size_t>(qi) * dm.g;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return row[a] < row[b]; });
  return order;
}

CmcResult cmc(const DistanceMatrix& dm, int max_rank) {
  dm.validate();
  if (max_rank < 1) throw ConfigError("cmc: max_rank must be >= 1");
  CmcResult res;
  res.curve.assign(max_rank, 0.0);
  for (int i = 0; i < dm.q; ++i) {
    auto order = ranked_row(dm, i);
    int pos = -1, seen = 0;
    for (int j : order) {
      if (dm.gallery_ids[j] == dm.query_ids[i] && dm.gallery_cams[j] == dm.query_cams[i])
        continue;  // excluded: same identity and same camera as the query
      if (dm.gallery_ids[j] == dm.query_ids[i]) {
        pos = seen;
        break;
      }
      ++seen;
    }
    if (pos < 0) {
      res.skipped++;
      continue;
    }
    res.evaluated++;
    for (int k = std::min(pos, max_rank - 1); k < max_rank; ++k)
      if (k >= pos) res.curve[k] += 1.0;
  }
  if (res.evaluated == 0) throw DataError("cmc: no query has a valid gallery match");
  for (double& v : res.curve) v /= res.evaluated;
  return res;
}

MapResult mean_average_precision(const DistanceMatrix& dm) {
  dm.validate();
  MapResult res;
  for (int i = 0; i < dm.q; ++i) {
    auto order = ranked_row(dm, i);
    int hits = 0, seen = 0;
    double precision_sum = 0;
    for (int j : order) {
      if (dm.gallery_ids[j] == dm.query_ids[i] && dm.gallery_cams[j] == dm.query_cams[i]) continue;
      ++seen;
      if (dm.gallery_ids[j] == dm.query_ids[i]) {
        ++hits;
        precision_sum += static_cast<double>(hits) / seen;
      }
    }
    if (hits == 0) {
      res.skipped++;
      continue;
    }
    res.evaluated++;
    res.per_query.push_back(precision_sum / hits);
  }
  if (res.evaluated == 0) throw DataError("mAP: no query has a valid gallery match");
  res.value = std::accumulate(res.per_query.begin(), res.per_query.end(), 0.0) / res.evaluated;
  return res;
}

void write_distance_matrix(const DistanceMatrix& dm, const std::string& path) {
  dm.validate();
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + path);
  bin.write(reinterpret_cast<const char*>(dm.values.data()), sizeof(double) * dm.values.size());
  std::ofstream hdr(path + ".txt");
  if (!hdr) throw IoError("cannot write " + path + ".txt");
  hdr << "rows " << dm.q << "\ncols " << dm.g << "\n";
  auto dump = [&](const char* name, const std::vector<int>& v) {
    hdr << name;
    for (int x : v) hdr << " " << x;
    hdr << "\n";
  };
  dump("query_ids", dm.query_ids);
  dump("query_cams", dm.query_cams);
  dump("gallery_ids", dm.gallery_ids);
  dump("gallery_cams", dm.gallery_cams);
}

DistanceMatrix read_distance_matrix(const std::string& path) {
  std::ifstream hdr(path + ".txt");
  if (!hdr) throw IoError("cannot read " + path + ".txt");
  DistanceMatrix dm;
  std::string key;
  hdr >> key >> dm.q >> key >> dm.g;
  auto slurp = [&](std::vector<int>& v, int n) {
    hdr >> key;
    v.resize(n);
    for (int& x : v) hdr >> x;
  };
  slurp(dm.query_ids, dm.q);
  slurp(dm.query_cams, dm.q);
  slurp(dm.gallery_ids, dm.g);
  slurp(dm.gallery_cams, dm.g);
  dm.values.resize(static_cast<size_t>(dm.q) * dm.g);
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw IoError("cannot read " + path);
  bin.read(reinterpret_cast<char*>(dm.values.data()), sizeof(double) * dm.values.size());
  if (!bin) throw IoError("truncated distance matrix: " + path);
  dm.validate();
  return dm;
}

void write_metrics(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

double mean_positive_spatial(Model& model, const DatasetIndex& data, ImageLoader& loader,
                             Split split, Scalar trim_t, int l_align, int max_pairs,
                             uint64_t seed) {
  const std::vector<int>& pool = split == Split::train  ? data.train
                                 : split == Split::query ? data.query
                                                         : data.gallery;
  std::vector<std::pair<int, int>> pairs, same_cam;
  for (size_t a = 0; a < pool.size(); ++a)
    for (size_t b = a + 1; b < pool.size(); ++b) {
      const auto& sa = data.samples[pool[a]];
      const auto& sb = data.samples[pool[b]];
      if (sa.identity != sb.identity) continue;
      (sa.camera != sb.camera ? pairs : same_cam).emplace_back(pool[a], pool[b]);
    }
  if (pairs.empty()) pairs = same_cam;
  if (pairs.empty()) throw DataError("mean_positive_spatial: no same-identity pairs in split");
  Rng rng(seed);
  // Deterministic subsample.
  for (size_t i = pairs.size(); i > 1; --i)
    std::swap(pairs[i - 1], pairs[rng.uniform_int(i)]);
  if (max_pairs > 0 && static_cast<int>(pairs.size()) > max_pairs) pairs.resize(max_pairs);

  double total = 0;
  int count = 0;
  const int chunk = 8;
  for (size_t start = 0; start < pairs.size(); start += chunk) {
    std::vector<std::string> pa, pb;
    for (size_t i = start; i < std::min(pairs.size(), start + chunk); ++i) {
      pa.push_back(data.samples[pairs[i].first].path);
      pb.push_back(data.samples[pairs[i].second].path);
    }
    SiameseAttention sam = siamese_attention_maps(model, Var::constant(loader.load_batch(pa)),
                                                  Var::constant(loader.load_batch(pb)),
                                                  /*create_graph=*/false);
    int la = l_align > 0 ? l_align : sam.m1.value().dim(1);
    auto [v1, v2] =
        trim_and_align(attention_profile(sam.m1), attention_profile(sam.m2), trim_t, la);
    Tensor d = spatial_consistency(v1, v2).value();
    for (int j = 0; j < d.dim(0); ++j) {
      total += d.data()[j];
      ++count;
    }
  }
  return total / count;
}

}  // namespace reid
