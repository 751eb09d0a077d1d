#pragma once

#include <string>
#include <utility>
#include <vector>

#include "reid/data.hpp"
#include "reid/losses.hpp"

namespace reid {

struct DistanceMatrix {
  int q = 0, g = 0;
  std::vector<double> values;  // row-major q x g
  std::vector<int> query_ids, query_cams, gallery_ids, gallery_cams;

  double at(int i, int j) const { return values[static_cast<size_t>(i) * g + j]; }
  void validate() const;
};

enum class EvalMode { feature_only, fused };
EvalMode parse_eval_mode(const std::string& name);

struct EvalOptions {
  EvalMode mode = EvalMode::feature_only;
  Scalar trim_t = 0.5;
  int l_align = 0;     // 0 -> backbone feature height
  int max_gallery = 0; // 0 -> whole gallery
};

// Pairwise Euclidean feature distances (frozen model).
DistanceMatrix feature_distance_matrix(Model& model, const DatasetIndex& data, ImageLoader& loader,
                                       int max_gallery = 0);

// Pairwise attention-profile distances: each (query, gallery) pair runs the
// Siamese attention pipeline on the same-identity logit, profiles are
// trimmed/aligned, and their l2 distance recorded.
DistanceMatrix attention_distance_matrix(Model& model, const DatasetIndex& data,
                                         ImageLoader& loader, Scalar trim_t, int l_align,
                                         int max_gallery = 0);

// Global min-max normalizes both component matrices and sums them.
DistanceMatrix fuse_components(const DistanceMatrix& d_f, const DistanceMatrix& d_a);

DistanceMatrix fused_distances(Model& model, const DatasetIndex& data, ImageLoader& loader,
                               const EvalOptions& opts);

struct CmcResult {
  std::vector<double> curve;  // curve[k] = fraction matched within rank k+1
  int evaluated = 0;
  int skipped = 0;  // queries with no valid same-id gallery entry
};

// Single-gallery-shot CMC with the same-id+same-camera exclusion rule.
CmcResult cmc(const DistanceMatrix& dm, int max_rank);

struct MapResult {
  double value = 0;
  int evaluated = 0;
  int skipped = 0;
  std::vector<double> per_query;  // AP per evaluated query
};

MapResult mean_average_precision(const DistanceMatrix& dm);

// Binary matrix file plus `<path>.txt` header with dims, ids and cameras.
void write_distance_matrix(const DistanceMatrix& dm, const std::string& path);
DistanceMatrix read_distance_matrix(const std::string& path);

void write_metrics(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& kv);

// Mean spatial-consistency over same-identity pairs of a split (cross-camera
// pairs preferred), used to compare attention consistency across models.
double mean_positive_spatial(Model& model, const DatasetIndex& data, ImageLoader& loader,
                             Split split, Scalar trim_t, int l_align, int max_pairs,
                             uint64_t seed);

}  // namespace reid
