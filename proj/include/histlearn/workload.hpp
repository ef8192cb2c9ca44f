#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "histlearn/domain.hpp"

namespace histlearn::workload {

struct GaussianComponent {
  std::vector<double> mean;  // one entry per dimension, in [0, r_i]
  double variance = 1.0;
  double weight = 1.0;
};

enum class Preset { custom, type1, type2, gauss_nd };

/// Gaussian-mixture dataset description. Presets leave components empty;
/// the generator draws their means uniformly from [0, r] per dimension
/// using the generation seed, so every seed is a fresh dataset.
struct MixtureSpec {
  AttributeDomain domain;
  std::vector<GaussianComponent> components;
  std::int64_t records = 100000;
  Preset preset = Preset::custom;

  /// 17 components, variance 625.
  static MixtureSpec type1(std::int64_t r, std::int64_t records = 100000);
  /// 5 components, variance 100; concentrates mass on few cells.
  static MixtureSpec type2(std::int64_t r, std::int64_t records = 100000);
  /// 2-D: 9 components, variance 100. 3-D: 5 components, variance 25.
  static MixtureSpec gauss_nd(const AttributeDomain& dom, std::int64_t records = 100000);
  static MixtureSpec custom_spec(AttributeDomain dom, std::vector<GaussianComponent> comps,
                                 std::int64_t records);

  void validate() const;
};

FrequencyTensor gen_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed);

enum class QueryModel { uniform, data_dependent };

struct QueryModelSpec {
  QueryModel model = QueryModel::uniform;
  std::int64_t count = 1;
  double max_volume_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Draws hyper-rectangles around centers: uniform centers over the domain,
/// or centers sampled from the data distribution. Every emitted query lies
/// within the domain and has volume at most max_volume_fraction of it
/// (floored at one cell).
std::vector<RangeQuery> gen_queries(const QueryModelSpec& spec, const FrequencyTensor& freq);

/// Labels each query with its exact cardinality, order preserved.
std::vector<QueryFeedbackRecord> label_queries(const FrequencyTensor& freq,
                                               std::span<const RangeQuery> queries,
                                               int threads = 0);

/// Builds a frequency tensor from a plain CSV of records (one row per
/// record, d integer columns). Zero-based files (values in [0, r_i - 1]
/// with at least one zero) are shifted up by one.
FrequencyTensor ingest_records_csv(const std::string& path, const AttributeDomain& dom);

}  // namespace histlearn::workload
