#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histlearn/domain.hpp"
#include "histlearn/equihist.hpp"
#include "histlearn/haar.hpp"
#include "histlearn/histogram.hpp"

namespace histlearn::kernels {

/// Runtime default worker count (OMP_NUM_THREADS when built with OpenMP).
int default_threads();

/// d-dimensional inclusion-exclusion prefix sums over a frequency tensor;
/// box sums in O(2^d) per query.
class SummedAreaTable {
 public:
  explicit SummedAreaTable(const FrequencyTensor& freq);

  const AttributeDomain& domain() const { return domain_; }
  std::int64_t box_sum(const RangeQuery& q) const;

 private:
  AttributeDomain domain_;
  std::vector<std::int64_t> prefix_;  // shape (r_i + 1), row-major
  std::vector<std::int64_t> stride_;
};

// Batch kernels. Each comes in two forms: a serial reference (_ref) kept
// for testing and benchmarking, and an OpenMP version whose result is
// bit-identical for any thread count (fixed shard decomposition, ordered
// merge). threads = 0 picks the runtime default.

std::vector<std::int64_t> exact_cardinalities_ref(const FrequencyTensor& freq,
                                                  std::span<const RangeQuery> queries);
std::vector<std::int64_t> exact_cardinalities(const SummedAreaTable& sat,
                                              std::span<const RangeQuery> queries,
                                              int threads = 0);

equihist::NormalEq accumulate_normal_ref(const equihist::EquiLayout& layout,
                                         std::span<const QueryFeedbackRecord> qfrs);
equihist::NormalEq accumulate_normal(const equihist::EquiLayout& layout,
                                     std::span<const QueryFeedbackRecord> qfrs,
                                     int threads = 0);

std::vector<double> estimate_batch_ref(const BucketHistogram& h,
                                       std::span<const RangeQuery> queries);
std::vector<double> estimate_batch(const BucketHistogram& h,
                                   std::span<const RangeQuery> queries, int threads = 0);

std::vector<double> estimate_batch_ref(const WaveletSketch& sk,
                                       std::span<const RangeQuery> queries);
std::vector<double> estimate_batch(const WaveletSketch& sk,
                                   std::span<const RangeQuery> queries, int threads = 0);

/// Accumulates y = Σ_i z_i * indicator(q_i) over the padded cell tensor via
/// per-dimension difference arrays plus prefix sums (the correlation pass
/// input). Row-major over pd.padded; cells in the padding stay zero.
std::vector<double> weighted_query_cells_ref(const haar::PaddedDomain& pd,
                                             std::span<const QueryFeedbackRecord> qfrs,
                                             std::span<const double> z);
std::vector<double> weighted_query_cells(const haar::PaddedDomain& pd,
                                         std::span<const QueryFeedbackRecord> qfrs,
                                         std::span<const double> z, int threads = 0);

}  // namespace histlearn::kernels
