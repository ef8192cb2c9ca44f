#include "histlearn/kernels.hpp"

#include <bit>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace histlearn::kernels {

int default_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

int resolve_threads(int threads) { return threads > 0 ? threads : default_threads(); }

// Shard counts are pure functions of the workload so results never depend
// on the thread count.
std::int64_t shard_count(std::int64_t items, std::int64_t per_shard, bool allow) {
  if (!allow || items <= per_shard) return 1;
  const std::int64_t n = (items + per_shard - 1) / per_shard;
  return n < 8 ? n : 8;
}

}  // namespace

SummedAreaTable::SummedAreaTable(const FrequencyTensor& freq) : domain_(freq.domain()) {
  const int d = domain_.dims();
  std::vector<std::int64_t> shape(d);
  std::int64_t cells = 1;
  for (int i = 0; i < d; ++i) {
    shape[i] = domain_.ranges[i] + 1;
    cells *= shape[i];
  }
  stride_.assign(d, 1);
  for (int i = d - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * shape[i + 1];
  prefix_.assign(cells, 0);

  // Scatter counts at 1-based coordinates, then prefix-sum along each axis.
  const auto counts = freq.counts();
  std::vector<std::int64_t> cur(d, 1);
  for (std::int64_t flat = 0; flat < static_cast<std::int64_t>(counts.size()); ++flat) {
    std::int64_t pos = 0;
    for (int i = 0; i < d; ++i) pos += cur[i] * stride_[i];
    prefix_[pos] = counts[flat];
    int axis = d - 1;
    while (axis >= 0 && cur[axis] == domain_.ranges[axis]) {
      cur[axis] = 1;
      --axis;
    }
    if (axis >= 0) ++cur[axis];
  }
  for (int axis = 0; axis < d; ++axis) {
    const std::int64_t st = stride_[axis];
    for (std::int64_t idx = 0; idx < cells; ++idx) {
      const std::int64_t coord = (idx / st) % shape[axis];
      if (coord >= 1) prefix_[idx] += prefix_[idx - st];
    }
  }
}

std::int64_t SummedAreaTable::box_sum(const RangeQuery& q) const {
  q.check_within(domain_);
  const int d = domain_.dims();
  std::int64_t sum = 0;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    std::int64_t pos = 0;
    for (int i = 0; i < d; ++i) {
      const std::int64_t coord = (mask >> i & 1u) ? q.bounds[i].lo - 1 : q.bounds[i].hi;
      pos += coord * stride_[i];
    }
    const int sign = (std::popcount(mask) & 1) ? -1 : 1;
    sum += sign * prefix_[pos];
  }
  return sum;
}

std::vector<std::int64_t> exact_cardinalities_ref(const FrequencyTensor& freq,
                                                  std::span<const RangeQuery> queries) {
  std::vector<std::int64_t> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = exact_cardinality(freq, queries[i]);
  return out;
}

std::vector<std::int64_t> exact_cardinalities(const SummedAreaTable& sat,
                                              std::span<const RangeQuery> queries,
                                              int threads) {
  const int nt = resolve_threads(threads);
  std::vector<std::int64_t> out(queries.size());
  const std::int64_t n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && n > 64)
  for (std::int64_t i = 0; i < n; ++i) out[i] = sat.box_sum(queries[i]);
  return out;
}

equihist::NormalEq accumulate_normal_ref(const equihist::EquiLayout& layout,
                                         std::span<const QueryFeedbackRecord> qfrs) {
  equihist::NormalEq neq(layout.bucket_count());
  for (const QueryFeedbackRecord& rec : qfrs) {
    neq.observe(equihist::bucket_overlap(rec.query, layout), rec.cardinality);
  }
  return neq;
}

equihist::NormalEq accumulate_normal(const equihist::EquiLayout& layout,
                                     std::span<const QueryFeedbackRecord> qfrs,
                                     int threads) {
  const std::int64_t b = layout.bucket_count();
  const std::int64_t n = static_cast<std::int64_t>(qfrs.size());
  const std::int64_t nshards = shard_count(n, 256, b <= 1024);
  if (nshards == 1) return accumulate_normal_ref(layout, qfrs);

  const int nt = resolve_threads(threads);
  const std::int64_t chunk = (n + nshards - 1) / nshards;
  std::vector<equihist::NormalEq> parts(nshards, equihist::NormalEq(b));
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt) if (nt > 1)
  for (std::int64_t s = 0; s < nshards; ++s) {
    const std::int64_t lo = s * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    for (std::int64_t i = lo; i < hi; ++i) {
      parts[s].observe(equihist::bucket_overlap(qfrs[i].query, layout), qfrs[i].cardinality);
    }
  }
  equihist::NormalEq out(b);
  for (const auto& p : parts) out.merge(p);
  return out;
}

namespace {

template <typename Model>
std::vector<double> estimate_batch_impl(const Model& model,
                                        std::span<const RangeQuery> queries, int nt) {
  std::vector<double> out(queries.size());
  const std::int64_t n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && n > 16)
  for (std::int64_t i = 0; i < n; ++i) out[i] = estimate_cardinality(model, queries[i]);
  return out;
}

}  // namespace

std::vector<double> estimate_batch_ref(const BucketHistogram& h,
                                       std::span<const RangeQuery> queries) {
  return estimate_batch_impl(h, queries, 1);
}

std::vector<double> estimate_batch(const BucketHistogram& h,
                                   std::span<const RangeQuery> queries, int threads) {
  return estimate_batch_impl(h, queries, resolve_threads(threads));
}

std::vector<double> estimate_batch_ref(const WaveletSketch& sk,
                                       std::span<const RangeQuery> queries) {
  return estimate_batch_impl(sk, queries, 1);
}

std::vector<double> estimate_batch(const WaveletSketch& sk,
                                   std::span<const RangeQuery> queries, int threads) {
  return estimate_batch_impl(sk, queries, resolve_threads(threads));
}

namespace {

// Scatter one weighted box into a d-dimensional difference array over the
// padded shape; corner markers beyond the padded extent are dropped.
void scatter_box(std::vector<double>& diff, const haar::PaddedDomain& pd,
                 const std::vector<std::int64_t>& stride, const RangeQuery& q, double w) {
  const int d = pd.dims();
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    std::int64_t pos = 0;
    bool in_range = true;
    for (int i = 0; i < d; ++i) {
      std::int64_t coord;  // 0-based
      if (mask >> i & 1u) {
        coord = q.bounds[i].hi;  // u + 1, 1-based -> u, 0-based
        if (coord >= pd.padded[i]) {
          in_range = false;
          break;
        }
      } else {
        coord = q.bounds[i].lo - 1;
      }
      pos += coord * stride[i];
    }
    if (!in_range) continue;
    const double sign = (std::popcount(mask) & 1) ? -1.0 : 1.0;
    diff[pos] += sign * w;
  }
}

void prefix_pass(std::vector<double>& t, const haar::PaddedDomain& pd,
                 const std::vector<std::int64_t>& stride, int nt) {
  const int d = pd.dims();
  const std::int64_t cells = pd.padded_cells();
  for (int axis = 0; axis < d; ++axis) {
    const std::int64_t len = pd.padded[axis];
    if (len == 1) continue;
    const std::int64_t st = stride[axis];
    const std::int64_t nlines = cells / len;
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && nlines > 1)
    for (std::int64_t li = 0; li < nlines; ++li) {
      const std::int64_t inner = li % st;
      const std::int64_t outer = li / st;
      const std::int64_t base = outer * (len * st) + inner;
      for (std::int64_t k = 1; k < len; ++k) t[base + k * st] += t[base + (k - 1) * st];
    }
  }
}

std::vector<double> weighted_query_cells_impl(const haar::PaddedDomain& pd,
                                              std::span<const QueryFeedbackRecord> qfrs,
                                              std::span<const double> z, int nt) {
  if (qfrs.size() != z.size()) throw std::invalid_argument("weight vector length mismatch");
  const int d = pd.dims();
  const std::int64_t cells = pd.padded_cells();
  std::vector<std::int64_t> stride(d, 1);
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * pd.padded[i + 1];

  const std::int64_t n = static_cast<std::int64_t>(qfrs.size());
  const std::int64_t nshards = shard_count(n, 1024, cells <= (std::int64_t{1} << 18));
  std::vector<double> diff(cells, 0.0);
  if (nshards == 1) {
    for (std::int64_t i = 0; i < n; ++i) scatter_box(diff, pd, stride, qfrs[i].query, z[i]);
  } else {
    const std::int64_t chunk = (n + nshards - 1) / nshards;
    std::vector<std::vector<double>> parts(nshards);
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt) if (nt > 1)
    for (std::int64_t s = 0; s < nshards; ++s) {
      parts[s].assign(cells, 0.0);
      const std::int64_t lo = s * chunk;
      const std::int64_t hi = std::min(n, lo + chunk);
      for (std::int64_t i = lo; i < hi; ++i) {
        scatter_box(parts[s], pd, stride, qfrs[i].query, z[i]);
      }
    }
    for (std::int64_t s = 0; s < nshards; ++s) {
      const auto& p = parts[s];
      for (std::int64_t i = 0; i < cells; ++i) diff[i] += p[i];
    }
  }
  prefix_pass(diff, pd, stride, nt);
  return diff;
}

}  // namespace

std::vector<double> weighted_query_cells_ref(const haar::PaddedDomain& pd,
                                             std::span<const QueryFeedbackRecord> qfrs,
                                             std::span<const double> z) {
  return weighted_query_cells_impl(pd, qfrs, z, 1);
}

std::vector<double> weighted_query_cells(const haar::PaddedDomain& pd,
                                         std::span<const QueryFeedbackRecord> qfrs,
                                         std::span<const double> z, int threads) {
  return weighted_query_cells_impl(pd, qfrs, z, resolve_threads(threads));
}

}  // namespace histlearn::kernels
