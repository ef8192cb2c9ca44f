#include "histlearn/histogram.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace histlearn {

std::int64_t dense_cell_limit() {
  static const std::int64_t limit = [] {
    if (const char* env = std::getenv("HISTLEARN_CELL_LIMIT")) {
      const std::int64_t v = std::strtoll(env, nullptr, 10);
      if (v > 0) return v;
    }
    return std::int64_t{1} << 24;
  }();
  return limit;
}

namespace {

bool boxes_overlap(const RangeQuery& a, const RangeQuery& b) {
  for (int i = 0; i < a.dims(); ++i) {
    if (a.bounds[i].hi < b.bounds[i].lo || b.bounds[i].hi < a.bounds[i].lo) return false;
  }
  return true;
}

}  // namespace

BucketHistogram::BucketHistogram(AttributeDomain domain, std::vector<Bucket> buckets,
                                 bool validate)
    : domain_(std::move(domain)), buckets_(std::move(buckets)) {
  domain_.validate();
  if (buckets_.empty()) throw std::invalid_argument("histogram needs at least one bucket");
  for (const Bucket& b : buckets_) b.box.check_within(domain_);
  if (!validate) return;

  std::int64_t vol = 0;
  for (const Bucket& b : buckets_) vol += b.box.volume();
  if (vol != domain_.cells()) {
    throw std::invalid_argument("bucket volumes do not sum to the domain volume");
  }
  for (std::size_t i = 0; i < buckets_.size(); ++i) {
    for (std::size_t j = i + 1; j < buckets_.size(); ++j) {
      if (boxes_overlap(buckets_[i].box, buckets_[j].box)) {
        throw std::invalid_argument("buckets overlap");
      }
    }
  }
}

WaveletSketch::WaveletSketch(AttributeDomain domain, std::vector<SketchEntry> entries)
    : domain_(std::move(domain)),
      padded_(haar::PaddedDomain::from(domain_)),
      entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const SketchEntry& a, const SketchEntry& b) { return a.index < b.index; });
  const std::int64_t cells = padded_.padded_cells();
  std::int64_t prev = 0;
  for (const SketchEntry& e : entries_) {
    if (e.index < 1 || e.index > cells) throw std::invalid_argument("coefficient index out of range");
    if (e.index == prev) throw std::invalid_argument("duplicate coefficient index");
    prev = e.index;
  }
}

double estimate_cardinality(const BucketHistogram& h, const RangeQuery& q) {
  q.check_within(h.domain());
  double est = 0.0;
  for (const Bucket& b : h.buckets()) {
    double overlap = 1.0;
    for (int i = 0; i < q.dims(); ++i) {
      const std::int64_t lo = std::max(q.bounds[i].lo, b.box.bounds[i].lo);
      const std::int64_t hi = std::min(q.bounds[i].hi, b.box.bounds[i].hi);
      if (hi < lo) {
        overlap = 0.0;
        break;
      }
      overlap *= static_cast<double>(hi - lo + 1);
    }
    if (overlap > 0.0) est += b.height() * overlap;
  }
  return est;
}

double estimate_cardinality(const WaveletSketch& sk, const RangeQuery& q) {
  q.check_within(sk.domain());
  double est = 0.0;
  for (const SketchEntry& e : sk.entries()) {
    est += e.value * haar::range_basis_dot(q, e.index, sk.padded());
  }
  return est;
}

std::vector<double> to_dense(const BucketHistogram& h, std::int64_t cell_limit) {
  if (cell_limit <= 0) cell_limit = dense_cell_limit();
  const std::int64_t cells = h.domain().cells();
  if (cells > cell_limit) {
    throw std::invalid_argument("domain too large to materialize densely (" +
                                std::to_string(cells) + " cells, limit " +
                                std::to_string(cell_limit) + ")");
  }
  const int d = h.domain().dims();
  const auto& ranges = h.domain().ranges;
  std::vector<double> dense(cells, 0.0);
  for (const Bucket& b : h.buckets()) {
    const double height = b.height();
    std::vector<std::int64_t> cur(d);
    for (int i = 0; i < d; ++i) cur[i] = b.box.bounds[i].lo;
    while (true) {
      std::int64_t base = 0;
      for (int i = 0; i + 1 < d; ++i) base = base * ranges[i] + (cur[i] - 1);
      base = base * ranges[d - 1];
      for (std::int64_t j = b.box.bounds[d - 1].lo; j <= b.box.bounds[d - 1].hi; ++j) {
        dense[base + j - 1] = height;
      }
      int axis = d - 2;
      while (axis >= 0 && cur[axis] == b.box.bounds[axis].hi) --axis;
      if (axis < 0) break;
      ++cur[axis];
      for (int i = axis + 1; i + 1 < d; ++i) cur[i] = b.box.bounds[i].lo;
    }
  }
  return dense;
}

}  // namespace histlearn
