#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace histlearn {

/// Integer attribute domain: dimension i takes values in [1, ranges[i]].
struct AttributeDomain {
  std::vector<std::int64_t> ranges;

  AttributeDomain() = default;
  explicit AttributeDomain(std::vector<std::int64_t> r) : ranges(std::move(r)) {
    validate();
  }

  int dims() const { return static_cast<int>(ranges.size()); }

  /// Total number of cells, product of all ranges.
  std::int64_t cells() const {
    std::int64_t n = 1;
    for (std::int64_t r : ranges) n *= r;
    return n;
  }

  void validate() const {
    if (ranges.empty()) throw std::invalid_argument("domain needs at least one dimension");
    for (std::int64_t r : ranges) {
      if (r < 1) throw std::invalid_argument("domain range must be >= 1");
    }
  }

  bool operator==(const AttributeDomain&) const = default;
};

/// Closed integer interval [lo, hi].
struct Interval {
  std::int64_t lo = 1;
  std::int64_t hi = 1;

  std::int64_t width() const { return hi - lo + 1; }
  bool operator==(const Interval&) const = default;
};

/// Axis-aligned hyper-rectangle predicate, one closed interval per dimension.
/// Stored as intervals; the unary indicator vector is never materialized.
struct RangeQuery {
  std::vector<Interval> bounds;

  RangeQuery() = default;
  explicit RangeQuery(std::vector<Interval> b) : bounds(std::move(b)) {}

  int dims() const { return static_cast<int>(bounds.size()); }

  std::int64_t volume() const {
    std::int64_t v = 1;
    for (const Interval& iv : bounds) v *= iv.width();
    return v;
  }

  /// Throws unless 1 <= lo_i <= hi_i <= r_i in every dimension.
  void check_within(const AttributeDomain& dom) const;

  bool operator==(const RangeQuery&) const = default;
};

/// A query paired with its true result cardinality.
struct QueryFeedbackRecord {
  RangeQuery query;
  double cardinality = 0.0;
};

/// Exact value-frequency counts over the domain, row-major with the last
/// dimension fastest. Ground truth for query cardinalities.
class FrequencyTensor {
 public:
  explicit FrequencyTensor(AttributeDomain domain);
  FrequencyTensor(AttributeDomain domain, std::vector<std::int64_t> counts);

  const AttributeDomain& domain() const { return domain_; }
  std::int64_t total() const { return total_; }
  std::span<const std::int64_t> counts() const { return counts_; }

  /// Flat row-major index of a 1-based cell coordinate.
  std::int64_t flat_index(std::span<const std::int64_t> cell) const;

  std::int64_t at(std::span<const std::int64_t> cell) const {
    return counts_[flat_index(cell)];
  }

  void add(std::span<const std::int64_t> cell, std::int64_t delta);

 private:
  AttributeDomain domain_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

/// Sum of counts over the query box; the oracle cardinality s_q.
std::int64_t exact_cardinality(const FrequencyTensor& freq, const RangeQuery& q);

}  // namespace histlearn
