#include "histlearn/domain.hpp"

#include <numeric>

namespace histlearn {

void RangeQuery::check_within(const AttributeDomain& dom) const {
  if (dims() != dom.dims()) {
    throw std::invalid_argument("query dimensionality does not match domain");
  }
  for (int i = 0; i < dims(); ++i) {
    const Interval& iv = bounds[i];
    if (iv.lo < 1 || iv.lo > iv.hi || iv.hi > dom.ranges[i]) {
      throw std::invalid_argument("query interval outside domain");
    }
  }
}

FrequencyTensor::FrequencyTensor(AttributeDomain domain)
    : domain_(std::move(domain)), counts_(domain_.cells(), 0) {
  domain_.validate();
}

FrequencyTensor::FrequencyTensor(AttributeDomain domain, std::vector<std::int64_t> counts)
    : domain_(std::move(domain)), counts_(std::move(counts)) {
  domain_.validate();
  if (static_cast<std::int64_t>(counts_.size()) != domain_.cells()) {
    throw std::invalid_argument("counts shape does not match domain");
  }
  for (std::int64_t c : counts_) {
    if (c < 0) throw std::invalid_argument("counts must be non-negative");
  }
  total_ = std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t FrequencyTensor::flat_index(std::span<const std::int64_t> cell) const {
  if (static_cast<int>(cell.size()) != domain_.dims()) {
    throw std::invalid_argument("cell dimensionality does not match domain");
  }
  std::int64_t idx = 0;
  for (int i = 0; i < domain_.dims(); ++i) {
    if (cell[i] < 1 || cell[i] > domain_.ranges[i]) {
      throw std::invalid_argument("cell coordinate outside domain");
    }
    idx = idx * domain_.ranges[i] + (cell[i] - 1);
  }
  return idx;
}

void FrequencyTensor::add(std::span<const std::int64_t> cell, std::int64_t delta) {
  std::int64_t& c = counts_[flat_index(cell)];
  if (c + delta < 0) throw std::invalid_argument("count would become negative");
  c += delta;
  total_ += delta;
}

std::int64_t exact_cardinality(const FrequencyTensor& freq, const RangeQuery& q) {
  q.check_within(freq.domain());
  const int d = freq.domain().dims();
  const auto& ranges = freq.domain().ranges;

  // Odometer walk over the box; the innermost dimension is contiguous.
  std::vector<std::int64_t> cur(d);
  for (int i = 0; i < d; ++i) cur[i] = q.bounds[i].lo;

  std::int64_t sum = 0;
  while (true) {
    std::int64_t base = 0;
    for (int i = 0; i + 1 < d; ++i) base = base * ranges[i] + (cur[i] - 1);
    base = base * ranges[d - 1];
    const std::int64_t lo = q.bounds[d - 1].lo, hi = q.bounds[d - 1].hi;
    const auto counts = freq.counts();
    for (std::int64_t j = lo; j <= hi; ++j) sum += counts[base + j - 1];

    int axis = d - 2;
    while (axis >= 0 && cur[axis] == q.bounds[axis].hi) --axis;
    if (axis < 0) break;
    ++cur[axis];
    for (int i = axis + 1; i + 1 < d; ++i) cur[i] = q.bounds[i].lo;
  }
  return sum;
}

}  // namespace histlearn
