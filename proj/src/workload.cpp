#include "histlearn/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "histlearn/kernels.hpp"
#include "histlearn/rng.hpp"

namespace histlearn::workload {

namespace {

MixtureSpec preset_spec(Preset p, AttributeDomain dom, std::int64_t records) {
  MixtureSpec spec;
  spec.domain = std::move(dom);
  spec.records = records;
  spec.preset = p;
  spec.validate();
  return spec;
}

// Preset component counts/variances; means are drawn at generation time.
// Variances are stated at the reference range and scale with (r/ref)^2 so
// the mixture shape is invariant under range changes.
struct PresetShape {
  int components;
  double variance;
  double reference_range;
};

PresetShape preset_shape(Preset p, int dims) {
  switch (p) {
    case Preset::type1:
      return {17, 625.0, 1024.0};
    case Preset::type2:
      return {5, 100.0, 1024.0};
    case Preset::gauss_nd:
      return dims >= 3 ? PresetShape{5, 25.0, 32.0} : PresetShape{9, 100.0, 32.0};
    default:
      throw std::invalid_argument("custom mixtures must list components explicitly");
  }
}

}  // namespace

MixtureSpec MixtureSpec::type1(std::int64_t r, std::int64_t records) {
  return preset_spec(Preset::type1, AttributeDomain({r}), records);
}

MixtureSpec MixtureSpec::type2(std::int64_t r, std::int64_t records) {
  return preset_spec(Preset::type2, AttributeDomain({r}), records);
}

MixtureSpec MixtureSpec::gauss_nd(const AttributeDomain& dom, std::int64_t records) {
  return preset_spec(Preset::gauss_nd, dom, records);
}

MixtureSpec MixtureSpec::custom_spec(AttributeDomain dom, std::vector<GaussianComponent> comps,
                                     std::int64_t records) {
  MixtureSpec spec;
  spec.domain = std::move(dom);
  spec.components = std::move(comps);
  spec.records = records;
  spec.preset = Preset::custom;
  spec.validate();
  return spec;
}

void MixtureSpec::validate() const {
  domain.validate();
  if (records < 1) throw std::invalid_argument("record count must be >= 1");
  if (preset == Preset::custom && components.empty()) {
    throw std::invalid_argument("custom mixtures must list components explicitly");
  }
  for (const GaussianComponent& c : components) {
    if (static_cast<int>(c.mean.size()) != domain.dims()) {
      throw std::invalid_argument("component mean dimensionality mismatch");
    }
    if (c.variance <= 0.0) throw std::invalid_argument("component variance must be positive");
    if (c.weight <= 0.0) throw std::invalid_argument("component weight must be positive");
  }
}

FrequencyTensor gen_gaussian_mixture(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int d = spec.domain.dims();
  Rng rng(seed);

  std::vector<GaussianComponent> comps = spec.components;
  if (comps.empty()) {
    const PresetShape shape = preset_shape(spec.preset, d);
    const double scale = static_cast<double>(spec.domain.ranges[0]) / shape.reference_range;
    Rng mean_rng = rng.fork(0x6D65616E);
    comps.resize(shape.components);
    for (GaussianComponent& c : comps) {
      c.mean.resize(d);
      for (int i = 0; i < d; ++i) {
        c.mean[i] = mean_rng.uniform(0.0, static_cast<double>(spec.domain.ranges[i]));
      }
      c.variance = shape.variance * scale * scale;
      c.weight = 1.0;
    }
  }

  // Cumulative component weights for selection by a single uniform draw.
  std::vector<double> cum(comps.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    acc += comps[i].weight;
    cum[i] = acc;
  }

  Rng sample_rng = rng.fork(0x73616D70);
  FrequencyTensor freq(spec.domain);
  std::vector<std::int64_t> cell(d);
  for (std::int64_t m = 0; m < spec.records; ++m) {
    // Out-of-range draws are resampled, not clamped to the boundary.
    // After 10000 rejections the draw is clamped.
    bool in_range = false;
    for (int attempt = 0; attempt < 10000 && !in_range; ++attempt) {
      const double u = sample_rng.uniform(0.0, acc);
      const std::size_t ci =
          std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
      const GaussianComponent& c = comps[std::min(ci, comps.size() - 1)];
      const double sigma = std::sqrt(c.variance);
      in_range = true;
      for (int i = 0; i < d; ++i) {
        const std::int64_t v = std::llround(c.mean[i] + sigma * sample_rng.next_gauss());
        cell[i] = std::clamp<std::int64_t>(v, 1, spec.domain.ranges[i]);
        if (v != cell[i]) in_range = false;
      }
    }
    freq.add(cell, 1);
  }
  return freq;
}

namespace {

// Weighted cell sampler over the flattened counts (binary search on the
// cumulative distribution).
class CellSampler {
 public:
  explicit CellSampler(const FrequencyTensor& freq) : domain_(freq.domain()) {
    const auto counts = freq.counts();
    cum_.resize(counts.size());
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      acc += counts[i];
      cum_[i] = acc;
    }
    total_ = acc;
  }

  std::int64_t total() const { return total_; }

  /// Returns 1-based coordinates of the cell holding the u-th record.
  std::vector<std::int64_t> sample(Rng& rng) const {
    const std::int64_t u = rng.uniform_int(0, total_ - 1);
    const std::int64_t flat =
        std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
    std::vector<std::int64_t> cell(domain_.dims());
    std::int64_t rem = flat;
    for (int i = domain_.dims() - 1; i >= 0; --i) {
      cell[i] = rem % domain_.ranges[i] + 1;
      rem /= domain_.ranges[i];
    }
    return cell;
  }

 private:
  AttributeDomain domain_;
  std::vector<std::int64_t> cum_;
  std::int64_t total_ = 0;
};

}  // namespace

std::vector<RangeQuery> gen_queries(const QueryModelSpec& spec, const FrequencyTensor& freq) {
  if (spec.count < 1) throw std::invalid_argument("query count must be >= 1");
  if (spec.max_volume_fraction <= 0.0 || spec.max_volume_fraction > 1.0) {
    throw std::invalid_argument("max volume fraction must be in (0, 1]");
  }
  const AttributeDomain& dom = freq.domain();
  const int d = dom.dims();
  if (spec.model == QueryModel::data_dependent && freq.total() == 0) {
    throw std::invalid_argument("data-dependent query model needs a nonempty dataset");
  }

  // Per-dimension caps: widths up to frac^(1/d) * r_i keep the total volume
  // within the cap by construction.
  const double per_dim_frac = std::pow(spec.max_volume_fraction, 1.0 / d);
  std::vector<std::int64_t> max_width(d);
  for (int i = 0; i < d; ++i) {
    max_width[i] = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::floor(per_dim_frac * dom.ranges[i])));
  }

  Rng rng(spec.seed);
  CellSampler sampler = spec.model == QueryModel::data_dependent
                            ? CellSampler(freq)
                            : CellSampler(FrequencyTensor(AttributeDomain({1})));

  std::vector<RangeQuery> out;
  out.reserve(spec.count);
  for (std::int64_t qi = 0; qi < spec.count; ++qi) {
    std::vector<Interval> bounds(d);
    std::vector<std::int64_t> center_cell;
    if (spec.model == QueryModel::data_dependent) center_cell = sampler.sample(rng);
    for (int i = 0; i < d; ++i) {
      const std::int64_t r = dom.ranges[i];
      double center;
      if (spec.model == QueryModel::data_dependent) {
        center = static_cast<double>(center_cell[i]);
      } else {
        center = rng.uniform(0.5, static_cast<double>(r) + 0.5);
      }
      const double half = rng.uniform(0.0, 0.5 * per_dim_frac * static_cast<double>(r));
      std::int64_t lo = std::llround(center - half);
      std::int64_t hi = std::llround(center + half);
      lo = std::clamp<std::int64_t>(lo, 1, r);
      hi = std::clamp<std::int64_t>(hi, 1, r);
      if (hi < lo) hi = lo;
      if (hi - lo + 1 > max_width[i]) {
        // Rounding can add one cell past the cap; trim toward the domain.
        if (lo + max_width[i] - 1 <= r) {
          hi = lo + max_width[i] - 1;
        } else {
          lo = hi - max_width[i] + 1;
        }
      }
      bounds[i] = {lo, hi};
    }
    out.emplace_back(std::move(bounds));
  }
  return out;
}

std::vector<QueryFeedbackRecord> label_queries(const FrequencyTensor& freq,
                                               std::span<const RangeQuery> queries,
                                               int threads) {
  std::vector<QueryFeedbackRecord> out;
  out.reserve(queries.size());
  if (queries.empty()) return out;
  const kernels::SummedAreaTable sat(freq);
  const std::vector<std::int64_t> cards = kernels::exact_cardinalities(sat, queries, threads);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.push_back({queries[i], static_cast<double>(cards[i])});
  }
  return out;
}

FrequencyTensor ingest_records_csv(const std::string& path, const AttributeDomain& dom) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file: " + path);
  const int d = dom.dims();

  std::vector<std::vector<std::int64_t>> rows;
  std::string line;
  std::int64_t lineno = 0;
  std::int64_t min_seen = std::numeric_limits<std::int64_t>::max();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::int64_t> row;
    row.reserve(d);
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string tok = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                          : comma - pos);
      std::size_t used = 0;
      std::int64_t v;
      try {
        v = std::stoll(tok, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("parse error in " + path + " line " +
                                 std::to_string(lineno));
      }
      if (used != tok.size() && tok.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::runtime_error("parse error in " + path + " line " +
                                 std::to_string(lineno));
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (static_cast<int>(row.size()) != d) {
      throw std::runtime_error("parse error in " + path + " line " + std::to_string(lineno) +
                               ": expected " + std::to_string(d) + " columns");
    }
    for (std::int64_t v : row) min_seen = std::min(min_seen, v);
    rows.push_back(std::move(row));
  }

  // Zero-based files shift up by one.
  const std::int64_t shift = (!rows.empty() && min_seen == 0) ? 1 : 0;
  FrequencyTensor freq(dom);
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    auto& row = rows[ri];
    for (int i = 0; i < d; ++i) {
      row[i] += shift;
      if (row[i] < 1 || row[i] > dom.ranges[i]) {
        throw std::runtime_error("value outside domain in " + path + " (record " +
                                 std::to_string(ri + 1) + ")");
      }
    }
    freq.add(row, 1);
  }
  return freq;
}

}  // namespace histlearn::workload
