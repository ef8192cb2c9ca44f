#include "histlearn/equihist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "histlearn/kernels.hpp"

namespace histlearn::equihist {

EquiLayout EquiLayout::make(const AttributeDomain& dom, std::span<const std::int64_t> per_dim) {
  dom.validate();
  if (static_cast<int>(per_dim.size()) != dom.dims()) {
    throw std::invalid_argument("bucket counts must match domain dimensionality");
  }
  EquiLayout layout;
  layout.domain = dom;
  layout.buckets_per_dim.assign(per_dim.begin(), per_dim.end());
  layout.edges.resize(dom.dims());
  for (int i = 0; i < dom.dims(); ++i) {
    const std::int64_t b = per_dim[i];
    const std::int64_t r = dom.ranges[i];
    if (b < 1 || b > r) throw std::invalid_argument("bucket count must be in [1, r]");
    auto& e = layout.edges[i];
    e.resize(b + 1);
    for (std::int64_t j = 0; j <= b; ++j) e[j] = (j * r) / b;
  }
  return layout;
}

EquiLayout EquiLayout::split_total(const AttributeDomain& dom, std::int64_t total_buckets) {
  if (total_buckets < 1) throw std::invalid_argument("bucket budget must be >= 1");
  const int d = dom.dims();
  const std::int64_t per =
      std::llround(std::pow(static_cast<double>(total_buckets), 1.0 / d));
  std::vector<std::int64_t> per_dim(d);
  for (int i = 0; i < d; ++i) per_dim[i] = std::clamp<std::int64_t>(per, 1, dom.ranges[i]);
  return make(dom, per_dim);
}

RangeQuery EquiLayout::bucket_box(std::int64_t flat) const {
  const int d = domain.dims();
  std::vector<Interval> bounds(d);
  for (int i = d - 1; i >= 0; --i) {
    const std::int64_t bi = buckets_per_dim[i];
    bounds[i] = bucket_interval(i, flat % bi);
    flat /= bi;
  }
  return RangeQuery(std::move(bounds));
}

std::int64_t EquiLayout::bucket_volume(std::int64_t flat) const {
  return bucket_box(flat).volume();
}

SparseVec bucket_overlap(const RangeQuery& q, const EquiLayout& layout) {
  q.check_within(layout.domain);
  const int d = layout.domain.dims();

  // Per-dimension overlap runs: contiguous bucket indices with their overlaps.
  struct DimRun {
    std::int64_t first;
    std::vector<double> overlaps;
  };
  std::vector<DimRun> runs(d);
  for (int i = 0; i < d; ++i) {
    const auto& e = layout.edges[i];
    const Interval iv = q.bounds[i];
    // Bucket j covers (e[j], e[j+1]]; find the first j with e[j+1] >= lo.
    const auto it = std::lower_bound(e.begin() + 1, e.end(), iv.lo);
    std::int64_t j = it - (e.begin() + 1);
    runs[i].first = j;
    for (; j < layout.buckets_per_dim[i] && e[j] < iv.hi; ++j) {
      const std::int64_t lo = std::max(iv.lo, e[j] + 1);
      const std::int64_t hi = std::min(iv.hi, e[j + 1]);
      runs[i].overlaps.push_back(static_cast<double>(hi - lo + 1));
    }
  }

  SparseVec out;
  std::int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::int64_t>(runs[i].overlaps.size());
  out.reserve(total);

  // Odometer over the per-dimension runs; flat indices emerge ascending.
  std::vector<std::int64_t> pos(d, 0);
  while (true) {
    std::int64_t flat = 0;
    double val = 1.0;
    for (int i = 0; i < d; ++i) {
      flat = flat * layout.buckets_per_dim[i] + (runs[i].first + pos[i]);
      val *= runs[i].overlaps[pos[i]];
    }
    out.emplace_back(flat, val);
    int axis = d - 1;
    while (axis >= 0 &&
           pos[axis] + 1 == static_cast<std::int64_t>(runs[axis].overlaps.size())) {
      pos[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
    ++pos[axis];
  }
  return out;
}

void NormalEq::observe(const SparseVec& x, double s, double weight) {
  for (const auto& [a, va] : x) {
    c[a] += weight * va * s;
    for (const auto& [b, vb] : x) G(a, b) += weight * va * vb;
  }
  ++n;
  weight_sum += weight;
}

void NormalEq::merge(const NormalEq& other) {
  G += other.G;
  c += other.c;
  n += other.n;
  weight_sum += other.weight_sum;
}

void NormalEq::scale(double factor) {
  G *= factor;
  c *= factor;
  weight_sum *= factor;
}

namespace {

struct SolveAttempt {
  Eigen::VectorXd w;
  double condition = 0.0;
  bool ok = false;
};

SolveAttempt try_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& v, double ridge) {
  const std::int64_t b = m.rows();
  Eigen::MatrixXd adj = m;
  adj.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(adj);
  SolveAttempt att;
  if (ldlt.info() != Eigen::Success) return att;
  att.w = ldlt.solve(v);
  if (!att.w.allFinite()) return att;
  const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
  const double dmax = d.maxCoeff();
  const double dmin = d.minCoeff();
  att.condition = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();
  const double resid = (adj * att.w - v).norm();
  const double scale = std::max({v.norm(), adj.cwiseAbs().maxCoeff() * att.w.cwiseAbs().maxCoeff() *
                                               static_cast<double>(b),
                                 1e-300});
  att.ok = resid <= 1e-6 * scale && dmin > dmax * 1e-14;
  return att;
}

}  // namespace

LsFit solve(const NormalEq& neq, double ridge) {
  if (neq.n < 1) throw std::invalid_argument("fit requires at least one feedback record");
  if (ridge < 0.0) throw std::invalid_argument("ridge must be non-negative");
  const double w_total = neq.weight_sum > 0.0 ? neq.weight_sum : 1.0;
  const Eigen::MatrixXd m = neq.G / w_total;
  const Eigen::VectorXd v = neq.c / w_total;

  LsFit fit;
  fit.ridge = ridge;
  SolveAttempt att = try_solve(m, v, ridge);
  if (!att.ok && ridge == 0.0) {
    const double fallback = 1e-8 * m.trace() / static_cast<double>(m.rows());
    att = try_solve(m, v, fallback);
    fit.ridge = fallback;
    fit.ridge_fallback = true;
  }
  if (!att.w.allFinite() || att.w.size() == 0) {
    throw std::runtime_error("normal equations could not be solved");
  }
  fit.weights = std::move(att.w);
  fit.condition = att.condition;
  return fit;
}

BucketHistogram to_histogram(const EquiLayout& layout, const Eigen::VectorXd& w) {
  const std::int64_t b = layout.bucket_count();
  if (w.size() != b) throw std::invalid_argument("weight vector length mismatch");
  std::vector<Bucket> buckets;
  buckets.reserve(b);
  for (std::int64_t j = 0; j < b; ++j) {
    RangeQuery box = layout.bucket_box(j);
    const double vol = static_cast<double>(box.volume());
    buckets.push_back({std::move(box), w[j] * vol});
  }
  // Grid construction guarantees the partition property.
  return BucketHistogram(layout.domain, std::move(buckets), /*validate=*/false);
}

std::pair<LsFit, BucketHistogram> fit(std::span<const QueryFeedbackRecord> qfrs,
                                      const EquiLayout& layout, double ridge, int threads) {
  if (qfrs.empty()) throw std::invalid_argument("fit requires at least one feedback record");
  NormalEq neq = kernels::accumulate_normal(layout, qfrs, threads);
  LsFit ls = solve(neq, ridge);

  double sse = 0.0;
  for (const QueryFeedbackRecord& rec : qfrs) {
    const SparseVec x = bucket_overlap(rec.query, layout);
    double pred = 0.0;
    for (const auto& [j, v] : x) pred += v * ls.weights[j];
    const double r = pred - rec.cardinality;
    sse += r * r;
  }
  ls.residual_norm = std::sqrt(sse / static_cast<double>(qfrs.size()));

  BucketHistogram hist = to_histogram(layout, ls.weights);
  return {std::move(ls), std::move(hist)};
}

}  // namespace histlearn::equihist
