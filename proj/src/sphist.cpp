#include "histlearn/sphist.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "histlearn/haar.hpp"
#include "histlearn/kernels.hpp"

namespace histlearn::sphist {

namespace {

bool nearly_equal(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= 1e-9 * scale;
}

// Least squares on the selected columns via normal equations, with the same
// automatic ridge fallback as the bucket fit.
Eigen::VectorXd solve_support(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  Eigen::VectorXd w = ldlt.solve(rhs);
  const double resid = (gram * w - rhs).norm();
  const double scale = std::max(rhs.norm(), 1e-300);
  if (ldlt.info() == Eigen::Success && w.allFinite() && resid <= 1e-6 * scale) return w;
  Eigen::MatrixXd adj = gram;
  adj.diagonal().array() += 1e-8 * gram.trace() / static_cast<double>(gram.rows());
  w = adj.ldlt().solve(rhs);
  if (!w.allFinite()) throw std::runtime_error("support least squares failed");
  return w;
}

// Column norms ||A_j||_2 for every coefficient: one transform of each
// query's indicator accumulates the squared dots.
std::vector<double> column_norms(std::span<const QueryFeedbackRecord> qfrs,
                                 const haar::PaddedDomain& pd, int threads) {
  const std::int64_t cells = pd.padded_cells();
  std::vector<double> norms2(cells, 0.0);
  std::vector<double> work(cells);
  for (const QueryFeedbackRecord& rec : qfrs) {
    std::fill(work.begin(), work.end(), 0.0);
    // Indicator of the query box.
    const int d = pd.dims();
    std::vector<std::int64_t> stride(d, 1);
    for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * pd.padded[i + 1];
    std::vector<std::int64_t> cur(d);
    for (int i = 0; i < d; ++i) cur[i] = rec.query.bounds[i].lo;
    while (true) {
      std::int64_t base = 0;
      for (int i = 0; i + 1 < d; ++i) base += (cur[i] - 1) * stride[i];
      for (std::int64_t j = rec.query.bounds[d - 1].lo; j <= rec.query.bounds[d - 1].hi; ++j) {
        work[base + j - 1] = 1.0;
      }
      int axis = d - 2;
      while (axis >= 0 && cur[axis] == rec.query.bounds[axis].hi) --axis;
      if (axis < 0) break;
      ++cur[axis];
      for (int i = axis + 1; i + 1 < d; ++i) cur[i] = rec.query.bounds[i].lo;
    }
    haar::fwt_nd(work, pd.padded, threads);
    for (std::int64_t j = 0; j < cells; ++j) norms2[j] += work[j] * work[j];
  }
  for (double& v : norms2) v = std::sqrt(v);
  return norms2;
}

}  // namespace

WaveletSketch recover_sketch(std::span<const QueryFeedbackRecord> qfrs,
                             const AttributeDomain& dom, const OmpOptions& opts,
                             OmpDiagnostics* diag, int threads) {
  dom.validate();
  if (qfrs.empty()) throw std::invalid_argument("recovery requires at least one feedback record");
  if (opts.support < 1) throw std::invalid_argument("support budget must be >= 1");
  const haar::PaddedDomain pd = haar::PaddedDomain::from(dom);
  const std::int64_t cells = pd.padded_cells();
  if (cells > dense_cell_limit()) {
    throw std::invalid_argument("padded domain too large for the correlation pass");
  }
  for (const QueryFeedbackRecord& rec : qfrs) rec.query.check_within(dom);

  const std::int64_t n = static_cast<std::int64_t>(qfrs.size());
  const std::int64_t budget = std::min(opts.support, cells);

  Eigen::VectorXd s(n);
  for (std::int64_t i = 0; i < n; ++i) s[i] = qfrs[i].cardinality;

  std::vector<double> norms;
  if (opts.normalize_columns) norms = column_norms(qfrs, pd, threads);

  // Correlation magnitudes below this are treated as zero information.
  const double corr_eps = 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff()) *
                          std::sqrt(static_cast<double>(n));

  Eigen::VectorXd z = s;  // residual
  std::vector<std::int64_t> support;
  std::vector<char> selected(cells, 0);
  Eigen::MatrixXd cols(n, budget);       // A_S, filled a column per iteration
  Eigen::MatrixXd gram(budget, budget);  // A_S' A_S
  Eigen::VectorXd rhs(budget);           // A_S' s
  Eigen::VectorXd coef;

  OmpDiagnostics local;
  OmpDiagnostics& dg = diag ? *diag : local;
  dg = OmpDiagnostics{};

  for (std::int64_t t = 0; t < budget; ++t) {
    // Correlation vector A'z computed as the transform of the
    // residual-weighted query tensor.
    std::vector<double> corr =
        kernels::weighted_query_cells(pd, qfrs, std::span<const double>(z.data(), n), threads);
    haar::fwt_nd(corr, pd.padded, threads);

    std::int64_t best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < cells; ++j) {
      if (selected[j]) continue;
      double score = opts.selection == OmpOptions::Selection::absolute ? std::abs(corr[j])
                                                                       : corr[j];
      if (opts.normalize_columns) {
        if (norms[j] <= 1e-12) continue;
        score /= norms[j];
      }
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    const double best_abs = best < 0 ? 0.0 : std::abs(corr[best]);
    if (best < 0 || best_abs <= corr_eps) {
      dg.early_stop = true;
      break;
    }

    selected[best] = 1;
    support.push_back(best);
    const std::int64_t m = static_cast<std::int64_t>(support.size());
    for (std::int64_t i = 0; i < n; ++i) {
      cols(i, m - 1) = haar::range_basis_dot(qfrs[i].query, best + 1, pd);
    }
    // Grow the Gram matrix by one row/column.
    for (std::int64_t j = 0; j < m; ++j) {
      const double g = cols.col(m - 1).dot(cols.col(j));
      gram(m - 1, j) = g;
      gram(j, m - 1) = g;
    }
    rhs[m - 1] = cols.col(m - 1).dot(s);

    coef = solve_support(gram.topLeftCorner(m, m), rhs.head(m));
    z = s - cols.leftCols(m) * coef;
    dg.residual_norms.push_back(z.norm());
    dg.iterations = m;

    if (z.norm() <= opts.min_residual) {
      dg.early_stop = true;
      break;
    }
  }

  std::vector<SketchEntry> entries;
  entries.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    entries.push_back({support[i] + 1, coef[static_cast<std::int64_t>(i)]});
  }
  return WaveletSketch(dom, std::move(entries));
}

PiecewiseSignal PiecewiseSignal::from_dense(const AttributeDomain& dom,
                                            std::span<const double> values) {
  if (static_cast<std::int64_t>(values.size()) != dom.cells()) {
    throw std::invalid_argument("signal size does not match domain");
  }
  PiecewiseSignal sig;
  sig.domain = dom;
  if (dom.dims() == 1) {
    for (double v : values) {
      if (!sig.height.empty() && nearly_equal(sig.height.back(), v)) {
        ++sig.run_length.back();
      } else {
        sig.run_length.push_back(1);
        sig.height.push_back(v);
      }
    }
  } else {
    sig.dense.assign(values.begin(), values.end());
  }
  return sig;
}

namespace {

BucketHistogram dp_reduce_1d(const PiecewiseSignal& sig, std::int64_t k) {
  const std::int64_t m = sig.piece_count();
  const std::int64_t kk = std::min(k, m);

  // Prefix sums over pieces: weight, weighted sum, weighted sum of squares.
  std::vector<double> pw(m + 1, 0.0), ps(m + 1, 0.0), pss(m + 1, 0.0);
  for (std::int64_t p = 0; p < m; ++p) {
    const double w = static_cast<double>(sig.run_length[p]);
    const double h = sig.height[p];
    pw[p + 1] = pw[p] + w;
    ps[p + 1] = ps[p] + w * h;
    pss[p + 1] = pss[p] + w * h * h;
  }
  const auto cost = [&](std::int64_t p, std::int64_t q) {  // pieces [p, q)
    const double w = pw[q] - pw[p];
    const double su = ps[q] - ps[p];
    const double ss = pss[q] - pss[p];
    return std::max(0.0, ss - su * su / w);
  };

  // err[j][q]: best SSE covering the first q pieces with j buckets.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> err(kk + 1, std::vector<double>(m + 1, inf));
  std::vector<std::vector<std::int64_t>> from(kk + 1, std::vector<std::int64_t>(m + 1, 0));
  err[0][0] = 0.0;
  for (std::int64_t j = 1; j <= kk; ++j) {
    for (std::int64_t q = j; q <= m; ++q) {
      for (std::int64_t p = j - 1; p < q; ++p) {
        if (err[j - 1][p] == inf) continue;
        const double e = err[j - 1][p] + cost(p, q);
        if (e < err[j][q]) {
          err[j][q] = e;
          from[j][q] = p;
        }
      }
    }
  }

  // Recover boundaries, then emit buckets carrying the signal mass.
  std::vector<std::int64_t> cuts(kk + 1);
  cuts[kk] = m;
  for (std::int64_t j = kk; j >= 1; --j) cuts[j - 1] = from[j][cuts[j]];

  std::vector<std::int64_t> piece_start(m + 1, 0);  // first cell (1-based) of piece p
  std::int64_t cell = 1;
  for (std::int64_t p = 0; p < m; ++p) {
    piece_start[p] = cell;
    cell += sig.run_length[p];
  }
  piece_start[m] = cell;

  std::vector<Bucket> buckets;
  buckets.reserve(kk);
  for (std::int64_t j = 0; j < kk; ++j) {
    const std::int64_t p = cuts[j], q = cuts[j + 1];
    Bucket b;
    b.box = RangeQuery({{piece_start[p], piece_start[q] - 1}});
    b.count = ps[q] - ps[p];
    buckets.push_back(std::move(b));
  }
  return BucketHistogram(sig.domain, std::move(buckets), /*validate=*/false);
}

// d >= 2: per-axis cut positions where adjacent slices differ; the signal is
// constant on every box of the induced grid.
std::vector<std::vector<std::int64_t>> detect_grid(const AttributeDomain& dom,
                                                   std::span<const double> t) {
  const int d = dom.dims();
  std::vector<std::int64_t> stride(d, 1);
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * dom.ranges[i + 1];
  const std::int64_t cells = dom.cells();

  std::vector<std::vector<std::int64_t>> segs(d);  // per axis: segment end cells
  for (int axis = 0; axis < d; ++axis) {
    const std::int64_t len = dom.ranges[axis];
    std::vector<char> cut(len, 0);  // cut after 1-based position x
    const std::int64_t st = stride[axis];
    const std::int64_t nlines = cells / len;
    for (std::int64_t li = 0; li < nlines; ++li) {
      const std::int64_t inner = li % st;
      const std::int64_t outer = li / st;
      const std::int64_t base = outer * (len * st) + inner;
      for (std::int64_t x = 1; x < len; ++x) {
        if (!cut[x] && !nearly_equal(t[base + (x - 1) * st], t[base + x * st])) cut[x] = 1;
      }
    }
    for (std::int64_t x = 1; x < len; ++x) {
      if (cut[x]) segs[axis].push_back(x);  // segment ends at cell x
    }
    segs[axis].push_back(len);
  }
  return segs;
}

BucketHistogram reduce_grid(const AttributeDomain& dom, std::span<const double> t,
                            std::int64_t k) {
  const int d = dom.dims();
  std::vector<std::vector<std::int64_t>> segs = detect_grid(dom, t);

  // Inclusion-exclusion prefix sums of values and squares for box SSE.
  std::vector<std::int64_t> shape(d), pstride(d, 1);
  std::int64_t pcells = 1;
  for (int i = 0; i < d; ++i) {
    shape[i] = dom.ranges[i] + 1;
    pcells *= shape[i];
  }
  for (int i = d - 2; i >= 0; --i) pstride[i] = pstride[i + 1] * shape[i + 1];
  std::vector<double> psum(pcells, 0.0), psq(pcells, 0.0);
  {
    std::vector<std::int64_t> stride(d, 1);
    for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * dom.ranges[i + 1];
    std::vector<std::int64_t> cur(d, 1);
    for (std::int64_t flat = 0; flat < dom.cells(); ++flat) {
      std::int64_t pos = 0;
      for (int i = 0; i < d; ++i) pos += cur[i] * pstride[i];
      psum[pos] = t[flat];
      psq[pos] = t[flat] * t[flat];
      int axis = d - 1;
      while (axis >= 0 && cur[axis] == dom.ranges[axis]) {
        cur[axis] = 1;
        --axis;
      }
      if (axis >= 0) ++cur[axis];
    }
    for (int axis = 0; axis < d; ++axis) {
      for (std::int64_t idx = 0; idx < pcells; ++idx) {
        const std::int64_t coord = (idx / pstride[axis]) % shape[axis];
        if (coord >= 1) {
          psum[idx] += psum[idx - pstride[axis]];
          psq[idx] += psq[idx - pstride[axis]];
        }
      }
    }
  }
  const auto box_stats = [&](const std::vector<Interval>& box, double& sum, double& sq) {
    sum = 0.0;
    sq = 0.0;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      std::int64_t pos = 0;
      int bits = 0;
      for (int i = 0; i < d; ++i) {
        const bool low = (mask >> i & 1u) != 0;
        pos += (low ? box[i].lo - 1 : box[i].hi) * pstride[i];
        bits += low ? 1 : 0;
      }
      const double sign = (bits & 1) ? -1.0 : 1.0;
      sum += sign * psum[pos];
      sq += sign * psq[pos];
    }
  };
  const auto box_sse = [&](const std::vector<Interval>& box) {
    double sum, sq;
    box_stats(box, sum, sq);
    double vol = 1.0;
    for (const Interval& iv : box) vol *= static_cast<double>(iv.width());
    return std::max(0.0, sq - sum * sum / vol);
  };

  const auto axis_intervals = [&](int axis) {
    std::vector<Interval> ivs;
    std::int64_t lo = 1;
    for (std::int64_t end : segs[axis]) {
      ivs.push_back({lo, end});
      lo = end + 1;
    }
    return ivs;
  };

  // Greedily delete the grid boundary whose removal increases SSE least
  // until the box count fits the budget.
  auto grid_boxes = [&]() {
    std::int64_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::int64_t>(segs[i].size());
    return n;
  };
  while (grid_boxes() > k) {
    int best_axis = -1;
    std::size_t best_cut = 0;
    double best_delta = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < d; ++axis) {
      if (segs[axis].size() < 2) continue;
      std::vector<std::vector<Interval>> others;  // cross product of other axes
      others.emplace_back();
      for (int i = 0; i < d; ++i) {
        if (i == axis) continue;
        std::vector<std::vector<Interval>> next;
        for (const auto& pref : others) {
          for (const Interval& iv : axis_intervals(i)) {
            auto cp = pref;
            cp.push_back(iv);
            next.push_back(std::move(cp));
          }
        }
        others = std::move(next);
      }
      const std::vector<Interval> ax = axis_intervals(axis);
      for (std::size_t c = 0; c + 1 < segs[axis].size(); ++c) {
        const Interval merged{ax[c].lo, ax[c + 1].hi};
        double delta = 0.0;
        for (const auto& rest : others) {
          std::vector<Interval> box(d);
          std::size_t ri = 0;
          for (int i = 0; i < d; ++i) {
            if (i == axis) continue;
            box[i] = rest[ri++];
          }
          box[axis] = merged;
          const double me = box_sse(box);
          box[axis] = ax[c];
          const double e1 = box_sse(box);
          box[axis] = ax[c + 1];
          const double e2 = box_sse(box);
          delta += me - e1 - e2;
        }
        if (delta < best_delta) {
          best_delta = delta;
          best_axis = axis;
          best_cut = c;
        }
      }
    }
    if (best_axis < 0) break;  // all axes down to one segment
    segs[best_axis].erase(segs[best_axis].begin() + best_cut);
  }

  // Emit the grid boxes with their contained mass.
  std::vector<std::vector<Interval>> per_axis(d);
  for (int i = 0; i < d; ++i) per_axis[i] = axis_intervals(i);
  std::vector<Bucket> buckets;
  std::vector<std::size_t> pos(d, 0);
  while (true) {
    std::vector<Interval> box(d);
    for (int i = 0; i < d; ++i) box[i] = per_axis[i][pos[i]];
    double sum, sq;
    box_stats(box, sum, sq);
    buckets.push_back({RangeQuery(box), sum});
    int axis = d - 1;
    while (axis >= 0 && pos[axis] + 1 == per_axis[axis].size()) {
      pos[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
    ++pos[axis];
  }
  return BucketHistogram(dom, std::move(buckets), /*validate=*/false);
}

}  // namespace

BucketHistogram dp_reduce(const PiecewiseSignal& sig, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("bucket budget must be >= 1");
  sig.domain.validate();
  if (sig.domain.dims() == 1) {
    if (sig.run_length.empty()) throw std::invalid_argument("signal has no pieces");
    return dp_reduce_1d(sig, k);
  }
  if (sig.dense.empty()) throw std::invalid_argument("signal has no values");
  return reduce_grid(sig.domain, sig.dense, k);
}

FitResult fit(std::span<const QueryFeedbackRecord> qfrs, const AttributeDomain& dom,
              std::int64_t k, const FitOptions& opts, int threads) {
  if (k < 1) throw std::invalid_argument("bucket budget must be >= 1");
  OmpOptions omp_opts = opts.omp;
  omp_opts.support = opts.omp_budget > 0 ? opts.omp_budget : (dom.dims() == 1 ? 3 * k : k);

  OmpDiagnostics diag;
  WaveletSketch sketch = recover_sketch(qfrs, dom, omp_opts, &diag, threads);

  // Reconstruct densely over the padded shape, then truncate the padding.
  const haar::PaddedDomain& pd = sketch.padded();
  std::vector<double> recon(pd.padded_cells(), 0.0);
  for (const SketchEntry& e : sketch.entries()) recon[e.index - 1] = e.value;
  haar::ifwt_nd(recon, pd.padded, threads);

  const int d = dom.dims();
  std::vector<double> values(dom.cells());
  {
    std::vector<std::int64_t> pstride(d, 1);
    for (int i = d - 2; i >= 0; --i) pstride[i] = pstride[i + 1] * pd.padded[i + 1];
    std::vector<std::int64_t> cur(d, 1);
    for (std::int64_t flat = 0; flat < dom.cells(); ++flat) {
      std::int64_t pos = 0;
      for (int i = 0; i < d; ++i) pos += (cur[i] - 1) * pstride[i];
      values[flat] = recon[pos];
      int axis = d - 1;
      while (axis >= 0 && cur[axis] == dom.ranges[axis]) {
        cur[axis] = 1;
        --axis;
      }
      if (axis >= 0) ++cur[axis];
    }
  }

  PiecewiseSignal sig = PiecewiseSignal::from_dense(dom, values);
  BucketHistogram hist = dp_reduce(sig, k);
  return {std::move(sketch), std::move(hist), std::move(diag)};
}

}  // namespace histlearn::sphist
