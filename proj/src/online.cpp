#include "histlearn/online.hpp"

#include <cmath>
#include <stdexcept>

#include "histlearn/evalbench.hpp"
#include "histlearn/kernels.hpp"
#include "histlearn/rng.hpp"

namespace histlearn::online {

OnlineState::OnlineState(equihist::EquiLayout layout, double lambda, double gamma)
    : layout_(std::move(layout)), neq_(layout_.bucket_count()), lambda_(lambda), gamma_(gamma) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("gamma must be in (0, 1]");
}

void OnlineState::observe(const QueryFeedbackRecord& rec) {
  if (gamma_ != 1.0) neq_.scale(gamma_);
  neq_.observe(equihist::bucket_overlap(rec.query, layout_), rec.cardinality);
}

Eigen::VectorXd OnlineState::weights() const {
  if (neq_.n == 0) throw std::runtime_error("no observations yet");
  return equihist::solve(neq_, lambda_).weights;
}

BucketHistogram OnlineState::histogram() const {
  return equihist::to_histogram(layout_, weights());
}

namespace {

// Fenwick tree over cell counts for weighted sampling without replacement.
class Fenwick {
 public:
  explicit Fenwick(std::span<const std::int64_t> values) : tree_(values.size() + 1, 0) {
    for (std::size_t i = 0; i < values.size(); ++i) add(static_cast<std::int64_t>(i), values[i]);
  }

  void add(std::int64_t i, std::int64_t delta) {
    for (std::int64_t x = i + 1; x < static_cast<std::int64_t>(tree_.size()); x += x & -x) {
      tree_[x] += delta;
    }
  }

  /// Smallest index with cumulative sum > target.
  std::int64_t find(std::int64_t target) const {
    std::int64_t pos = 0;
    std::int64_t bit = 1;
    while (bit * 2 < static_cast<std::int64_t>(tree_.size())) bit *= 2;
    for (; bit > 0; bit /= 2) {
      const std::int64_t next = pos + bit;
      if (next < static_cast<std::int64_t>(tree_.size()) && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return pos;  // 0-based element index
  }

 private:
  std::vector<std::int64_t> tree_;
};

std::vector<std::int64_t> unflatten(const AttributeDomain& dom, std::int64_t flat) {
  std::vector<std::int64_t> cell(dom.dims());
  for (int i = dom.dims() - 1; i >= 0; --i) {
    cell[i] = flat % dom.ranges[i] + 1;
    flat /= dom.ranges[i];
  }
  return cell;
}

}  // namespace

void perturb(FrequencyTensor& freq, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw std::invalid_argument("perturbation fraction must be in [0, 1]");
  }
  const std::int64_t moves = std::llround(fraction * static_cast<double>(freq.total()));
  if (moves == 0) return;

  Rng rng(seed);
  Fenwick fw(freq.counts());
  std::int64_t remaining = freq.total();
  const std::int64_t cells = freq.domain().cells();

  // Remove all sources first so a moved record is never re-picked.
  std::vector<std::int64_t> dests;
  dests.reserve(moves);
  for (std::int64_t m = 0; m < moves; ++m) {
    const std::int64_t u = rng.uniform_int(0, remaining - 1);
    const std::int64_t src = fw.find(u);
    fw.add(src, -1);
    freq.add(unflatten(freq.domain(), src), -1);
    --remaining;
    dests.push_back(rng.uniform_int(0, cells - 1));
  }
  for (std::int64_t dst : dests) freq.add(unflatten(freq.domain(), dst), 1);
}

std::vector<TrajectoryPoint> simulate_stream(FrequencyTensor truth,
                                             std::span<const RangeQuery> stream,
                                             std::span<const RangeQuery> test,
                                             const equihist::EquiLayout& layout,
                                             const StreamOptions& opts) {
  if (stream.empty() || test.empty()) throw std::invalid_argument("streams must be nonempty");
  if (opts.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");

  OnlineState state(layout, opts.lambda, opts.gamma);
  kernels::SummedAreaTable sat(truth);
  std::vector<std::int64_t> test_truth = kernels::exact_cardinalities(sat, test);

  std::vector<TrajectoryPoint> out;
  const std::int64_t total = static_cast<std::int64_t>(stream.size());
  for (std::int64_t t = 1; t <= total; ++t) {
    const RangeQuery& q = stream[t - 1];
    state.observe({q, static_cast<double>(sat.box_sum(q))});

    if (t % opts.eval_every == 0 || t == total) {
      const BucketHistogram hist = state.histogram();
      std::vector<double> est = kernels::estimate_batch(hist, test);
      std::vector<double> st(test_truth.size());
      for (std::size_t i = 0; i < est.size(); ++i) {
        est[i] = std::max(0.0, est[i]);
        st[i] = static_cast<double>(test_truth[i]);
      }
      out.push_back({t, evalbench::avg_rel_error(st, est)});
    }

    if (t == opts.perturb_step) {
      perturb(truth, opts.perturb_fraction, opts.perturb_seed);
      sat = kernels::SummedAreaTable(truth);
      test_truth = kernels::exact_cardinalities(sat, test);
    }
  }
  return out;
}

}  // namespace histlearn::online
