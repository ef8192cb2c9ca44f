#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "histlearn/domain.hpp"
#include "histlearn/equihist.hpp"
#include "histlearn/histogram.hpp"

namespace histlearn::online {

/// Streaming least-squares state over an equi-width layout: decayed
/// normal-equation accumulators updated in O(b^2) per observation,
/// independent of the stream length. The weight vector is re-solved lazily
/// when the histogram is requested.
class OnlineState {
 public:
  /// lambda >= 0 is the ridge weight at solve time (0 enables the automatic
  /// fallback); gamma in (0, 1] is the per-observation decay applied to the
  /// accumulators before each update.
  OnlineState(equihist::EquiLayout layout, double lambda, double gamma);

  void observe(const QueryFeedbackRecord& rec);

  /// Solves the decayed normal equations. Throws before any observation.
  BucketHistogram histogram() const;
  Eigen::VectorXd weights() const;

  std::int64_t observations() const { return neq_.n; }
  const equihist::EquiLayout& layout() const { return layout_; }
  const equihist::NormalEq& accumulators() const { return neq_; }

 private:
  equihist::EquiLayout layout_;
  equihist::NormalEq neq_;
  double lambda_;
  double gamma_;
};

/// Moves round(fraction * total) records to uniformly chosen destination
/// cells. Sources are drawn without replacement, weighted by counts;
/// reassigned records are not re-picked. Total mass is conserved.
void perturb(FrequencyTensor& freq, double fraction, std::uint64_t seed);

struct StreamOptions {
  std::int64_t eval_every = 50;
  std::int64_t perturb_step = -1;  // < 0: never
  double perturb_fraction = 0.3;
  std::uint64_t perturb_seed = 0;
  double lambda = 0.0;
  double gamma = 1.0;
};

struct TrajectoryPoint {
  std::int64_t step = 0;
  double avg_rel_error = 0.0;
};

/// Feeds the stream one query at a time, labeling each against the current
/// ground truth, and measures the test error at every eval_every steps and
/// at the end. At perturb_step the truth is perturbed after that step's
/// evaluation; later labels and test truths follow the new data.
std::vector<TrajectoryPoint> simulate_stream(FrequencyTensor truth,
                                             std::span<const RangeQuery> stream,
                                             std::span<const RangeQuery> test,
                                             const equihist::EquiLayout& layout,
                                             const StreamOptions& opts);

}  // namespace histlearn::online
