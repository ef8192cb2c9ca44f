#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "histlearn/domain.hpp"
#include "histlearn/histogram.hpp"

namespace histlearn::equihist {

/// Equi-width bucket grid: b_i buckets along dimension i, widths differing
/// by at most one cell when r_i is not divisible by b_i. Bucket j along a
/// dimension covers cells (edge[j], edge[j+1]].
struct EquiLayout {
  AttributeDomain domain;
  std::vector<std::int64_t> buckets_per_dim;
  std::vector<std::vector<std::int64_t>> edges;  // per dim, b_i + 1 entries, edge[0] = 0

  static EquiLayout make(const AttributeDomain& dom, std::span<const std::int64_t> per_dim);

  /// Splits a total budget evenly across dimensions (d-th root, rounded).
  static EquiLayout split_total(const AttributeDomain& dom, std::int64_t total_buckets);

  std::int64_t bucket_count() const {
    std::int64_t b = 1;
    for (std::int64_t bi : buckets_per_dim) b *= bi;
    return b;
  }

  Interval bucket_interval(int dim, std::int64_t j) const {
    return {edges[dim][j] + 1, edges[dim][j + 1]};
  }

  /// Flat row-major bucket index (last dimension fastest) to its box.
  RangeQuery bucket_box(std::int64_t flat) const;
  std::int64_t bucket_volume(std::int64_t flat) const;
};

/// Sparse feature vector: (flat bucket index, value) pairs sorted by index.
using SparseVec = std::vector<std::pair<std::int64_t, double>>;

/// Per-bucket overlap volumes |q ∩ bucket_j|; the feature vector x = B'q.
/// Entries sum to the query volume.
SparseVec bucket_overlap(const RangeQuery& q, const EquiLayout& layout);

/// Accumulated normal equations G = Σ w_i x_i x_i', c = Σ w_i x_i s_i.
/// Additive: partial accumulators from disjoint shards merge exactly.
struct NormalEq {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  std::int64_t n = 0;        // observation count
  double weight_sum = 0.0;   // Σ w_i

  explicit NormalEq(std::int64_t b)
      : G(Eigen::MatrixXd::Zero(b, b)), c(Eigen::VectorXd::Zero(b)) {}

  void observe(const SparseVec& x, double s, double weight = 1.0);
  void merge(const NormalEq& other);
  void scale(double factor);  // multiplies G, c, weight_sum by factor
};

struct LsFit {
  Eigen::VectorXd weights;
  double ridge = 0.0;          // effective ridge in the mean-squared objective
  bool ridge_fallback = false; // true when the automatic fallback kicked in
  double residual_norm = 0.0;  // RMS training residual
  double condition = 0.0;      // ratio of extreme LDLT pivots (diagnostic)
};

/// Solves (G/W + ridge I) w = c/W where W is the accumulated weight. When
/// ridge = 0 and the system is singular, retries with
/// ridge = 1e-8 * trace(G/W) / b and reports it in the fit.
LsFit solve(const NormalEq& neq, double ridge);

BucketHistogram to_histogram(const EquiLayout& layout, const Eigen::VectorXd& w);

/// Least-squares fit of bucket heights to the feedback records:
/// minimizes (1/N) Σ (x_i'w - s_i)^2 + ridge ||w||^2.
std::pair<LsFit, BucketHistogram> fit(std::span<const QueryFeedbackRecord> qfrs,
                                      const EquiLayout& layout, double ridge = 0.0,
                                      int threads = 0);

}  // namespace histlearn::equihist
