#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histlearn/domain.hpp"
#include "histlearn/histogram.hpp"

namespace histlearn::sphist {

struct OmpOptions {
  std::int64_t support = 1;  // atom budget
  enum class Selection {
    absolute,   // argmax |correlation|
    signed_max  // argmax of the raw correlation
  };
  Selection selection = Selection::absolute;
  bool normalize_columns = false;  // divide correlations by column norms
  double min_residual = 0.0;       // stop once ||z|| drops to this level
};

struct OmpDiagnostics {
  std::vector<double> residual_norms;  // ||z|| after each refit
  bool early_stop = false;             // stopped before exhausting the budget
  std::int64_t iterations = 0;
};

/// Greedy pursuit over the wavelet coefficients: repeatedly selects the
/// coefficient most correlated with the residual, then refits by least
/// squares on the support. The measurement matrix is never materialized;
/// each correlation pass transforms the residual-weighted query tensor.
WaveletSketch recover_sketch(std::span<const QueryFeedbackRecord> qfrs,
                             const AttributeDomain& dom, const OmpOptions& opts,
                             OmpDiagnostics* diag = nullptr, int threads = 0);

/// Piecewise-constant rendering of a reconstruction over the original
/// domain: run-length pieces for d = 1, a dense row-major tensor otherwise.
struct PiecewiseSignal {
  AttributeDomain domain;
  std::vector<std::int64_t> run_length;  // d == 1
  std::vector<double> height;
  std::vector<double> dense;  // d >= 2

  static PiecewiseSignal from_dense(const AttributeDomain& dom, std::span<const double> values);

  std::int64_t piece_count() const { return static_cast<std::int64_t>(run_length.size()); }
};

/// Reduces the signal to at most k buckets minimizing the within-bucket sum
/// of squared deviations. d = 1: exact dynamic program over piece edges
/// (optimal boundaries of a piecewise-constant signal lie at piece edges).
/// d >= 2: axis-aligned grid induced by the signal's discontinuities,
/// coarsened by greedily deleting the cheapest grid boundary.
/// k >= piece count returns the pieces as buckets directly.
BucketHistogram dp_reduce(const PiecewiseSignal& sig, std::int64_t k);

struct FitResult {
  WaveletSketch sketch;
  BucketHistogram hist;
  OmpDiagnostics diag;
};

struct FitOptions {
  OmpOptions omp;               // omp.support is overridden by budget below
  std::int64_t omp_budget = 0;  // 0: 3k atoms for d = 1 (reduced away by the
                                // bucket step), k atoms for d >= 2 where the
                                // sketch itself is the k-parameter model
};

/// End-to-end pipeline: sparse recovery, inverse transform, padding
/// truncation, bucket reduction to k buckets.
FitResult fit(std::span<const QueryFeedbackRecord> qfrs, const AttributeDomain& dom,
              std::int64_t k, const FitOptions& opts = {}, int threads = 0);

}  // namespace histlearn::sphist
