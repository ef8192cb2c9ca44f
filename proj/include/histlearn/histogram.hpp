#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "histlearn/domain.hpp"
#include "histlearn/haar.hpp"

namespace histlearn {

/// Dense-materialization guard, in cells. HISTLEARN_CELL_LIMIT overrides
/// the default of 2^24.
std::int64_t dense_cell_limit();

/// One histogram bucket: an axis-aligned box and the (real-valued) count
/// it carries. height = count / volume.
struct Bucket {
  RangeQuery box;
  double count = 0.0;

  double height() const { return count / static_cast<double>(box.volume()); }
};

/// k non-overlapping axis-aligned buckets partitioning the domain.
/// Counts are kept as reals; least-squares fits may produce negative ones.
class BucketHistogram {
 public:
  /// validate=true checks the partition property (pairwise disjoint boxes
  /// whose volumes sum to the domain). Internal grid builders skip it.
  BucketHistogram(AttributeDomain domain, std::vector<Bucket> buckets, bool validate = true);

  const AttributeDomain& domain() const { return domain_; }
  std::span<const Bucket> buckets() const { return buckets_; }
  std::int64_t bucket_count() const { return static_cast<std::int64_t>(buckets_.size()); }

 private:
  AttributeDomain domain_;
  std::vector<Bucket> buckets_;
};

/// Sparse set of coefficients of the separable orthonormal transform over
/// the padded domain. Indices are 1-based flat row-major positions, unique
/// and sorted ascending.
struct SketchEntry {
  std::int64_t index = 0;
  double value = 0.0;
};

class WaveletSketch {
 public:
  WaveletSketch(AttributeDomain domain, std::vector<SketchEntry> entries);

  const AttributeDomain& domain() const { return domain_; }
  const haar::PaddedDomain& padded() const { return padded_; }
  std::span<const SketchEntry> entries() const { return entries_; }
  std::int64_t support() const { return static_cast<std::int64_t>(entries_.size()); }

 private:
  AttributeDomain domain_;
  haar::PaddedDomain padded_;
  std::vector<SketchEntry> entries_;
};

/// q'h: sum over buckets of height times overlap volume. May be negative;
/// callers clamp at zero when reporting estimates.
double estimate_cardinality(const BucketHistogram& h, const RangeQuery& q);

/// q'Psi'alpha via O(1) per-coefficient range/basis inner products.
double estimate_cardinality(const WaveletSketch& sk, const RangeQuery& q);

/// Materializes the histogram as a dense row-major value tensor.
/// cell_limit = 0 uses dense_cell_limit().
std::vector<double> to_dense(const BucketHistogram& h, std::int64_t cell_limit = 0);

}  // namespace histlearn
