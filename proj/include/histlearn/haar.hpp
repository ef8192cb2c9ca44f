#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "histlearn/domain.hpp"

namespace histlearn::haar {

/// Smallest power of two >= r.
std::int64_t pad_to_pow2(std::int64_t r);

/// Original and power-of-two-padded per-dimension ranges. Transforms run
/// over the padded shape; queries never extend into the padding.
struct PaddedDomain {
  std::vector<std::int64_t> original;
  std::vector<std::int64_t> padded;

  static PaddedDomain from(const AttributeDomain& dom);

  int dims() const { return static_cast<int>(padded.size()); }

  std::int64_t padded_cells() const {
    std::int64_t n = 1;
    for (std::int64_t r : padded) n *= r;
    return n;
  }

  bool operator==(const PaddedDomain&) const = default;
};

/// Basis row j of the length-n transform, decomposed as j = 2^level + shift + 1
/// for j >= 2; j = 1 is the constant (DC) row. The decomposition is bijective.
struct LevelShift {
  int level = 0;
  std::int64_t shift = 0;
};

LevelShift decode_index(std::int64_t j, std::int64_t n);

/// Dense orthonormal transform matrix, rows indexed 1..n as above.
/// Reference implementation for tests; n is capped at 4096.
Eigen::MatrixXd haar_matrix(std::int64_t n);

/// In-place fast transform / inverse over a power-of-two length.
/// Coefficient layout matches haar_matrix row order: x (dense values)
/// maps to alpha with alpha[j-1] = <row_j, x>.
void fwt(std::span<double> x);
void ifwt(std::span<double> alpha);

/// Separable d-dimensional transform: applies fwt along every axis of a
/// row-major tensor (last dimension fastest). The effective basis is the
/// tensor product of 1-D bases. threads = 0 picks the runtime default.
void fwt_nd(std::span<double> tensor, std::span<const std::int64_t> shape, int threads = 0);
void ifwt_nd(std::span<double> tensor, std::span<const std::int64_t> shape, int threads = 0);

/// Inner product of the indicator of [iv.lo, iv.hi] with basis row j of the
/// length-n transform. O(1); equals the dense dot product.
double range_basis_dot(Interval iv, std::int64_t j, std::int64_t n);

/// d-dimensional version: flat_j indexes the tensor-product basis row-major
/// over the padded shape (1-based, last dimension fastest); the value is
/// the product of the per-dimension factors.
double range_basis_dot(const RangeQuery& q, std::int64_t flat_j, const PaddedDomain& pd);

}  // namespace histlearn::haar
