#include "histlearn/haar.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace histlearn::haar {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

void require_pow2(std::int64_t n) {
  if (!is_pow2(n)) throw std::invalid_argument("transform length must be a power of two");
}

}  // namespace

std::int64_t pad_to_pow2(std::int64_t r) {
  if (r < 1) throw std::invalid_argument("range must be >= 1");
  std::int64_t p = 1;
  while (p < r) p <<= 1;
  return p;
}

PaddedDomain PaddedDomain::from(const AttributeDomain& dom) {
  PaddedDomain pd;
  pd.original = dom.ranges;
  pd.padded.reserve(dom.ranges.size());
  for (std::int64_t r : dom.ranges) pd.padded.push_back(pad_to_pow2(r));
  return pd;
}

LevelShift decode_index(std::int64_t j, std::int64_t n) {
  require_pow2(n);
  if (j < 2 || j > n) throw std::invalid_argument("wavelet index out of range");
  int level = 0;
  while ((std::int64_t{1} << (level + 1)) < j) ++level;  // smallest level with j <= 2^(level+1)
  return {level, j - (std::int64_t{1} << level) - 1};
}

Eigen::MatrixXd haar_matrix(std::int64_t n) {
  require_pow2(n);
  if (n > 4096) throw std::invalid_argument("dense transform matrix capped at 4096");
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n, n);
  const double dc = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::int64_t col = 0; col < n; ++col) psi(0, col) = dc;
  for (std::int64_t j = 2; j <= n; ++j) {
    const LevelShift ls = decode_index(j, n);
    const std::int64_t block = n >> ls.level;        // support width
    const std::int64_t start = ls.shift * block;     // 0-based
    const double v = std::sqrt(static_cast<double>(std::int64_t{1} << ls.level) /
                               static_cast<double>(n));
    for (std::int64_t c = 0; c < block / 2; ++c) {
      psi(j - 1, start + c) = v;
      psi(j - 1, start + block / 2 + c) = -v;
    }
  }
  return psi;
}

void fwt(std::span<double> x) {
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  require_pow2(n);
  std::vector<double> tmp(n);
  for (std::int64_t len = n; len >= 2; len /= 2) {
    const std::int64_t half = len / 2;
    for (std::int64_t i = 0; i < half; ++i) {
      tmp[i] = (x[2 * i] + x[2 * i + 1]) * kInvSqrt2;
      tmp[half + i] = (x[2 * i] - x[2 * i + 1]) * kInvSqrt2;
    }
    for (std::int64_t i = 0; i < len; ++i) x[i] = tmp[i];
  }
}

void ifwt(std::span<double> alpha) {
  const std::int64_t n = static_cast<std::int64_t>(alpha.size());
  require_pow2(n);
  std::vector<double> tmp(n);
  for (std::int64_t len = 2; len <= n; len *= 2) {
    const std::int64_t half = len / 2;
    for (std::int64_t i = 0; i < half; ++i) {
      tmp[2 * i] = (alpha[i] + alpha[half + i]) * kInvSqrt2;
      tmp[2 * i + 1] = (alpha[i] - alpha[half + i]) * kInvSqrt2;
    }
    for (std::int64_t i = 0; i < len; ++i) alpha[i] = tmp[i];
  }
}

namespace {

template <void (*Transform1d)(std::span<double>)>
void transform_nd(std::span<double> tensor, std::span<const std::int64_t> shape, int threads) {
  std::int64_t cells = 1;
  for (std::int64_t s : shape) {
    require_pow2(s);
    cells *= s;
  }
  if (static_cast<std::int64_t>(tensor.size()) != cells) {
    throw std::invalid_argument("tensor size does not match shape");
  }
  const int d = static_cast<int>(shape.size());
  std::int64_t stride = 1;
  for (int axis = d - 1; axis >= 0; --axis) {
    const std::int64_t len = shape[axis];
    if (len > 1) {
      const std::int64_t nlines = cells / len;
      double* data = tensor.data();
#ifdef _OPENMP
      const int nt = threads > 0 ? threads : omp_get_max_threads();
#else
      const int nt = 1;
      (void)threads;
#endif
#pragma omp parallel num_threads(nt) if (nlines > 1 && nt > 1)
      {
        std::vector<double> line(len);
#pragma omp for schedule(static)
        for (std::int64_t li = 0; li < nlines; ++li) {
          const std::int64_t inner = li % stride;
          const std::int64_t outer = li / stride;
          const std::int64_t base = outer * (len * stride) + inner;
          for (std::int64_t k = 0; k < len; ++k) line[k] = data[base + k * stride];
          Transform1d(std::span<double>(line));
          for (std::int64_t k = 0; k < len; ++k) data[base + k * stride] = line[k];
        }
      }
    }
    stride *= len;
  }
}

}  // namespace

void fwt_nd(std::span<double> tensor, std::span<const std::int64_t> shape, int threads) {
  transform_nd<fwt>(tensor, shape, threads);
}

void ifwt_nd(std::span<double> tensor, std::span<const std::int64_t> shape, int threads) {
  transform_nd<ifwt>(tensor, shape, threads);
}

namespace {

std::int64_t overlap_len(std::int64_t alo, std::int64_t ahi, std::int64_t blo, std::int64_t bhi) {
  const std::int64_t lo = alo > blo ? alo : blo;
  const std::int64_t hi = ahi < bhi ? ahi : bhi;
  return hi >= lo ? hi - lo + 1 : 0;
}

}  // namespace

double range_basis_dot(Interval iv, std::int64_t j, std::int64_t n) {
  require_pow2(n);
  if (j < 1 || j > n) throw std::invalid_argument("wavelet index out of range");
  if (iv.lo < 1 || iv.lo > iv.hi || iv.hi > n) {
    throw std::invalid_argument("interval outside transform length");
  }
  if (j == 1) {
    return static_cast<double>(iv.width()) / std::sqrt(static_cast<double>(n));
  }
  const LevelShift ls = decode_index(j, n);
  const std::int64_t block = n >> ls.level;
  const std::int64_t start = ls.shift * block + 1;  // 1-based
  const std::int64_t mid = start + block / 2;
  const std::int64_t o1 = overlap_len(iv.lo, iv.hi, start, mid - 1);
  const std::int64_t o2 = overlap_len(iv.lo, iv.hi, mid, start + block - 1);
  if (o1 == 0 && o2 == 0) return 0.0;
  const double v = std::sqrt(static_cast<double>(std::int64_t{1} << ls.level) /
                             static_cast<double>(n));
  return v * static_cast<double>(o1 - o2);
}

double range_basis_dot(const RangeQuery& q, std::int64_t flat_j, const PaddedDomain& pd) {
  const int d = pd.dims();
  if (q.dims() != d) throw std::invalid_argument("query dimensionality mismatch");
  if (flat_j < 1 || flat_j > pd.padded_cells()) {
    throw std::invalid_argument("wavelet index out of range");
  }
  // Decode the flat row-major index into per-dimension basis indices.
  std::int64_t rem = flat_j - 1;
  double prod = 1.0;
  for (int axis = d - 1; axis >= 0; --axis) {
    const std::int64_t n = pd.padded[axis];
    const std::int64_t ji = rem % n + 1;
    rem /= n;
    prod *= range_basis_dot(q.bounds[axis], ji, n);
    if (prod == 0.0) return 0.0;
  }
  return prod;
}

}  // namespace histlearn::haar
