#include "beamtune/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>

namespace beamtune::kernels::avx2 {

namespace {

constexpr double kSqrt5 = 2.2360679774997896964;

// exp for x <= 0. Cody-Waite reduction by ln2, degree-13 Taylor on
// |r| <= ln2/2 (truncation < 1e-17), then scale by 2^n through the
// exponent bits. Inputs below -700 are clamped; the result there is
// below 1e-304 and only ever multiplies a bounded polynomial.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-700.0);
  x = _mm256_max_pd(x, lo);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  // Horner on 1/k! coefficients, k = 13..0.
  static constexpr double c[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
      1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
      1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
      1.0 / 24.0,         1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(c[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[k]));

  // 2^n for n in [-1010, 0]: biased exponent into the high bits.
  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i e = _mm256_cvtepi32_epi64(ni);
  e = _mm256_add_epi64(e, _mm256_set1_epi64x(1023));
  e = _mm256_slli_epi64(e, 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(e));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void matern52_row(const double* point, const double* block, std::size_t count,
                  std::size_t stride, std::size_t dim, double signal_var,
                  double* out) {
  const __m256d sqrt5 = _mm256_set1_pd(kSqrt5);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d third = _mm256_set1_pd(1.0 / 3.0);
  const __m256d sf2 = _mm256_set1_pd(signal_var);
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) {
    __m256d d2 = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(point[d]),
                                         _mm256_loadu_pd(block + d * stride + j));
      d2 = _mm256_fmadd_pd(diff, diff, d2);
    }
    const __m256d s = _mm256_mul_pd(sqrt5, _mm256_sqrt_pd(d2));
    // 1 + s + s^2/3
    const __m256d poly = _mm256_fmadd_pd(_mm256_mul_pd(s, s), third,
                                         _mm256_add_pd(one, s));
    const __m256d e = exp_nonpositive(_mm256_sub_pd(_mm256_setzero_pd(), s));
    _mm256_storeu_pd(out + j, _mm256_mul_pd(sf2, _mm256_mul_pd(poly, e)));
  }
  if (j < count) {
    scalar::matern52_row(point, block + j, count - j, stride, dim, signal_var,
                         out + j);
  }
}

void dense(const double* weights, const double* bias, const double* in,
           std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* w = weights + r * cols;
    __m256d acc = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + c), _mm256_loadu_pd(in + c), acc);
    }
    double tail = 0.0;
    for (; c < cols; ++c) tail += w[c] * in[c];
    out[r] = hsum(acc) + tail + bias[r];
  }
}

}  // namespace beamtune::kernels::avx2
