// AVX2 lane. This is the only translation unit built with -mavx2; the runtime
// CPU check happens in kernels.cpp before anything here is called.

#include "kernels_detail.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

namespace seqtag::kernels::detail {

namespace {

void add_avx2(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_avx2(double* dst, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_avx2(double* x, double c, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), vc));
  }
  for (; i < n; ++i) x[i] *= c;
}

// mul then add, not fmadd: keeps this lane bit-identical to the scalar lane,
// which is built with -ffp-contract=off. The equivalence tests assert it.
void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

// Four partial sums, reduced lane 0..3, then the tail. Different rounding
// from the scalar left-to-right order; callers treat dot as tolerance-equal.
double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

const Ops kAvx2 = {"avx2", add_avx2, mul_avx2, scale_avx2, axpy_avx2, dot_avx2};

}  // namespace

const Ops* avx2_table() { return &kAvx2; }

}  // namespace seqtag::kernels::detail

#else  // !__AVX2__

namespace seqtag::kernels::detail {
const Ops* avx2_table() { return nullptr; }
}  // namespace seqtag::kernels::detail

#endif
