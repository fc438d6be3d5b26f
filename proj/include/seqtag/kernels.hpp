#pragma once

#include <cstddef>

namespace seqtag::kernels {

// f64 inner-loop primitives. Everything hotter than a libm call in the
// toolkit (matmul, matvec, outer products, SGD updates, the clip norm)
// decomposes into these five, so the scalar and SIMD lanes stay small and
// comparable.
//
// Reduction-order contract:
//   add/mul/scale/axpy are elementwise; both lanes produce bit-identical
//   results. dot accumulates left-to-right in the scalar lane and in four
//   partial lanes in the AVX2 lane, so the lanes may differ by rounding.
struct Ops {
  const char* name;
  void (*add)(double* dst, const double* a, const double* b, std::size_t n);
  void (*mul)(double* dst, const double* a, const double* b, std::size_t n);
  void (*scale)(double* x, double c, std::size_t n);
  void (*axpy)(double* y, double a, const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

// Reference lane. Left-to-right loops, no contraction.
const Ops& scalar_ops();

// AVX2 lane, or nullptr when the build target or the running CPU lacks AVX2.
const Ops* avx2_ops();

// Lane used by the rest of the library. Picks AVX2 when available; the
// SEQTAG_KERNELS environment variable (scalar|avx2|auto) overrides. Resolved
// once per process.
const Ops& active();

}  // namespace seqtag::kernels
