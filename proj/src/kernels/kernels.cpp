#include "seqtag/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kernels_detail.hpp"

namespace seqtag::kernels {

namespace {

void add_scalar(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_scalar(double* dst, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_scalar(double* x, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= c;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

const Ops kScalar = {"scalar", add_scalar, mul_scalar, scale_scalar, axpy_scalar, dot_scalar};

bool cpu_has_avx2() {
#if (defined(__GNUC__) || defined(__clang__)) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Ops* resolve() {
  const Ops* avx2 = avx2_ops();
  const char* pref = std::getenv("SEQTAG_KERNELS");
  if (pref != nullptr) {
    if (std::strcmp(pref, "scalar") == 0) return &kScalar;
    if (std::strcmp(pref, "avx2") == 0 && avx2 != nullptr) return avx2;
    // "auto" or anything unrecognized falls through to the default pick
  }
  return avx2 != nullptr ? avx2 : &kScalar;
}

}  // namespace

const Ops& scalar_ops() { return kScalar; }

const Ops* avx2_ops() {
  if (!cpu_has_avx2()) return nullptr;
  return detail::avx2_table();
}

const Ops& active() {
  static const Ops* picked = resolve();
  return *picked;
}

}  // namespace seqtag::kernels
