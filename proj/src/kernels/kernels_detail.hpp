#pragma once

#include "seqtag/kernels.hpp"

namespace seqtag::kernels::detail {

// Defined in kernels_avx2.cpp (the only TU built with -mavx2). Returns the
// table when the build carries AVX2 code, nullptr otherwise. Callers must
// still verify CPU support before invoking anything in the table.
const Ops* avx2_table();

}  // namespace seqtag::kernels::detail
