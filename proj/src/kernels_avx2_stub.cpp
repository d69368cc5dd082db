// Fallback for toolchains without AVX2 support; dispatch then always picks
// the scalar backend.

#include "flowsense/kernels.hpp"

namespace flowsense::kernels {

const Backend* avx2_backend() { return nullptr; }

}  // namespace flowsense::kernels
