#pragma once

#include <string>
#include <vector>

namespace flowsense::kernels {

// Dense double-precision primitives behind the tensor engine. Two variants
// ship: a scalar reference and an AVX2+FMA implementation. The active one is
// picked once at startup from CPU capabilities; FLOWSENSE_KERNELS=scalar|avx2
// overrides the choice.
//
// Contract shared by all variants: every output element is accumulated in
// ascending-k order, so results do not depend on how many rows a call
// processes. This keeps batched and single-sample forward passes bit-identical
// within a variant. Variants may differ from each other in the last ulps
// (FMA vs separate rounding); the equivalence tests bound that difference.
struct Backend {
  const char* name;

  // c [m x n] = a [m x k] @ b [k x n], row-major. accumulate adds into c.
  void (*gemm_nn)(int m, int n, int k, const double* a, const double* b,
                  double* c, bool accumulate);

  void (*add)(int n, const double* a, const double* b, double* out);
  void (*sub)(int n, const double* a, const double* b, double* out);
  void (*mul)(int n, const double* a, const double* b, double* out);
  void (*scale)(int n, double alpha, const double* x, double* out);
  // y += alpha * x
  void (*axpy)(int n, double alpha, const double* x, double* y);
  double (*dot)(int n, const double* a, const double* b);
  double (*sum)(int n, const double* x);
  void (*relu)(int n, const double* x, double* out);
  // dx += dy where x > 0
  void (*relu_backward_acc)(int n, const double* x, const double* dy,
                            double* dx);
};

const Backend& scalar_backend();

// Null when the binary or the CPU lacks AVX2/FMA.
const Backend* avx2_backend();

// Selected once per process; subsequent calls return the same backend.
const Backend& active_backend();

// All variants usable on this machine (scalar always included).
std::vector<const Backend*> available_backends();

}  // namespace flowsense::kernels
