#include "flowsense/kernels.hpp"

// Reference kernels. Plain loops, ascending-k accumulation per output
// element; the AVX2 variant mirrors this order.

namespace flowsense::kernels {
namespace {

void gemm_nn_scalar(int m, int n, int k, const double* a, const double* b,
                    double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    }
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_scalar(int n, const double* a, const double* b, double* out) {
  for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(int n, const double* a, const double* b, double* out) {
  for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(int n, const double* a, const double* b, double* out) {
  for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(int n, double alpha, const double* x, double* out) {
  for (int i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void axpy_scalar(int n, double alpha, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(int n, const double* a, const double* b) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(int n, const double* x) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void relu_scalar(int n, const double* x, double* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_acc_scalar(int n, const double* x, const double* dy,
                              double* dx) {
  for (int i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend = {
      "scalar",          gemm_nn_scalar, add_scalar,  sub_scalar,
      mul_scalar,        scale_scalar,   axpy_scalar, dot_scalar,
      sum_scalar,        relu_scalar,    relu_backward_acc_scalar,
  };
  return backend;
}

}  // namespace flowsense::kernels
