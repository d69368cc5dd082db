// AVX2+FMA kernel variant. Compiled with -mavx2 -mfma for this translation
// unit only; callers reach it through the runtime-dispatched Backend table.
// Per-element accumulation stays in ascending-k order (see kernels.hpp).

#include "flowsense/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define FLOWSENSE_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define FLOWSENSE_HAVE_AVX2_BUILD 0
#endif

namespace flowsense::kernels {

#if FLOWSENSE_HAVE_AVX2_BUILD

namespace {

void gemm_nn_avx2(int m, int n, int k, const double* a, const double* b,
                  double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0, c1, c2, c3;
      if (accumulate) {
        c0 = _mm256_loadu_pd(crow + j);
        c1 = _mm256_loadu_pd(crow + j + 4);
        c2 = _mm256_loadu_pd(crow + j + 8);
        c3 = _mm256_loadu_pd(crow + j + 12);
      } else {
        c0 = c1 = c2 = c3 = _mm256_setzero_pd();
      }
      for (int kk = 0; kk < k; ++kk) {
        const __m256d av = _mm256_set1_pd(arow[kk]);
        const double* brow = b + static_cast<size_t>(kk) * n + j;
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), c1);
        c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), c2);
        c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), c3);
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d cv = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
      for (int kk = 0; kk < k; ++kk) {
        const __m256d av = _mm256_set1_pd(arow[kk]);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + static_cast<size_t>(kk) * n + j), cv);
      }
      _mm256_storeu_pd(crow + j, cv);
    }
    for (; j < n; ++j) {
      double acc = accumulate ? crow[j] : 0.0;
      for (int kk = 0; kk < k; ++kk) {
        acc = __builtin_fma(arow[kk], b[static_cast<size_t>(kk) * n + j], acc);
      }
      crow[j] = acc;
    }
  }
}

void add_avx2(int n, const double* a, const double* b, double* out) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(int n, const double* a, const double* b, double* out) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(int n, const double* a, const double* b, double* out) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(int n, double alpha, const double* x, double* out) {
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void axpy_avx2(int n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = __builtin_fma(alpha, x[i], y[i]);
}

double dot_avx2(int n, const double* a, const double* b) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  __m256d s = _mm256_add_pd(s0, s1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, s);
  double acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
  for (; i < n; ++i) acc = __builtin_fma(a[i], b[i], acc);
  return acc;
}

double sum_avx2(int n, const double* x) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
    s1 = _mm256_add_pd(s1, _mm256_loadu_pd(x + i + 4));
  }
  __m256d s = _mm256_add_pd(s0, s1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, s);
  double acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

void relu_avx2(int n, const double* x, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_acc_avx2(int n, const double* x, const double* dy,
                            double* dx) {
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d contrib = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), contrib));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

bool cpu_has_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace

const Backend* avx2_backend() {
  static const Backend backend = {
      "avx2",         gemm_nn_avx2, add_avx2,  sub_avx2,
      mul_avx2,       scale_avx2,   axpy_avx2, dot_avx2,
      sum_avx2,       relu_avx2,    relu_backward_acc_avx2,
  };
  static const bool usable = cpu_has_avx2_fma();
  return usable ? &backend : nullptr;
}

#else

const Backend* avx2_backend() { return nullptr; }

#endif  // FLOWSENSE_HAVE_AVX2_BUILD

}  // namespace flowsense::kernels
