// AVX2/FMA variants of the hot loops. Compiled with -mavx2 -mfma in this
// translation unit only; selection happens at runtime in dispatch.cpp.

#include "sdeop/kernels.hpp"

#include <cmath>
#include <immintrin.h>

namespace sdeop::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::int64_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_avx2(const double* a, std::int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

double abs_sum_avx2(const double* a, std::int64_t n) {
  const __m256d signbit = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(signbit, _mm256_loadu_pd(a + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

double sq_diff_sum_avx2(const double* a, const double* b, std::int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::int64_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(const double* a, const double* b, double* dst, std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* dst, std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* dst, std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_avx2(const double* a, double alpha, double* dst, std::int64_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(va, _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) dst[i] = alpha * a[i];
}

void relu_avx2(const double* a, double* dst, std::int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  }
  for (; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_grad_avx2(const double* x, const double* gout, double* gin, std::int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(gout + i));
    _mm256_storeu_pd(gin + i, _mm256_add_pd(_mm256_loadu_pd(gin + i), g));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) gin[i] += gout[i];
  }
}

void tanh_grad_avx2(const double* y, const double* gout, double* gin, std::int64_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d sech2 = _mm256_fnmadd_pd(vy, vy, one);  // 1 - y*y
    const __m256d g = _mm256_mul_pd(sech2, _mm256_loadu_pd(gout + i));
    _mm256_storeu_pd(gin + i, _mm256_add_pd(_mm256_loadu_pd(gin + i), g));
  }
  for (; i < n; ++i) gin[i] += (1.0 - y[i] * y[i]) * gout[i];
}

void sign_axpy_avx2(double alpha, const double* x, double* y, std::int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d pa = _mm256_set1_pd(alpha);
  const __m256d na = _mm256_set1_pd(-alpha);
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(vx, zero, _CMP_GT_OQ), pa);
    const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(vx, zero, _CMP_LT_OQ), na);
    const __m256d contrib = _mm256_or_pd(pos, neg);
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), contrib));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) {
      y[i] += alpha;
    } else if (x[i] < 0.0) {
      y[i] -= alpha;
    }
  }
}

void adam_update_avx2(double* p, double* m, double* v, const double* g, std::int64_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vomb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vomb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vomb1, vg));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vomb2, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(vm, vbc1);
    const __m256d vhat = _mm256_mul_pd(vv, vbc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table = {
      "avx2",        dot_avx2,       sum_avx2,      abs_sum_avx2, sq_diff_sum_avx2,
      axpy_avx2,     add_avx2,       sub_avx2,      mul_avx2,     scale_avx2,
      relu_avx2,     relu_grad_avx2, tanh_grad_avx2, sign_axpy_avx2, adam_update_avx2,
  };
  return &table;
}

}  // namespace sdeop::kernels
