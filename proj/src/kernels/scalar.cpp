#include "sdeop/kernels.hpp"

#include <cmath>

// Reference kernels. These define the semantics; the vector variants are
// tested for equivalence against them.

namespace sdeop::kernels {
namespace {

double dot_ref(const double* a, const double* b, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_ref(const double* a, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += a[i];
  return s;
}

double abs_sum_ref(const double* a, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

double sq_diff_sum_ref(const double* a, const double* b, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_ref(double alpha, const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_ref(const double* a, const double* b, double* dst, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void sub_ref(const double* a, const double* b, double* dst, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void mul_ref(const double* a, const double* b, double* dst, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_ref(const double* a, double alpha, double* dst, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] = alpha * a[i];
}

void relu_ref(const double* a, double* dst, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dst[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_grad_ref(const double* x, const double* gout, double* gin, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) gin[i] += gout[i];
  }
}

void tanh_grad_ref(const double* y, const double* gout, double* gin, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) gin[i] += (1.0 - y[i] * y[i]) * gout[i];
}

void sign_axpy_ref(double alpha, const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) {
      y[i] += alpha;
    } else if (x[i] < 0.0) {
      y[i] -= alpha;
    }
  }
}

void adam_update_ref(double* p, double* m, double* v, const double* g, std::int64_t n,
                     double lr, double beta1, double beta2, double eps,
                     double bc1, double bc2) {
  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * bc1;
    const double vhat = v[i] * bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      "scalar",      dot_ref,       sum_ref,      abs_sum_ref, sq_diff_sum_ref,
      axpy_ref,      add_ref,       sub_ref,      mul_ref,     scale_ref,
      relu_ref,      relu_grad_ref, tanh_grad_ref, sign_axpy_ref, adam_update_ref,
  };
  return table;
}

}  // namespace sdeop::kernels
