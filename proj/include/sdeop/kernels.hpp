#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdeop::kernels {

// Hot inner loops of the tensor and optimizer code. Every entry has a scalar
// reference implementation (scalar.cpp); on x86-64 an AVX2/FMA variant is
// compiled into avx2.cpp and selected at startup when the CPU supports it.
// Override with SDEOP_KERNELS=scalar|avx2 or set_active().
//
// relu_grad / tanh_grad / sign_axpy accumulate into their output, matching
// the gradient-accumulation convention of the tape.
struct KernelTable {
  const char* name;

  double (*dot)(const double* a, const double* b, std::int64_t n);
  double (*sum)(const double* a, std::int64_t n);
  double (*abs_sum)(const double* a, std::int64_t n);
  double (*sq_diff_sum)(const double* a, const double* b, std::int64_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::int64_t n);
  void (*add)(const double* a, const double* b, double* dst, std::int64_t n);
  void (*sub)(const double* a, const double* b, double* dst, std::int64_t n);
  void (*mul)(const double* a, const double* b, double* dst, std::int64_t n);
  // dst = alpha * a
  void (*scale)(const double* a, double alpha, double* dst, std::int64_t n);
  void (*relu)(const double* a, double* dst, std::int64_t n);
  // gin += (x > 0) * gout        (subgradient 0 at the origin)
  void (*relu_grad)(const double* x, const double* gout, double* gin, std::int64_t n);
  // gin += (1 - y^2) * gout      (y is the stored tanh output)
  void (*tanh_grad)(const double* y, const double* gout, double* gin, std::int64_t n);
  // y += alpha * sign(x)         (sign(0) = 0)
  void (*sign_axpy)(double alpha, const double* x, double* y, std::int64_t n);
  // Fused Adam update. bc1 = 1/(1-beta1^t), bc2 = 1/(1-beta2^t).
  void (*adam_update)(double* p, double* m, double* v, const double* g, std::int64_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);
};

const KernelTable& scalar_table();

bool cpu_has_avx2();

// Active table, resolved once on first use.
const KernelTable& active();

// Force a table by name ("scalar", "avx2"); throws if unavailable.
void set_active(const std::string& name);

std::vector<std::string> available();

}  // namespace sdeop::kernels
