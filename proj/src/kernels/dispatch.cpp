#include "sdeop/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace sdeop::kernels {

#if defined(SDEOP_WITH_AVX2)
const KernelTable* avx2_table_impl();
#endif

bool cpu_has_avx2() {
#if defined(SDEOP_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* lookup(const std::string& name) {
  if (name == "scalar") return &scalar_table();
#if defined(SDEOP_WITH_AVX2)
  if (name == "avx2" && cpu_has_avx2()) return avx2_table_impl();
#endif
  return nullptr;
}

const KernelTable* resolve_default() {
  if (const char* env = std::getenv("SDEOP_KERNELS")) {
    if (const KernelTable* t = lookup(env)) return t;
    // Unknown or unsupported request falls back to scalar rather than abort.
    return &scalar_table();
  }
#if defined(SDEOP_WITH_AVX2)
  if (cpu_has_avx2()) return avx2_table_impl();
#endif
  return &scalar_table();
}

const KernelTable*& active_slot() {
  static const KernelTable* slot = resolve_default();
  return slot;
}

}  // namespace

const KernelTable& active() { return *active_slot(); }

void set_active(const std::string& name) {
  const KernelTable* t = lookup(name);
  if (!t) throw std::runtime_error("kernel table unavailable: " + name);
  active_slot() = t;
}

std::vector<std::string> available() {
  std::vector<std::string> out{"scalar"};
#if defined(SDEOP_WITH_AVX2)
  if (cpu_has_avx2()) out.push_back("avx2");
#endif
  return out;
}

}  // namespace sdeop::kernels
