#include <cstdlib>
#include <cstring>
#include <vector>

#include "transtrack/kernels.hpp"

namespace transtrack::kernels {

#ifndef TRANSTRACK_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

namespace {

const KernelTable& select() {
  const char* forced = std::getenv("TRANSTRACK_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return scalar_table();
  if (const KernelTable* t = avx2_table(); t != nullptr && cpu_has_avx2()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

namespace {

// Reused transpose buffer; the kernels are single-threaded per process.
std::vector<double>& scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  if (!accumulate && m * n > 0) std::memset(c, 0, m * n * sizeof(double));
  if (m == 0 || n == 0 || k == 0) return;
  active().gemm_acc(a, b, c, m, k, n);
}

void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate && m * n > 0) std::memset(c, 0, m * n * sizeof(double));
  if (m == 0 || n == 0 || k == 0) return;
  auto& bt = scratch(k * n);
  transpose(b, bt.data(), n, k);
  active().gemm_acc(a, bt.data(), c, m, k, n);
}

void gemm_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate && k * n > 0) std::memset(c, 0, k * n * sizeof(double));
  if (m == 0 || n == 0 || k == 0) return;
  auto& at = scratch(m * k);
  transpose(a, at.data(), m, k);
  active().gemm_acc(at.data(), b, c, k, m, n);
}

}  // namespace transtrack::kernels
