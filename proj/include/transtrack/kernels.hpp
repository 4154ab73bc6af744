#pragma once

// Dense inner-loop kernels used by the toy network and the IoU cost matrices.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2/FMA variant is compiled into its own translation unit and selected at
// runtime when the CPU supports it. Setting TRANSTRACK_SIMD=scalar in the
// environment forces the reference path.
//
// The vector variants reassociate sums and use fused multiply-add, so their
// results differ from the scalar path in the last few ulps. Within one process
// the selected path is fixed, which keeps repeated runs bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace transtrack::kernels {

enum class Isa { Scalar, Avx2 };

/// Boxes in structure-of-arrays corner form (x1, y1, x2, y2).
struct BoxesSoA {
  std::span<const double> x1, y1, x2, y2;
  [[nodiscard]] std::size_t size() const { return x1.size(); }
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // out[i * b.size() + j] = IoU(a[i], b[j])
  void (*iou_matrix)(const BoxesSoA& a, const BoxesSoA& b, double* out);
  // C (m x n) += A (m x k) * B (k x n), row-major
  void (*gemm_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);
};

const KernelTable& scalar_table();
/// Null when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

/// The table selected for this process (first call decides).
const KernelTable& active();

bool cpu_has_avx2();
std::string_view isa_name(Isa isa);

// Convenience wrappers over active().
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(std::span<double> y, double alpha, std::span<const double> x) {
  active().axpy(y.data(), alpha, x.data(), y.size());
}

/// C (m x n) = A (m x k) * B (k x n), row-major. Accumulates when accumulate is set.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate = false);
/// C (m x n) = A (m x k) * B^T where B is (n x k).
void gemm_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);
/// C (k x n) = A^T * B where A is (m x k) and B is (m x n).
void gemm_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate = false);

}  // namespace transtrack::kernels
