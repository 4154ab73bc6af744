#include "transtrack/kernels.hpp"

#include <algorithm>

namespace transtrack::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void iou_matrix_scalar(const BoxesSoA& a, const BoxesSoA& b, double* out) {
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double area_a = (a.x2[i] - a.x1[i]) * (a.y2[i] - a.y1[i]);
    for (std::size_t j = 0; j < nb; ++j) {
      const double iw = std::max(0.0, std::min(a.x2[i], b.x2[j]) - std::max(a.x1[i], b.x1[j]));
      const double ih = std::max(0.0, std::min(a.y2[i], b.y2[j]) - std::max(a.y1[i], b.y1[j]));
      const double inter = iw * ih;
      const double area_b = (b.x2[j] - b.x1[j]) * (b.y2[j] - b.y1[j]);
      const double uni = area_a + area_b - inter;
      out[i * nb + j] = uni > 0.0 ? inter / uni : 0.0;
    }
  }
}

void gemm_acc_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar, &dot_scalar, &axpy_scalar, &iou_matrix_scalar,
                                 &gemm_acc_scalar};
  return table;
}

}  // namespace transtrack::kernels
