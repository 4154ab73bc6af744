// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>

#include "transtrack/kernels.hpp"

namespace transtrack::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
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

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four b-boxes per lane group against one a-box.
void iou_matrix_avx2(const BoxesSoA& a, const BoxesSoA& b, double* out) {
  const std::size_t nb = b.size();
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const __m256d ax1 = _mm256_set1_pd(a.x1[i]);
    const __m256d ay1 = _mm256_set1_pd(a.y1[i]);
    const __m256d ax2 = _mm256_set1_pd(a.x2[i]);
    const __m256d ay2 = _mm256_set1_pd(a.y2[i]);
    const double area_a_s = (a.x2[i] - a.x1[i]) * (a.y2[i] - a.y1[i]);
    const __m256d area_a = _mm256_set1_pd(area_a_s);
    std::size_t j = 0;
    for (; j + 4 <= nb; j += 4) {
      const __m256d bx1 = _mm256_loadu_pd(b.x1.data() + j);
      const __m256d by1 = _mm256_loadu_pd(b.y1.data() + j);
      const __m256d bx2 = _mm256_loadu_pd(b.x2.data() + j);
      const __m256d by2 = _mm256_loadu_pd(b.y2.data() + j);
      const __m256d iw =
          _mm256_max_pd(zero, _mm256_sub_pd(_mm256_min_pd(ax2, bx2), _mm256_max_pd(ax1, bx1)));
      const __m256d ih =
          _mm256_max_pd(zero, _mm256_sub_pd(_mm256_min_pd(ay2, by2), _mm256_max_pd(ay1, by1)));
      const __m256d inter = _mm256_mul_pd(iw, ih);
      const __m256d area_b = _mm256_mul_pd(_mm256_sub_pd(bx2, bx1), _mm256_sub_pd(by2, by1));
      const __m256d uni = _mm256_sub_pd(_mm256_add_pd(area_a, area_b), inter);
      const __m256d positive = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
      // Divide by 1 where the union is empty, then mask the lane to 0.
      const __m256d safe = _mm256_blendv_pd(_mm256_set1_pd(1.0), uni, positive);
      _mm256_storeu_pd(out + i * nb + j, _mm256_and_pd(_mm256_div_pd(inter, safe), positive));
    }
    for (; j < nb; ++j) {
      const double iw = std::max(0.0, std::min(a.x2[i], b.x2[j]) - std::max(a.x1[i], b.x1[j]));
      const double ih = std::max(0.0, std::min(a.y2[i], b.y2[j]) - std::max(a.y1[i], b.y1[j]));
      const double inter = iw * ih;
      const double uni = area_a_s + (b.x2[j] - b.x1[j]) * (b.y2[j] - b.y1[j]) - inter;
      out[i * nb + j] = uni > 0.0 ? inter / uni : 0.0;
    }
  }
}

// R rows of C against 8 columns, accumulators held in registers.
template <int R>
void gemm_block8(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                 std::size_t j) {
  __m256d acc[R][2];
  for (int r = 0; r < R; ++r) {
    acc[r][0] = _mm256_loadu_pd(c + r * n + j);
    acc[r][1] = _mm256_loadu_pd(c + r * n + j + 4);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
    for (int r = 0; r < R; ++r) {
      const __m256d av = _mm256_set1_pd(a[r * k + p]);
      acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < R; ++r) {
    _mm256_storeu_pd(c + r * n + j, acc[r][0]);
    _mm256_storeu_pd(c + r * n + j + 4, acc[r][1]);
  }
}

template <int R>
void gemm_rows(const double* a, const double* b, double* c, std::size_t k, std::size_t n) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) gemm_block8<R>(a, b, c, k, n, j);
  for (; j + 4 <= n; j += 4) {
    __m256d acc[R];
    for (int r = 0; r < R; ++r) acc[r] = _mm256_loadu_pd(c + r * n + j);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d bv = _mm256_loadu_pd(b + p * n + j);
      for (int r = 0; r < R; ++r) acc[r] = _mm256_fmadd_pd(_mm256_set1_pd(a[r * k + p]), bv, acc[r]);
    }
    for (int r = 0; r < R; ++r) _mm256_storeu_pd(c + r * n + j, acc[r]);
  }
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      double s = c[r * n + j];
      for (std::size_t p = 0; p < k; ++p) s += a[r * k + p] * b[p * n + j];
      c[r * n + j] = s;
    }
  }
}

void gemm_acc_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(a + i * k, b, c + i * n, k, n);
  switch (m - i) {
    case 3: gemm_rows<3>(a + i * k, b, c + i * n, k, n); break;
    case 2: gemm_rows<2>(a + i * k, b, c + i * n, k, n); break;
    case 1: gemm_rows<1>(a + i * k, b, c + i * n, k, n); break;
    default: break;
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::Avx2, &dot_avx2, &axpy_avx2, &iou_matrix_avx2,
                                 &gemm_acc_avx2};
  return &table;
}

}  // namespace transtrack::kernels
