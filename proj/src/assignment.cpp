#include "transtrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace transtrack {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("cost matrix data size does not match its shape");
  }
}

double Assignment::total_cost(const CostMatrix& costs) const {
  double sum = 0.0;
  for (const auto& [r, c] : pairs) sum += costs(r, c);
  return sum;
}

namespace {

// Shortest augmenting path with potentials (the e-maxx formulation). Requires
// n <= m. Returns, for each row, its column.
std::vector<std::size_t> km_rows_le_cols(const CostMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based internally; index 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment solve_min_cost(const CostMatrix& costs) {
  for (std::size_t r = 0; r < costs.rows(); ++r) {
    for (std::size_t c = 0; c < costs.cols(); ++c) {
      if (!std::isfinite(costs(r, c))) {
        throw std::invalid_argument("cost matrix entry (" + std::to_string(r) + ", " +
                                    std::to_string(c) + ") is not finite");
      }
    }
  }
  Assignment out;
  const std::size_t rows = costs.rows();
  const std::size_t cols = costs.cols();
  std::vector<char> row_used(rows, 0), col_used(cols, 0);
  if (rows > 0 && cols > 0) {
    if (rows <= cols) {
      const auto r2c = km_rows_le_cols(costs);
      for (std::size_t r = 0; r < rows; ++r) out.pairs.emplace_back(r, r2c[r]);
    } else {
      CostMatrix t(cols, rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) t(c, r) = costs(r, c);
      }
      const auto c2r = km_rows_le_cols(t);
      for (std::size_t c = 0; c < cols; ++c) out.pairs.emplace_back(c2r[c], c);
      std::sort(out.pairs.begin(), out.pairs.end());
    }
  }
  for (const auto& [r, c] : out.pairs) {
    row_used[r] = 1;
    col_used[c] = 1;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (!row_used[r]) out.unmatched_rows.push_back(r);
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (!col_used[c]) out.unmatched_cols.push_back(c);
  }
  return out;
}

Assignment match_by_iou(std::span<const Box> dets, std::span<const Box> tracks, double min_iou) {
  const auto ious = iou_matrix(dets, tracks);
  CostMatrix costs(dets.size(), tracks.size());
  for (std::size_t i = 0; i < ious.size(); ++i) {
    costs(i / tracks.size(), i % tracks.size()) = -ious[i];
  }
  Assignment raw = solve_min_cost(costs);
  Assignment out;
  out.unmatched_rows = raw.unmatched_rows;
  out.unmatched_cols = raw.unmatched_cols;
  for (const auto& [r, c] : raw.pairs) {
    if (ious[r * tracks.size() + c] >= min_iou) {
      out.pairs.emplace_back(r, c);
    } else {
      out.unmatched_rows.push_back(r);
      out.unmatched_cols.push_back(c);
    }
  }
  std::sort(out.unmatched_rows.begin(), out.unmatched_rows.end());
  std::sort(out.unmatched_cols.begin(), out.unmatched_cols.end());
  return out;
}

NmsResult nms_with_suppressors(std::span<const ScoredBox> boxes, double iou_thresh) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });
  NmsResult out;
  out.suppressed_by.assign(boxes.size(), -1);
  for (const std::size_t idx : order) {
    bool keep = true;
    for (const std::size_t k : out.kept) {
      if (iou(boxes[idx].box, boxes[k].box) > iou_thresh) {
        out.suppressed_by[idx] = static_cast<std::ptrdiff_t>(k);
        keep = false;
        break;
      }
    }
    if (keep) out.kept.push_back(idx);
  }
  return out;
}

std::vector<std::size_t> nms_merge(std::span<const ScoredBox> boxes, double iou_thresh) {
  return nms_with_suppressors(boxes, iou_thresh).kept;
}

}  // namespace transtrack
