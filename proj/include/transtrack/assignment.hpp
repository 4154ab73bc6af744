#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "transtrack/geometry.hpp"

namespace transtrack {

/// Dense row-major cost matrix. Entries must be finite.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  [[nodiscard]] std::span<const double> data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  std::vector<std::size_t> unmatched_rows;                 // ascending
  std::vector<std::size_t> unmatched_cols;                 // ascending

  [[nodiscard]] double total_cost(const CostMatrix& costs) const;
};

/// Kuhn-Munkres with row/column potentials, O(n^2 m). Returns a minimum-cost
/// matching of size min(rows, cols). Columns are scanned in ascending order
/// and only a strictly smaller slack replaces the current choice, so the
/// result is deterministic for a given matrix.
/// Throws std::invalid_argument on a non-finite entry.
Assignment solve_min_cost(const CostMatrix& costs);

/// Maximum total-IoU matching (rows = dets, cols = tracks); pairs whose IoU
/// falls below min_iou are demoted to unmatched on both sides.
Assignment match_by_iou(std::span<const Box> dets, std::span<const Box> tracks, double min_iou);

struct ScoredBox {
  Box box;
  double score = 0.0;
};

/// Greedy non-maximum suppression. Candidates are visited by descending score
/// (ties by ascending index); a box is dropped iff it overlaps an already kept
/// box with IoU > iou_thresh. Returns kept indices in visiting order.
std::vector<std::size_t> nms_merge(std::span<const ScoredBox> boxes, double iou_thresh);

/// Like nms_merge, but also reports for every dropped box the kept box that
/// suppressed it (the first kept box in visiting order above the threshold).
struct NmsResult {
  std::vector<std::size_t> kept;
  std::vector<std::ptrdiff_t> suppressed_by;  // -1 for kept boxes
};
NmsResult nms_with_suppressors(std::span<const ScoredBox> boxes, double iou_thresh);

}  // namespace transtrack
