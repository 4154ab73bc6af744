#pragma once

#include <algorithm>
#include <span>
#include <vector>

namespace transtrack {

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

/// Normalized center form: cx, cy, w, h, each relative to the image size.
struct CenterBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const CenterBox&, const CenterBox&) = default;
};

/// Axis-aligned box in corner form (left, top, width, height). Pixels unless
/// a caller deliberately stores normalized coordinates in it.
struct Box {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  [[nodiscard]] double right() const { return left + width; }
  [[nodiscard]] double bottom() const { return top + height; }
  [[nodiscard]] double area() const { return width * height; }
  [[nodiscard]] double center_x() const { return left + 0.5 * width; }
  [[nodiscard]] double center_y() const { return top + 0.5 * height; }

  /// Throws std::invalid_argument when the image size is not positive.
  [[nodiscard]] CenterBox to_center(ImageSize image) const;
  [[nodiscard]] static Box from_center(const CenterBox& c, ImageSize image);
  /// Corner form built from a center form box without rescaling.
  [[nodiscard]] static Box from_center_unscaled(const CenterBox& c);

  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

/// Generalized IoU. For two zero-area boxes the union is 0 and only the
/// enclosing-box penalty remains; if the enclosing box is empty too the
/// result is 0.
double giou(const Box& a, const Box& b);

/// Dense IoU matrix, rows = a, cols = b, via the active SIMD kernel.
std::vector<double> iou_matrix(std::span<const Box> a, std::span<const Box> b);

namespace detail {

inline double value_of(double v) { return v; }

// Shared by the plain double path and the dual-number path in the losses.
// Min/max are passed in so the gradient path can pick a subgradient on ties.
template <typename T, typename Min, typename Max>
T giou_corners(const T& ax1, const T& ay1, const T& ax2, const T& ay2, const T& bx1,
               const T& by1, const T& bx2, const T& by2, Min min_fn, Max max_fn, T* iou_out) {
  const T zero(0.0);
  const T area_a = (ax2 - ax1) * (ay2 - ay1);
  const T area_b = (bx2 - bx1) * (by2 - by1);
  const T iw = max_fn(zero, min_fn(ax2, bx2) - max_fn(ax1, bx1));
  const T ih = max_fn(zero, min_fn(ay2, by2) - max_fn(ay1, by1));
  const T inter = iw * ih;
  const T uni = area_a + area_b - inter;
  const T iou_v = value_of(uni) > 0.0 ? inter / uni : zero;
  const T cw = max_fn(ax2, bx2) - min_fn(ax1, bx1);
  const T ch = max_fn(ay2, by2) - min_fn(ay1, by1);
  const T hull = cw * ch;
  if (iou_out != nullptr) *iou_out = iou_v;
  if (!(value_of(hull) > 0.0)) return iou_v;
  return iou_v - (hull - uni) / hull;
}
}  // namespace detail
}  // namespace transtrack
