#include "transtrack/geometry.hpp"

#include <stdexcept>

#include "transtrack/kernels.hpp"

namespace transtrack {
namespace {

void check_image(ImageSize image) {
  if (!(image.width > 0.0) || !(image.height > 0.0)) {
    throw std::invalid_argument("image size must be positive");
  }
}

double dmin(double a, double b) { return std::min(a, b); }
double dmax(double a, double b) { return std::max(a, b); }

}  // namespace

CenterBox Box::to_center(ImageSize image) const {
  check_image(image);
  return {center_x() / image.width, center_y() / image.height, width / image.width,
          height / image.height};
}

Box Box::from_center(const CenterBox& c, ImageSize image) {
  check_image(image);
  const double w = c.w * image.width;
  const double h = c.h * image.height;
  return {c.cx * image.width - 0.5 * w, c.cy * image.height - 0.5 * h, w, h};
}

Box Box::from_center_unscaled(const CenterBox& c) {
  return {c.cx - 0.5 * c.w, c.cy - 0.5 * c.h, c.w, c.h};
}

double iou(const Box& a, const Box& b) {
  double out = 0.0;
  detail::giou_corners<double>(a.left, a.top, a.right(), a.bottom(), b.left, b.top, b.right(),
                               b.bottom(), dmin, dmax, &out);
  return out;
}

double giou(const Box& a, const Box& b) {
  return detail::giou_corners<double>(a.left, a.top, a.right(), a.bottom(), b.left, b.top,
                                      b.right(), b.bottom(), dmin, dmax, nullptr);
}

std::vector<double> iou_matrix(std::span<const Box> a, std::span<const Box> b) {
  std::vector<double> soa(4 * (a.size() + b.size()));
  auto fill = [](std::span<const Box> boxes, double* base) {
    const std::size_t n = boxes.size();
    for (std::size_t i = 0; i < n; ++i) {
      base[i] = boxes[i].left;
      base[n + i] = boxes[i].top;
      base[2 * n + i] = boxes[i].right();
      base[3 * n + i] = boxes[i].bottom();
    }
  };
  double* pa = soa.data();
  double* pb = soa.data() + 4 * a.size();
  fill(a, pa);
  fill(b, pb);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  kernels::BoxesSoA sa{{pa, na}, {pa + na, na}, {pa + 2 * na, na}, {pa + 3 * na, na}};
  kernels::BoxesSoA sb{{pb, nb}, {pb + nb, nb}, {pb + 2 * nb, nb}, {pb + 3 * nb, nb}};
  std::vector<double> out(na * nb);
  if (!out.empty()) kernels::active().iou_matrix(sa, sb, out.data());
  return out;
}

}  // namespace transtrack
