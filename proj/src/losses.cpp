#include "transtrack/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace transtrack {
namespace {

// Forward-mode dual number carrying d/d(cx, cy, w, h) of the predicted box.
struct Dual {
  double v = 0.0;
  std::array<double, 4> d{};

  Dual() = default;
  explicit Dual(double value) : v(value) {}
  Dual(double value, int seed) : v(value) { d[static_cast<std::size_t>(seed)] = 1.0; }
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r(a.v + b.v);
  for (std::size_t i = 0; i < 4; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r(a.v - b.v);
  for (std::size_t i = 0; i < 4; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (std::size_t i = 0; i < 4; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r(a.v / b.v);
  const double inv2 = 1.0 / (b.v * b.v);
  for (std::size_t i = 0; i < 4; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
  return r;
}
double value_of(const Dual& x) { return x.v; }

// On exact ties take the midpoint of the two one-sided derivatives, which is
// what a central finite difference measures at the kink.
Dual tie_pick(const Dual& a, const Dual& b, bool a_wins) {
  if (a.v == b.v) {
    Dual r(a.v);
    for (std::size_t i = 0; i < 4; ++i) r.d[i] = 0.5 * (a.d[i] + b.d[i]);
    return r;
  }
  return a_wins ? a : b;
}
Dual dual_min(const Dual& a, const Dual& b) { return tie_pick(a, b, a.v < b.v); }
Dual dual_max(const Dual& a, const Dual& b) { return tie_pick(a, b, a.v > b.v); }

double sign_subgrad(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Returns 1 - giou and fills its gradient with respect to the predicted box.
double giou_term_with_grad(const CenterBox& pred, const CenterBox& gt,
                           std::array<double, 4>& grad) {
  const Dual cx(pred.cx, 0), cy(pred.cy, 1), w(pred.w, 2), h(pred.h, 3);
  const Dual half(0.5);
  const Dual px1 = cx - half * w, py1 = cy - half * h, px2 = cx + half * w, py2 = cy + half * h;
  const Dual gx1(gt.cx - 0.5 * gt.w), gy1(gt.cy - 0.5 * gt.h), gx2(gt.cx + 0.5 * gt.w),
      gy2(gt.cy + 0.5 * gt.h);
  const Dual g = detail::giou_corners<Dual>(px1, py1, px2, py2, gx1, gy1, gx2, gy2, dual_min,
                                            dual_max, nullptr);
  for (std::size_t i = 0; i < 4; ++i) grad[i] = -g.d[i];
  return 1.0 - g.v;
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

void check_class(const Prediction& pred, const GroundTruth& gt) {
  if (gt.class_id < 0 || static_cast<std::size_t>(gt.class_id) >= pred.class_probs.size()) {
    throw std::invalid_argument("ground-truth class id " + std::to_string(gt.class_id) +
                                " outside the configured class count");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_cls < 0.0 || lambda_l1 < 0.0 || lambda_giou < 0.0 || focal_alpha < 0.0 ||
      focal_gamma < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

double focal_loss(double prob, bool is_positive, double alpha, double gamma) {
  const double p = clamp_prob(prob);
  if (is_positive) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

double focal_loss_grad(double prob, bool is_positive, double alpha, double gamma) {
  if (prob < kProbEps || prob > 1.0 - kProbEps) return 0.0;
  const double p = prob;
  if (is_positive) {
    const double q = 1.0 - p;
    const double dpow = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
    // d/dp [-(1-p)^g log p] = g (1-p)^(g-1) log p - (1-p)^g / p
    return alpha * (dpow * std::log(p) - std::pow(q, gamma) / p);
  }
  const double dpow = gamma == 0.0 ? 0.0 : gamma * std::pow(p, gamma - 1.0);
  // d/dp [-p^g log(1-p)] = -g p^(g-1) log(1-p) + p^g / (1-p)
  return (1.0 - alpha) * (-dpow * std::log(1.0 - p) + std::pow(p, gamma) / (1.0 - p));
}

double l1_distance(const CenterBox& a, const CenterBox& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

double center_giou(const CenterBox& a, const CenterBox& b) {
  return giou(Box::from_center_unscaled(a), Box::from_center_unscaled(b));
}

double pair_cost(const Prediction& pred, const GroundTruth& gt, const LossWeights& w) {
  check_class(pred, gt);
  const double p = pred.class_probs[static_cast<std::size_t>(gt.class_id)];
  const double cls = focal_loss(p, true, w.focal_alpha, w.focal_gamma);
  return w.lambda_cls * cls + w.lambda_l1 * l1_distance(pred.box, gt.box) +
         w.lambda_giou * (1.0 - center_giou(pred.box, gt.box));
}

Assignment optimal_match(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                         const LossWeights& w) {
  w.validate();
  CostMatrix costs(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) costs(i, j) = pair_cost(preds[i], gts[j], w);
  }
  return solve_min_cost(costs);
}

SetLossResult set_loss_for_matching(std::span<const Prediction> preds,
                                    std::span<const GroundTruth> gts, const LossWeights& w,
                                    Assignment matching) {
  w.validate();
  SetLossResult r;
  r.matching = std::move(matching);
  r.box_grad.assign(preds.size(), {0.0, 0.0, 0.0, 0.0});
  r.prob_grad.resize(preds.size());
  std::vector<int> target(preds.size(), -1);
  for (const auto& [pi, gi] : r.matching.pairs) target[pi] = static_cast<int>(gi);

  const double norm = 1.0 / std::max<double>(1.0, static_cast<double>(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& pred = preds[i];
    const int gi = target[i];
    const int positive_class = gi >= 0 ? gts[static_cast<std::size_t>(gi)].class_id : -1;
    if (gi >= 0) check_class(pred, gts[static_cast<std::size_t>(gi)]);
    r.prob_grad[i].assign(pred.class_probs.size(), 0.0);
    for (std::size_t c = 0; c < pred.class_probs.size(); ++c) {
      const bool pos = static_cast<int>(c) == positive_class;
      const double p = pred.class_probs[c];
      r.cls += focal_loss(p, pos, w.focal_alpha, w.focal_gamma);
      r.prob_grad[i][c] =
          w.lambda_cls * norm * focal_loss_grad(p, pos, w.focal_alpha, w.focal_gamma);
    }
    if (gi < 0) continue;
    const CenterBox& t = gts[static_cast<std::size_t>(gi)].box;
    const double diffs[4] = {pred.box.cx - t.cx, pred.box.cy - t.cy, pred.box.w - t.w,
                             pred.box.h - t.h};
    std::array<double, 4> g_giou{};
    r.giou += giou_term_with_grad(pred.box, t, g_giou);
    for (std::size_t k = 0; k < 4; ++k) {
      r.l1 += std::abs(diffs[k]);
      r.box_grad[i][k] =
          norm * (w.lambda_l1 * sign_subgrad(diffs[k]) + w.lambda_giou * g_giou[k]);
    }
  }
  r.loss = norm * (w.lambda_cls * r.cls + w.lambda_l1 * r.l1 + w.lambda_giou * r.giou);
  return r;
}

SetLossResult set_loss_with_grad(std::span<const Prediction> preds,
                                 std::span<const GroundTruth> gts, const LossWeights& w) {
  return set_loss_for_matching(preds, gts, w, optimal_match(preds, gts, w));
}

double set_loss(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                const LossWeights& w) {
  return set_loss_with_grad(preds, gts, w).loss;
}

}  // namespace transtrack
