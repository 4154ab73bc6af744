#pragma once

#include <array>
#include <span>
#include <vector>

#include "transtrack/assignment.hpp"
#include "transtrack/geometry.hpp"

namespace transtrack {

struct Prediction {
  CenterBox box;                    // normalized center form
  std::vector<double> class_probs;  // one sigmoid probability per class
};

struct GroundTruth {
  CenterBox box;
  int class_id = 0;
};

struct LossWeights {
  double lambda_cls = 2.0;
  double lambda_l1 = 5.0;
  double lambda_giou = 2.0;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;

  /// Throws std::invalid_argument on a negative entry.
  void validate() const;
};

inline constexpr double kProbEps = 1e-8;

/// Sigmoid focal loss on one probability, clamped to [eps, 1 - eps].
double focal_loss(double prob, bool is_positive, double alpha, double gamma);
/// d focal_loss / d prob; zero where the clamp is active.
double focal_loss_grad(double prob, bool is_positive, double alpha, double gamma);

/// Sum of absolute coordinate differences in center form.
double l1_distance(const CenterBox& a, const CenterBox& b);
double center_giou(const CenterBox& a, const CenterBox& b);

/// Matching cost for one prediction/target pair.
double pair_cost(const Prediction& pred, const GroundTruth& gt, const LossWeights& w);

/// rows = predictions, cols = ground truth.
Assignment optimal_match(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                         const LossWeights& w);

struct SetLossResult {
  double loss = 0.0;
  double cls = 0.0;  // unweighted component sums, before normalization
  double l1 = 0.0;
  double giou = 0.0;
  Assignment matching;
  std::vector<std::array<double, 4>> box_grad;  // d loss / d (cx, cy, w, h)
  std::vector<std::vector<double>> prob_grad;   // d loss / d class_probs
};

/// Training loss under the optimal matching, divided by max(1, |gts|).
double set_loss(std::span<const Prediction> preds, std::span<const GroundTruth> gts,
                const LossWeights& w);

/// Same value as set_loss plus gradients with respect to every predicted box
/// coordinate and class probability. The matching is held fixed.
SetLossResult set_loss_with_grad(std::span<const Prediction> preds,
                                 std::span<const GroundTruth> gts, const LossWeights& w);

/// Loss and gradients under a caller-provided matching (rows = preds,
/// cols = gts). Used for the "inherit track-query index" strategy.
SetLossResult set_loss_for_matching(std::span<const Prediction> preds,
                                    std::span<const GroundTruth> gts, const LossWeights& w,
                                    Assignment matching);

}  // namespace transtrack
