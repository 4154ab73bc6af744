#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "transtrack/losses.hpp"

namespace transtrack {
namespace {

Prediction pred(CenterBox b, double p) { return {b, {p}}; }

TEST(FocalLoss, Examples) {
  EXPECT_NEAR(focal_loss(1.0, true, 0.25, 2.0), 0.0, 1e-12);
  EXPECT_NEAR(focal_loss(0.5, true, 0.25, 2.0), 0.25 * 0.25 * std::log(2.0), 1e-12);
  EXPECT_NEAR(focal_loss(0.5, true, 0.25, 2.0), 0.043322, 1e-6);
  for (double p : {0.1, 0.3, 0.9}) {
    EXPECT_NEAR(focal_loss(p, true, 1.0, 0.0), -std::log(p), 1e-12);
    EXPECT_NEAR(focal_loss(p, false, 0.0, 0.0), -std::log(1.0 - p), 1e-12);
  }
}

TEST(FocalLoss, ClampKeepsValuesFinite) {
  EXPECT_TRUE(std::isfinite(focal_loss(0.0, true, 0.25, 2.0)));
  EXPECT_TRUE(std::isfinite(focal_loss(1.0, false, 0.25, 2.0)));
  EXPECT_DOUBLE_EQ(focal_loss_grad(0.0, true, 0.25, 2.0), 0.0);
}

TEST(FocalLoss, GradientMatchesFiniteDifference) {
  for (bool pos : {true, false}) {
    for (double gamma : {0.0, 1.0, 2.0}) {
      for (double p : {0.05, 0.4, 0.7, 0.95}) {
        const double h = 1e-6;
        const double num =
            (focal_loss(p + h, pos, 0.25, gamma) - focal_loss(p - h, pos, 0.25, gamma)) / (2 * h);
        EXPECT_NEAR(focal_loss_grad(p, pos, 0.25, gamma), num, 1e-6);
      }
    }
  }
}

TEST(PairCost, Examples) {
  const CenterBox b{0.5, 0.5, 0.2, 0.3};
  EXPECT_NEAR(pair_cost(pred(b, 1.0), {b, 0}, LossWeights{}), 0.0, 1e-12);

  LossWeights l1only{0.0, 1.0, 0.0, 0.25, 2.0};
  EXPECT_NEAR(pair_cost(pred({0.6, 0.5, 0.2, 0.3}, 0.3), {b, 0}, l1only), 0.1, 1e-12);
}

TEST(PairCost, SumOfIndependentTerms) {
  const CenterBox p{0.40, 0.50, 0.20, 0.30};
  const CenterBox g{0.45, 0.48, 0.25, 0.28};
  const LossWeights w{};
  const double cls = -w.focal_alpha * std::pow(1 - 0.7, 2.0) * std::log(0.7);
  const double l1 = 0.05 + 0.02 + 0.05 + 0.02;
  // Corner boxes: p [0.30,0.35]-[0.50,0.65], g [0.325,0.34]-[0.575,0.62].
  const double inter = (0.50 - 0.325) * (0.62 - 0.35);
  const double uni = 0.2 * 0.3 + 0.25 * 0.28 - inter;
  const double hull = (0.575 - 0.30) * (0.65 - 0.34);
  const double g_iou = inter / uni - (hull - uni) / hull;
  const double expected = w.lambda_cls * cls + w.lambda_l1 * l1 + w.lambda_giou * (1 - g_iou);
  EXPECT_NEAR(pair_cost(pred(p, 0.7), {g, 0}, w), expected, 1e-12);
}

TEST(PairCost, RejectsClassOutOfRange) {
  EXPECT_THROW(pair_cost(pred({}, 0.5), {{}, 1}, LossWeights{}), std::invalid_argument);
  LossWeights bad;
  bad.lambda_l1 = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(OptimalMatch, RecoversPermutation) {
  const std::vector<GroundTruth> gts{{{0.2, 0.2, 0.1, 0.1}, 0},
                                     {{0.6, 0.3, 0.2, 0.1}, 0},
                                     {{0.5, 0.8, 0.1, 0.2}, 0}};
  const std::vector<int> perm{2, 0, 1};
  std::vector<Prediction> preds;
  for (int k : perm) preds.push_back(pred(gts[k].box, 0.9));
  const Assignment a = optimal_match(preds, gts, LossWeights{});
  ASSERT_EQ(a.pairs.size(), 3u);
  for (const auto& [pi, gi] : a.pairs) EXPECT_EQ(static_cast<int>(gi), perm[pi]);
}

TEST(OptimalMatch, MorePredictionsThanTargets) {
  const std::vector<GroundTruth> gts{{{0.5, 0.5, 0.1, 0.1}, 0}};
  const std::vector<Prediction> preds{pred({0.1, 0.1, 0.1, 0.1}, 0.5),
                                      pred({0.5, 0.5, 0.1, 0.1}, 0.5),
                                      pred({0.9, 0.9, 0.1, 0.1}, 0.5)};
  const Assignment a = optimal_match(preds, gts, LossWeights{});
  ASSERT_EQ(a.pairs.size(), 1u);
  EXPECT_EQ(a.pairs[0].first, 1u);
  EXPECT_EQ(a.unmatched_rows, (std::vector<std::size_t>{0, 2}));
}

TEST(OptimalMatch, MatchesPermutationOracle) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> c(0.2, 0.8), s(0.05, 0.3), p(0.05, 0.95);
  for (int t = 0; t < 30; ++t) {
    std::vector<Prediction> preds;
    std::vector<GroundTruth> gts;
    for (int i = 0; i < 3; ++i) {
      preds.push_back(pred({c(rng), c(rng), s(rng), s(rng)}, p(rng)));
      gts.push_back({{c(rng), c(rng), s(rng), s(rng)}, 0});
    }
    const LossWeights w{};
    const Assignment a = optimal_match(preds, gts, w);
    double got = 0.0;
    for (const auto& [pi, gi] : a.pairs) got += pair_cost(preds[pi], gts[gi], w);
    std::vector<int> perm{0, 1, 2};
    double best = 1e300;
    do {
      double tot = 0.0;
      for (int i = 0; i < 3; ++i) tot += pair_cost(preds[i], gts[perm[i]], w);
      best = std::min(best, tot);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(got, best, 1e-12);
  }
}

TEST(SetLoss, PerfectPredictionsLeaveOnlyClampFloor) {
  const std::vector<GroundTruth> gts{{{0.3, 0.3, 0.1, 0.2}, 0}, {{0.7, 0.6, 0.2, 0.1}, 0}};
  const std::vector<Prediction> preds{pred(gts[1].box, 1.0), pred(gts[0].box, 1.0)};
  const SetLossResult r = set_loss_with_grad(preds, gts, LossWeights{});
  EXPECT_NEAR(r.l1, 0.0, 1e-15);
  EXPECT_NEAR(r.giou, 0.0, 1e-15);
  EXPECT_NEAR(r.cls, 2 * focal_loss(1.0, true, 0.25, 2.0), 1e-30);
  EXPECT_LT(r.loss, 1e-20);
}

TEST(SetLoss, EmptyTargetsGivesNegativeFocalSum) {
  const std::vector<Prediction> preds{pred({0.5, 0.5, 0.1, 0.1}, 0.2),
                                      pred({0.2, 0.5, 0.1, 0.1}, 0.6)};
  const LossWeights w{};
  const double expected =
      w.lambda_cls * (focal_loss(0.2, false, 0.25, 2.0) + focal_loss(0.6, false, 0.25, 2.0));
  EXPECT_NEAR(set_loss(preds, {}, w), expected, 1e-12);
}

TEST(SetLoss, HandSummedTwoByTwo) {
  const std::vector<GroundTruth> gts{{{0.3, 0.3, 0.2, 0.2}, 0}, {{0.7, 0.7, 0.2, 0.2}, 0}};
  const std::vector<Prediction> preds{pred({0.72, 0.7, 0.2, 0.2}, 0.8),
                                      pred({0.3, 0.33, 0.2, 0.2}, 0.6)};
  const LossWeights w{};
  // Pred 0 takes gt 1, pred 1 takes gt 0.
  const double cls = focal_loss(0.8, true, 0.25, 2.0) + focal_loss(0.6, true, 0.25, 2.0);
  const double l1 = 0.02 + 0.03;
  const double giou_a = 1 - center_giou(preds[0].box, gts[1].box);
  const double giou_b = 1 - center_giou(preds[1].box, gts[0].box);
  const double expected =
      (w.lambda_cls * cls + w.lambda_l1 * l1 + w.lambda_giou * (giou_a + giou_b)) / 2.0;
  EXPECT_NEAR(set_loss(preds, gts, w), expected, 1e-12);
}

TEST(SetLoss, InvariantToPredictionOrder) {
  const std::vector<GroundTruth> gts{{{0.3, 0.3, 0.2, 0.2}, 0}, {{0.7, 0.7, 0.2, 0.2}, 0}};
  std::vector<Prediction> preds{pred({0.72, 0.7, 0.2, 0.2}, 0.8),
                                pred({0.3, 0.33, 0.2, 0.2}, 0.6),
                                pred({0.5, 0.5, 0.1, 0.1}, 0.1)};
  const double a = set_loss(preds, gts, LossWeights{});
  std::reverse(preds.begin(), preds.end());
  EXPECT_NEAR(set_loss(preds, gts, LossWeights{}), a, 1e-12);
}

TEST(SetLoss, GradientsMatchFiniteDifferences) {
  const std::vector<GroundTruth> gts{{{0.31, 0.29, 0.18, 0.22}, 0}, {{0.66, 0.71, 0.24, 0.19}, 0}};
  std::vector<Prediction> preds{pred({0.63, 0.74, 0.21, 0.23}, 0.55),
                                pred({0.35, 0.27, 0.2, 0.17}, 0.35),
                                pred({0.52, 0.47, 0.13, 0.12}, 0.15)};
  const LossWeights w{};
  const SetLossResult r = set_loss_with_grad(preds, gts, w);
  const double h = 1e-7;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      auto plus = preds, minus = preds;
      double* fp[4] = {&plus[i].box.cx, &plus[i].box.cy, &plus[i].box.w, &plus[i].box.h};
      double* fm[4] = {&minus[i].box.cx, &minus[i].box.cy, &minus[i].box.w, &minus[i].box.h};
      *fp[k] += h;
      *fm[k] -= h;
      const double num = (set_loss_for_matching(plus, gts, w, r.matching).loss -
                          set_loss_for_matching(minus, gts, w, r.matching).loss) /
                         (2 * h);
      EXPECT_NEAR(r.box_grad[i][k], num, 1e-6) << "pred " << i << " coord " << k;
    }
    auto plus = preds, minus = preds;
    plus[i].class_probs[0] += h;
    minus[i].class_probs[0] -= h;
    const double num = (set_loss_for_matching(plus, gts, w, r.matching).loss -
                        set_loss_for_matching(minus, gts, w, r.matching).loss) /
                       (2 * h);
    EXPECT_NEAR(r.prob_grad[i][0], num, 1e-6);
  }
}

TEST(SetLoss, UnmatchedPredictionHasZeroBoxGradient) {
  const std::vector<GroundTruth> gts{{{0.3, 0.3, 0.2, 0.2}, 0}};
  const std::vector<Prediction> preds{pred({0.3, 0.31, 0.2, 0.2}, 0.9),
                                      pred({0.8, 0.8, 0.1, 0.1}, 0.1)};
  const SetLossResult r = set_loss_with_grad(preds, gts, LossWeights{});
  for (double g : r.box_grad[1]) EXPECT_EQ(g, 0.0);
}

}  // namespace
}  // namespace transtrack
