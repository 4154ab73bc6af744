#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "oracles.hpp"
#include "transtrack/geometry.hpp"

namespace transtrack {
namespace {

TEST(Iou, IdenticalBoxesGiveOne) {
  const Box a{3, 4, 10, 7};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_DOUBLE_EQ(iou(Box{0, 0, 2, 2}, Box{5, 5, 2, 2}), 0.0);
}

TEST(Iou, QuarterOverlap) {
  EXPECT_NEAR(iou(Box{0, 0, 2, 2}, Box{1, 1, 2, 2}), 1.0 / 7.0, 1e-12);
}

TEST(Iou, ZeroAreaBoxes) {
  EXPECT_DOUBLE_EQ(iou(Box{1, 1, 0, 0}, Box{1, 1, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(iou(Box{1, 1, 0, 3}, Box{0, 0, 4, 4}), 0.0);
}

TEST(Giou, Examples) {
  EXPECT_DOUBLE_EQ(giou(Box{2, 2, 5, 5}, Box{2, 2, 5, 5}), 1.0);
  EXPECT_NEAR(giou(Box{0, 0, 1, 1}, Box{2, 0, 1, 1}), -1.0 / 3.0, 1e-12);
  EXPECT_NEAR(giou(Box{0, 0, 1, 1}, Box{1, 0, 1, 1}), 0.0, 1e-12);
}

TEST(Giou, TwoPointsUsesHullOnly) {
  // Both boxes degenerate; union 0, hull 2x2.
  EXPECT_DOUBLE_EQ(giou(Box{0, 0, 0, 0}, Box{2, 2, 0, 0}), -1.0);
  EXPECT_DOUBLE_EQ(giou(Box{1, 1, 0, 0}, Box{1, 1, 0, 0}), 0.0);
}

TEST(Giou, MatchesRasterOracleOnGridBoxes) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> pos(0, 12), ext(1, 8);
  for (int t = 0; t < 300; ++t) {
    const Box a{double(pos(rng)), double(pos(rng)), double(ext(rng)), double(ext(rng))};
    const Box b{double(pos(rng)), double(pos(rng)), double(ext(rng)), double(ext(rng))};
    EXPECT_NEAR(iou(a, b), oracle::raster_iou(a, b), 1e-12);
    EXPECT_NEAR(giou(a, b), oracle::raster_giou(a, b), 1e-12);
    EXPECT_GE(giou(a, b), -1.0);
    EXPECT_LE(giou(a, b), iou(a, b));
  }
}

TEST(Giou, HalfCellBoxesAgreeWithFinerRaster) {
  const Box a{0.5, 1.0, 2.5, 1.5};
  const Box b{1.5, 0.5, 3.0, 2.0};
  EXPECT_NEAR(giou(a, b), oracle::raster_giou(a, b, 0.5), 1e-12);
}

TEST(CenterForm, Examples) {
  const ImageSize img{100, 100};
  const CenterBox c = Box{0, 0, 10, 10}.to_center(img);
  EXPECT_DOUBLE_EQ(c.cx, 0.05);
  EXPECT_DOUBLE_EQ(c.cy, 0.05);
  EXPECT_DOUBLE_EQ(c.w, 0.1);
  EXPECT_DOUBLE_EQ(c.h, 0.1);
  EXPECT_EQ(Box(Box{0, 0, 100, 100}).to_center(img), (CenterBox{0.5, 0.5, 1.0, 1.0}));
}

TEST(CenterForm, RoundTrip) {
  const ImageSize img{640, 480};
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 300.0);
  for (int t = 0; t < 100; ++t) {
    const Box b{u(rng), u(rng), u(rng), u(rng)};
    const Box back = Box::from_center(b.to_center(img), img);
    EXPECT_NEAR(back.left, b.left, 1e-9);
    EXPECT_NEAR(back.top, b.top, 1e-9);
    EXPECT_NEAR(back.width, b.width, 1e-9);
    EXPECT_NEAR(back.height, b.height, 1e-9);
  }
}

TEST(CenterForm, RejectsBadImage) {
  EXPECT_THROW((void)Box{}.to_center(ImageSize{0, 10}), std::invalid_argument);
  EXPECT_THROW((void)Box{}.to_center(ImageSize{10, -1}), std::invalid_argument);
}

TEST(IouMatrix, MatchesPairwiseIou) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 50.0), e(0.0, 30.0);
  std::vector<Box> a(7), b(5);
  for (auto& x : a) x = {u(rng), u(rng), e(rng), e(rng)};
  for (auto& x : b) x = {u(rng), u(rng), e(rng), e(rng)};
  const auto m = iou_matrix(a, b);
  ASSERT_EQ(m.size(), a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      EXPECT_NEAR(m[i * b.size() + j], iou(a[i], b[j]), 1e-12);
    }
  }
}

TEST(IouMatrix, EmptySides) {
  const std::vector<Box> a{{0, 0, 1, 1}};
  EXPECT_TRUE(iou_matrix(a, {}).empty());
  EXPECT_TRUE(iou_matrix({}, a).empty());
}

}  // namespace
}  // namespace transtrack
