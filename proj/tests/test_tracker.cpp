#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "transtrack/metrics.hpp"
#include "transtrack/mot_io.hpp"
#include "transtrack/synth.hpp"
#include "transtrack/tracker.hpp"

namespace transtrack {
namespace {

Detection det_at(double left, double top, double score = 0.9) {
  return Detection{Box{left, top, 40, 80}, score, {score}, {}, -1};
}

TEST(Tracker, ColdStartAssignsIdsInOrder) {
  Tracker t(TrackerConfig{});
  const std::vector<Detection> d{det_at(0, 0), det_at(200, 0)};
  const auto out = t.step(d, {});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, 1);
  EXPECT_EQ(out[1].id, 2);
  EXPECT_EQ(out[1].box, d[1].box);
}

TEST(Tracker, LowScoreDetectionsIgnored) {
  Tracker t(TrackerConfig{});
  const std::vector<Detection> d{det_at(0, 0, 0.49)};
  EXPECT_TRUE(t.step(d, {}).empty());
}

TEST(Tracker, RebirthWithinWindowKeepsId) {
  Tracker t(TrackerConfig{});
  const Detection d = det_at(100, 100);
  t.step({&d, 1}, {});
  for (int g = 0; g < 32; ++g) EXPECT_TRUE(t.step({}, {}).empty());
  ASSERT_EQ(t.tracklets().size(), 1u);
  EXPECT_EQ(t.tracklets()[0].state, TrackState::Inactive);
  EXPECT_EQ(t.tracklets()[0].inactive_count, 32);
  const auto out = t.step({&d, 1}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, 1);
  EXPECT_EQ(t.tracklets()[0].inactive_count, 0);
}

TEST(Tracker, GapOfThirtyThreeGivesNewId) {
  Tracker t(TrackerConfig{});
  const Detection d = det_at(100, 100);
  t.step({&d, 1}, {});
  for (int g = 0; g < 33; ++g) t.step({}, {});
  EXPECT_TRUE(t.tracklets().empty());
  const auto out = t.step({&d, 1}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, 2);
}

TEST(Tracker, ZeroWindowDropsImmediately) {
  TrackerConfig cfg;
  cfg.rebirth_k = 0;
  Tracker t(cfg);
  const Detection d = det_at(0, 0);
  t.step({&d, 1}, {});
  t.step({}, {});
  EXPECT_TRUE(t.tracklets().empty());
}

TEST(Tracker, InactiveTrackletKeepsFrozenBox) {
  Tracker t(TrackerConfig{});
  const Detection a = det_at(100, 100);
  t.step({&a, 1}, {});
  t.step({}, {});
  EXPECT_EQ(t.tracklets()[0].box, a.box);
  // A detection near the frozen box revives the same id.
  const Detection b = det_at(104, 100);
  const auto out = t.step({&b, 1}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, 1);
  EXPECT_EQ(out[0].box, b.box);
}

TEST(Tracker, TrackBoxOverridesStoredBox) {
  Tracker t(TrackerConfig{});
  const Detection a = det_at(0, 0);
  t.step({&a, 1}, {});
  // The object jumped; only the propagated box overlaps the new detection.
  const Detection b = det_at(300, 0);
  const TrackBox tb{1, Box{302, 0, 40, 80}, 0.9, {}, {}};
  const auto out = t.step({&b, 1}, {&tb, 1});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, 1);
}

TEST(Tracker, IdsNeverReused) {
  TrackerConfig cfg;
  cfg.rebirth_k = 1;
  Tracker t(cfg);
  std::set<int> seen;
  for (int round = 0; round < 5; ++round) {
    const Detection d = det_at(50.0 * round, 0);
    const auto out = t.step({&d, 1}, {});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_TRUE(seen.insert(out[0].id).second);
    t.step({}, {});
    t.step({}, {});
  }
}

TEST(Tracker, UnknownTrackletThrows) {
  Tracker t(TrackerConfig{});
  const TrackBox tb{7, Box{0, 0, 1, 1}, 0.9, {}, {}};
  EXPECT_THROW(t.step({}, {&tb, 1}), std::logic_error);
}

TEST(Tracker, ConfigValidation) {
  TrackerConfig cfg;
  cfg.min_iou = 1.5;
  EXPECT_THROW(Tracker{cfg}, std::invalid_argument);
  cfg = {};
  cfg.rebirth_k = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Tracker, NmsModeMatchesOverlappingPair) {
  TrackerConfig cfg;
  cfg.association = AssociationMode::Nms;
  Tracker t(cfg);
  const std::vector<Detection> d1{det_at(0, 0), det_at(300, 0)};
  t.step(d1, {});
  const std::vector<Detection> d2{det_at(302, 0), det_at(2, 0), det_at(150, 200)};
  const auto out = t.step(d2, {});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].id, 1);
  EXPECT_EQ(out[0].box, d2[1].box);
  EXPECT_EQ(out[1].id, 2);
  EXPECT_EQ(out[1].box, d2[0].box);
  EXPECT_EQ(out[2].id, 3);
}

TEST(RunSequence, SingleFrameIsDetectionOnly) {
  Sequence dets{{1, {{-1, Box{0, 0, 10, 20}, 0.9, 1, 1.0}}}};
  io::ReplayDetector det(dets, 1);
  FrozenBoxPropagator prop;
  const auto res = run_sequence(1, det, prop, TrackerConfig{});
  ASSERT_EQ(res.size(), 1u);
  ASSERT_EQ(res[0].boxes.size(), 1u);
  EXPECT_EQ(res[0].boxes[0].id, 1);
}

TEST(RunSequence, PerfectProvidersReproduceGt) {
  synth::ScenarioSpec spec;
  spec.num_frames = 10;
  spec.num_objects = 3;
  spec.seed = 4;
  const synth::Scenario sc = synth::generate(spec);
  synth::OracleProvider oracle(sc.gt);
  const auto res = run_sequence(10, oracle, oracle, TrackerConfig{});
  const MotReport r = evaluate(sc.gt, io::to_sequence(res));
  EXPECT_DOUBLE_EQ(r.mota, 100.0);
  EXPECT_EQ(r.idsw, 0);
  EXPECT_DOUBLE_EQ(r.idf1, 100.0);
}

TEST(RunSequence, LateBirthFirstSeenAtItsFrame) {
  synth::ScenarioSpec spec;
  spec.num_frames = 10;
  spec.num_objects = 2;
  spec.births = {1, 5};
  spec.seed = 8;
  const synth::Scenario sc = synth::generate(spec);
  synth::OracleProvider oracle(sc.gt);
  const auto res = run_sequence(10, oracle, oracle, TrackerConfig{});
  for (int f = 1; f <= 10; ++f) {
    const auto& boxes = res[static_cast<std::size_t>(f - 1)].boxes;
    EXPECT_EQ(boxes.size(), f < 5 ? 1u : 2u) << "frame " << f;
  }
  EXPECT_EQ(res[4].boxes.back().id, 2);
}

TEST(RunSequence, ProviderErrorNamesFrame) {
  Sequence dets{{1, {{-1, Box{0, 0, 10, 20}, 0.9, 1, 1.0}}}};
  io::ReplayDetector det(dets, 1);
  FrozenBoxPropagator prop;
  try {
    run_sequence(2, det, prop, TrackerConfig{});
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos);
  }
}

TEST(FrozenBox, ReturnsStoredBoxes) {
  std::vector<Tracklet> ts(2);
  ts[0].id = 3;
  ts[0].box = {1, 2, 3, 4};
  ts[1].id = 5;
  ts[1].box = {9, 8, 7, 6};
  FrozenBoxPropagator p;
  const auto a = p.propagate(2, ts);
  const auto b = p.propagate(2, ts);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].tracklet_id, 3);
  EXPECT_EQ(a[1].box, ts[1].box);
  EXPECT_EQ(b[1].box, a[1].box);
}

}  // namespace
}  // namespace transtrack
