#include <gtest/gtest.h>

#include <cmath>

#include "transtrack/synth.hpp"

namespace transtrack::synth {
namespace {

bool has_id(const FrameAnnotations& f, int id) {
  for (const auto& e : f.entries) {
    if (e.id == id) return true;
  }
  return false;
}

TEST(SplitMix64, ReferenceOutputs) {
  SplitMix64 g(0);
  EXPECT_EQ(g.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(g.next(), 0x6E789E6AA1B965F4ULL);
  SplitMix64 h(0);
  h.next();
  h.next();
  const double u = h.uniform();
  EXPECT_GE(u, 0.0);
  EXPECT_LT(u, 1.0);
}

TEST(SplitMix64, NormalMoments) {
  SplitMix64 g(5);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.03);
  EXPECT_NEAR(s2 / n, 1.0, 0.05);
}

TEST(Generate, ZeroNoiseDetectionsEqualGt) {
  ScenarioSpec spec;
  spec.num_frames = 12;
  const Scenario sc = generate(spec);
  ASSERT_EQ(sc.gt.size(), sc.dets.size());
  for (std::size_t f = 0; f < sc.gt.size(); ++f) {
    ASSERT_EQ(sc.gt[f].entries.size(), sc.dets[f].entries.size());
    for (std::size_t k = 0; k < sc.gt[f].entries.size(); ++k) {
      EXPECT_EQ(sc.gt[f].entries[k].box, sc.dets[f].entries[k].box);
      EXPECT_EQ(sc.dets[f].entries[k].id, -1);
    }
  }
  EXPECT_EQ(sc.features.size(), 12u);
}

TEST(Generate, Deterministic) {
  ScenarioSpec spec;
  spec.center_noise = 2.0;
  spec.miss_prob = 0.1;
  spec.motion = MotionKind::Sinusoidal;
  const Scenario a = generate(spec);
  const Scenario b = generate(spec);
  EXPECT_EQ(a.gt, b.gt);
  EXPECT_EQ(a.dets, b.dets);
  EXPECT_EQ(a.features, b.features);
  spec.seed = 2;
  EXPECT_NE(generate(spec).gt, a.gt);
}

TEST(Generate, OcclusionWindowRemovesDetections) {
  ScenarioSpec spec;
  spec.num_frames = 12;
  spec.num_objects = 2;
  spec.occlusions = {{1, 5, 8}};
  const Scenario sc = generate(spec);
  for (int f = 1; f <= 12; ++f) {
    const auto& gt = sc.gt[static_cast<std::size_t>(f - 1)];
    const bool hidden = f >= 5 && f <= 8;
    const std::size_t expected_dets = hidden ? 1u : 2u;
    EXPECT_EQ(sc.dets[static_cast<std::size_t>(f - 1)].entries.size(), expected_dets) << f;
    EXPECT_TRUE(has_id(gt, 2));
  }
}

TEST(Generate, BirthsAndDeaths) {
  ScenarioSpec spec;
  spec.num_frames = 10;
  spec.num_objects = 2;
  spec.births = {1, 4};
  spec.deaths = {6, 10};
  const Scenario sc = generate(spec);
  for (const auto& f : sc.gt) {
    EXPECT_EQ(has_id(f, 1), f.frame <= 6);
    EXPECT_EQ(has_id(f, 2), f.frame >= 4);
  }
}

TEST(ScenarioSpec, Validation) {
  ScenarioSpec spec;
  spec.num_objects = 1;
  spec.births = {5};
  spec.deaths = {5};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec.num_frames = 1;
  spec.births = {1};
  spec.deaths = {1};
  EXPECT_NO_THROW(spec.validate());
  spec = {};
  spec.max_width = 1000;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = {};
  spec.occlusions = {{9, 1, 2}};
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(SpecConfig, TextRoundTrip) {
  ScenarioSpec spec;
  spec.num_objects = 2;
  spec.births = {1, 3};
  spec.occlusions = {{2, 4, 6}};
  spec.motion = MotionKind::Sinusoidal;
  spec.seed = 77;
  KvConfig cfg = KvConfig::parse_string(spec_to_text(spec));
  const ScenarioSpec back = spec_from_config(cfg);
  cfg.finish();
  EXPECT_EQ(spec_to_text(back), spec_to_text(spec));
}

TEST(Render, ShapeAndCoordinateChannels) {
  const GridSpec grid{4, 6, 3, 1};
  const std::vector<Annotation> objs{{1, Box{100, 100, 80, 120}}};
  const Tensor t = render_features(objs, ImageSize{640, 480}, grid);
  const FeatureLayout layout{3};
  ASSERT_EQ(t.shape(), (std::vector<std::size_t>{4, 6, static_cast<std::size_t>(layout.channels())}));
  const Tensor empty = render_features({}, ImageSize{640, 480}, grid);
  for (std::size_t i = 0; i < empty.size(); i += static_cast<std::size_t>(layout.channels())) {
    EXPECT_EQ(empty.values()[i], 0.0);
  }
}

StaticFrame sample_frame(const GridSpec& grid) {
  StaticFrame fr;
  fr.image = {640, 480};
  fr.objects = {{1, Box{100, 100, 80, 120}}, {2, Box{300, 200, 60, 90}}};
  fr.features = render_features(fr.objects, fr.image, grid);
  return fr;
}

TEST(Perturb, IdentityTransform) {
  const GridSpec grid;
  const StaticFrame fr = sample_frame(grid);
  const StaticFrame out = perturb_static(fr, Transform2D{}, grid);
  EXPECT_EQ(out.objects, fr.objects);
  EXPECT_EQ(out.features, fr.features);
  const Transform2D t = draw_transform(PerturbRanges{}, 9);
  EXPECT_EQ(t.scale, 1.0);
  EXPECT_EQ(t.tx, 0.0);
}

TEST(Perturb, TranslationShiftsAndClips) {
  const GridSpec grid;
  StaticFrame fr = sample_frame(grid);
  fr.objects.push_back({3, Box{600, 10, 40, 50}});
  const StaticFrame out = perturb_static(fr, Transform2D{1.0, 5.0, 0.0}, grid);
  ASSERT_EQ(out.objects.size(), 3u);
  EXPECT_DOUBLE_EQ(out.objects[0].box.left, 105.0);
  EXPECT_DOUBLE_EQ(out.objects[1].box.left, 305.0);
  EXPECT_DOUBLE_EQ(out.objects[2].box.left, 605.0);
  EXPECT_DOUBLE_EQ(out.objects[2].box.right(), 640.0);
}

TEST(Perturb, DrawIsReproducible) {
  const PerturbRanges r{0.05, 12.0};
  const Transform2D a = draw_transform(r, 31);
  const Transform2D b = draw_transform(r, 31);
  EXPECT_EQ(a.scale, b.scale);
  EXPECT_EQ(a.tx, b.tx);
  EXPECT_EQ(a.ty, b.ty);
  EXPECT_LE(std::abs(a.scale - 1.0), 0.05);
  EXPECT_LE(std::abs(a.tx), 12.0);
}

TEST(SkipSample, Strides) {
  Sequence s;
  for (int f = 1; f <= 9; ++f) s.push_back({f, {{1, Box{double(f), 0, 1, 1}}}});
  EXPECT_EQ(skip_sample(s, 1), s);
  const Sequence k = skip_sample(s, 4);
  ASSERT_EQ(k.size(), 3u);
  EXPECT_EQ(k[0].frame, 1);
  EXPECT_EQ(k[2].frame, 3);
  EXPECT_DOUBLE_EQ(k[1].entries[0].box.left, 5.0);
  EXPECT_DOUBLE_EQ(k[2].entries[0].box.left, 9.0);
  EXPECT_THROW(skip_sample(s, 0), std::invalid_argument);
}

TEST(SkipSample, ScenarioKeepsSameFrames) {
  ScenarioSpec spec;
  spec.num_frames = 9;
  spec.center_noise = 1.0;
  const Scenario sc = generate(spec);
  const Scenario k = skip_sample(sc, 4);
  ASSERT_EQ(k.features.size(), 3u);
  EXPECT_EQ(k.gt[1].entries, sc.gt[4].entries);
  EXPECT_EQ(k.dets[1].entries, sc.dets[4].entries);
  EXPECT_EQ(k.features[2], sc.features[8]);
}

TEST(Oracle, QuerySlotsFromCentre) {
  const Sequence gt{{1, {{1, Box{10, 10, 20, 20}}, {2, Box{600, 400, 20, 20}}}}};
  OracleProvider p(gt, true, QuerySlots{ImageSize{640, 480}, 4, 2});
  const auto d = p.detect(1);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].query_index, 0);
  EXPECT_EQ(d[1].query_index, 7);
}

TEST(Oracle, CrossObjectIou) {
  const Sequence gt{{1, {{1, Box{0, 0, 10, 10}}, {2, Box{100, 0, 10, 10}}}},
                    {2, {{1, Box{95, 0, 10, 10}}, {2, Box{200, 0, 10, 10}}}}};
  EXPECT_DOUBLE_EQ(max_pairwise_gt_iou(gt), 0.0);
  EXPECT_NEAR(max_cross_object_iou(gt), 5.0 / 15.0, 1e-12);
}

}  // namespace
}  // namespace transtrack::synth
