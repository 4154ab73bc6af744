#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "transtrack/toynet.hpp"
#include "transtrack/toynet_provider.hpp"

namespace transtrack::toynet {
namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

Tensor random_grid(const ModelConfig& cfg, std::uint32_t seed) {
  Tensor t({static_cast<std::size_t>(cfg.grid_h), static_cast<std::size_t>(cfg.grid_w),
            static_cast<std::size_t>(cfg.feature_channels)});
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : t.values()) v = u(rng);
  return t;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.grid_h = 2;
  cfg.grid_w = 3;
  cfg.d_model = 8;
  cfg.ffn_dim = 8;
  cfg.num_queries = 3;
  return cfg;
}

TEST(Attention, SingleKeyReturnsItsValue) {
  const Tensor q = random_matrix(4, 3, 1);
  const Tensor k = random_matrix(1, 3, 2);
  const Tensor v = random_matrix(1, 5, 3);
  const Tensor out = attention(q, k, v);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t t = 0; t < 5; ++t) EXPECT_NEAR(out(i, t), v(0, t), 1e-15);
  }
}

TEST(Attention, EqualLogitsAverageValues) {
  const Tensor q = Tensor::matrix(2, 4);
  const Tensor k = random_matrix(3, 4, 5);
  const Tensor v = random_matrix(3, 2, 6);
  const Tensor out = attention(q, k, v);
  for (std::size_t t = 0; t < 2; ++t) {
    const double mean = (v(0, t) + v(1, t) + v(2, t)) / 3.0;
    EXPECT_NEAR(out(0, t), mean, 1e-15);
    EXPECT_NEAR(out(1, t), mean, 1e-15);
  }
}

TEST(Attention, MatchesNaiveOracle) {
  for (std::uint32_t s = 0; s < 5; ++s) {
    const Tensor q = random_matrix(3, 4, 10 + s);
    const Tensor k = random_matrix(6, 4, 20 + s);
    const Tensor v = random_matrix(6, 4, 30 + s);
    const Tensor a = attention(q, k, v);
    const Tensor b = oracle::naive_attention(q, k, v);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-9);
  }
}

TEST(PositionalEncoding, ShapeAndRange) {
  const Tensor pe = positional_encoding(3, 5, 8);
  EXPECT_EQ(pe.rows(), 15u);
  EXPECT_EQ(pe.cols(), 8u);
  for (double v : pe.values()) {
    EXPECT_LE(std::abs(v), 1.0);
  }
  // Cells of one column share the column half.
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(pe(0, t), pe(5, t));
}

TEST(Encode, OutputShape) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = init_params(cfg);
  const Tensor m = encode(random_grid(cfg, 1), random_grid(cfg, 2), p);
  EXPECT_EQ(m.rows(), 12u);
  EXPECT_EQ(m.cols(), 8u);
  EXPECT_THROW(encode(Tensor::matrix(2, 3), random_grid(cfg, 2), p), std::invalid_argument);
}

TEST(Encode, ZeroFeaturesGivePositionsOnly) {
  ModelConfig cfg = tiny_config();
  cfg.encoder_layers = 0;
  const ModelParams p = init_params(cfg);
  const Tensor zero = random_grid(cfg, 1).zeros_like();
  const Tensor m = encode(zero, zero, p);
  const Tensor pe = positional_encoding(cfg.grid_h, cfg.grid_w, cfg.d_model);
  const std::size_t hw = 6;
  for (std::size_t r = 0; r < 2 * hw; ++r) {
    for (std::size_t t = 0; t < 8; ++t) {
      EXPECT_NEAR(m(r, t), pe(r % hw, t) + p.frame_offset(r < hw ? 0 : 1, t), 1e-15);
    }
  }
}

TEST(Encode, SwappingFramesOnlyMovesOffsets) {
  ModelConfig cfg = tiny_config();
  cfg.encoder_layers = 0;
  const ModelParams p = init_params(cfg);
  const Tensor a = random_grid(cfg, 1), b = random_grid(cfg, 2);
  const Tensor ab = encode(a, b, p), ba = encode(b, a, p);
  const std::size_t hw = 6;
  for (std::size_t r = 0; r < hw; ++r) {
    for (std::size_t t = 0; t < 8; ++t) {
      const double shift = p.frame_offset(0, t) - p.frame_offset(1, t);
      EXPECT_NEAR(ba(r, t) - ab(r + hw, t), shift, 1e-12);
      EXPECT_NEAR(ab(r, t) - ba(r + hw, t), shift, 1e-12);
    }
  }
}

TEST(Decode, EmptyQueries) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = init_params(cfg);
  const Tensor mem = encode(random_grid(cfg, 1), random_grid(cfg, 2), p);
  const DecodeOutput out = decode(Tensor::matrix(0, 8), mem, p, DecoderRole::Track);
  EXPECT_TRUE(out.boxes.empty());
  EXPECT_EQ(out.class_probs.rows(), 0u);
  EXPECT_EQ(out.out_features.rows(), 0u);
}

TEST(Decode, BoxesInUnitRangeAndDeterministic) {
  ModelConfig cfg = tiny_config();
  cfg.init_scale = 3.0;
  const ModelParams p = init_params(cfg);
  const Tensor mem = encode(random_grid(cfg, 1), random_grid(cfg, 2), p);
  const DecodeOutput a = decode(p.object_queries, mem, p, DecoderRole::Detection);
  const DecodeOutput b = decode(p.object_queries, mem, init_params(cfg), DecoderRole::Detection);
  ASSERT_EQ(a.boxes.size(), 3u);
  for (const auto& box : a.boxes) {
    for (double v : {box.cx, box.cy, box.w, box.h}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(a.boxes, b.boxes);
  EXPECT_EQ(a.class_probs, b.class_probs);
  EXPECT_EQ(a.out_features, b.out_features);
}

TEST(GradCheck, LinearHeadMicroModel) {
  ModelConfig cfg = tiny_config();
  cfg.encoder_layers = 0;
  cfg.decoder_layers = 0;
  PairDatasetSpec ds = reference_pair_dataset(1, 5);
  ds.scene.grid_h = cfg.grid_h;
  ds.scene.grid_w = cfg.grid_w;
  const TrainingPair pair = to_training_pair(make_pair_scenes(ds).front());
  const GradCheckResult r = grad_check(init_params(cfg), pair, LossWeights{});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst_tensor << "[" << r.worst_index << "]";
  EXPECT_EQ(r.checked, parameter_count(init_params(cfg)));
}

TEST(GradCheck, ZeroLossHasFlatBoxHeads) {
  ModelConfig cfg = tiny_config();
  cfg.num_queries = 1;
  cfg.encoder_layers = 0;
  cfg.decoder_layers = 0;
  ModelParams p = init_params(cfg);
  for (DecoderWeights* d : {&p.det_decoder, &p.track_decoder}) {
    d->box_w.fill(0.0);
    d->box_b = Tensor({4}, std::vector<double>{0.2, -0.1, -1.0, -0.5});
    d->cls_w.fill(0.0);
    d->cls_b.fill(40.0);
  }
  const Tensor grid = random_grid(cfg, 3);
  const Tensor mem = encode(grid, grid, p);
  const CenterBox box = decode(p.object_queries, mem, p, DecoderRole::Detection).boxes.at(0);
  const TrainingPair pair{grid, grid, {{box, 0}}, {{box, 0}}, {1}, {1}};
  ModelParams grads = zero_params(cfg);
  const PairLoss l = pair_loss(p, pair, LossWeights{}, MatchingStrategy::Current, &grads);
  EXPECT_LT(l.loss, 1e-12);
  double norm = 0.0;
  for (const DecoderWeights* d : {&grads.det_decoder, &grads.track_decoder}) {
    for (const Tensor* t : {&d->box_w, &d->box_b}) {
      for (double v : t->values()) norm += v * v;
    }
  }
  EXPECT_LT(std::sqrt(norm), 1e-6);
}

std::vector<TrainingPair> small_dataset(const ModelConfig& cfg) {
  PairDatasetSpec ds = reference_pair_dataset(6, 2);
  ds.scene.grid_h = cfg.grid_h;
  ds.scene.grid_w = cfg.grid_w;
  return to_training_pairs(make_pair_scenes(ds));
}

TEST(Training, EpochZeroIsUntrainedLossAndReplayIsExact) {
  ModelConfig cfg = tiny_config();
  cfg.grid_h = 4;
  cfg.grid_w = 4;
  const auto data = small_dataset(cfg);
  TrainConfig tc;
  tc.epochs = 3;
  tc.optimizer = Optimizer::Adam;
  tc.learning_rate = 0.01;
  tc.batch_size = 2;
  const ModelParams init = init_params(cfg);
  const TrainResult a = train_toy(data, init, tc);
  const TrainResult b = train_toy(data, init, tc);
  ASSERT_EQ(a.history.size(), 4u);
  EXPECT_EQ(a.history[0], mean_loss(init, data, tc.weights, tc.strategy));
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.history.back(), mean_loss(a.params, data, tc.weights, tc.strategy));
}

TEST(Training, RejectsBadConfig) {
  const ModelConfig cfg = tiny_config();
  TrainConfig tc;
  EXPECT_THROW(train_toy({}, init_params(cfg), tc), std::invalid_argument);
  tc.batch_size = 0;
  EXPECT_THROW(train_toy(small_dataset(cfg), init_params(cfg), tc), std::invalid_argument);
}

TEST(Checkpoint, RoundTripAndBadMagic) {
  const ModelParams p = init_params(tiny_config());
  std::stringstream ss;
  save_checkpoint(ss, p);
  const ModelParams back = load_checkpoint(ss);
  EXPECT_EQ(back.config, p.config);
  EXPECT_EQ(back.embed, p.embed);
  EXPECT_EQ(back.track_decoder.cls_b, p.track_decoder.cls_b);

  std::string bytes = ss.str();
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  EXPECT_THROW(load_checkpoint(bad), std::runtime_error);
  std::istringstream cut(ss.str().substr(0, 40));
  EXPECT_THROW(load_checkpoint(cut), std::runtime_error);
}

TEST(FeatureGrids, RoundTrip) {
  const ModelConfig cfg = tiny_config();
  const std::vector<Tensor> frames{random_grid(cfg, 1), random_grid(cfg, 2)};
  std::stringstream ss;
  save_feature_grids(ss, frames);
  EXPECT_EQ(load_feature_grids(ss), frames);
  std::stringstream mixed;
  EXPECT_THROW(save_feature_grids(mixed, {frames[0], Tensor::matrix(2, 2)}), std::invalid_argument);
}

TEST(Provider, DetectsThroughNetwork) {
  ModelConfig cfg = tiny_config();
  cfg.grid_h = 8;
  cfg.grid_w = 8;
  const ModelParams p = init_params(cfg);
  synth::ScenarioSpec spec;
  spec.num_frames = 3;
  spec.id_channels = 4;
  const synth::Scenario sc = synth::generate(spec);
  ToyNetProvider prov(p, sc.features, spec.image());
  const auto dets = prov.detect(1);
  EXPECT_EQ(dets.size(), 3u);
  for (const auto& d : dets) EXPECT_EQ(d.feature.size(), 8u);
  EXPECT_THROW(prov.detect(4), std::out_of_range);
}

}  // namespace
}  // namespace transtrack::toynet
