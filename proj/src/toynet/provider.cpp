#include "transtrack/toynet_provider.hpp"

#include <algorithm>
#include <stdexcept>

#include "transtrack/mot_io.hpp"

namespace transtrack::toynet {

ToyNetProvider::ToyNetProvider(ModelParams params, std::vector<Tensor> features, ImageSize image)
    : params_(std::move(params)), features_(std::move(features)), image_(image) {}

const Tensor& ToyNetProvider::memory(int frame) {
  if (frame < 1 || static_cast<std::size_t>(frame) > features_.size()) {
    throw std::out_of_range("no feature grid for frame " + std::to_string(frame));
  }
  if (cached_frame_ != frame) {
    const auto i = static_cast<std::size_t>(frame - 1);
    cached_memory_ = encode(features_[i], features_[i == 0 ? 0 : i - 1], params_);
    cached_frame_ = frame;
  }
  return cached_memory_;
}

std::vector<Detection> ToyNetProvider::detect(int frame) {
  const DecodeOutput out =
      decode(params_.object_queries, memory(frame), params_, DecoderRole::Detection);
  std::vector<Detection> dets;
  dets.reserve(out.boxes.size());
  for (std::size_t i = 0; i < out.boxes.size(); ++i) {
    Detection d;
    d.box = Box::from_center(out.boxes[i], image_);
    const auto probs = out.class_probs.row(i);
    d.class_probs.assign(probs.begin(), probs.end());
    d.score = *std::max_element(probs.begin(), probs.end());
    const auto feat = out.out_features.row(i);
    d.feature.assign(feat.begin(), feat.end());
    d.query_index = static_cast<int>(i);
    dets.push_back(std::move(d));
  }
  return dets;
}

std::vector<TrackBox> ToyNetProvider::propagate(int frame, std::span<const Tracklet> tracklets) {
  const auto d = static_cast<std::size_t>(params_.config.d_model);
  std::vector<TrackBox> out;
  out.reserve(tracklets.size());
  std::vector<std::size_t> with_query;
  for (const auto& t : tracklets) {
    out.push_back({t.id, t.box, t.score, {}, {}});
    const auto* f = std::get_if<std::vector<double>>(&t.payload);
    if (f != nullptr && f->size() == d) with_query.push_back(out.size() - 1);
  }
  if (with_query.empty()) return out;

  Tensor queries = Tensor::matrix(with_query.size(), d);
  for (std::size_t r = 0; r < with_query.size(); ++r) {
    const auto& f = std::get<std::vector<double>>(tracklets[with_query[r]].payload);
    std::copy(f.begin(), f.end(), queries.row(r).begin());
  }
  const DecodeOutput dec = decode(queries, memory(frame), params_, DecoderRole::Track);
  for (std::size_t r = 0; r < with_query.size(); ++r) {
    TrackBox& tb = out[with_query[r]];
    tb.box = Box::from_center(dec.boxes[r], image_);
    const auto probs = dec.class_probs.row(r);
    tb.score = *std::max_element(probs.begin(), probs.end());
    const auto feat = dec.out_features.row(r);
    tb.feature.assign(feat.begin(), feat.end());
  }
  return out;
}

PairDatasetSpec reference_pair_dataset(int count, std::uint64_t seed) {
  PairDatasetSpec spec;
  spec.scene.min_width = 100.0;
  spec.scene.max_width = 160.0;
  spec.scene.min_aspect = 1.2;
  spec.scene.max_aspect = 2.0;
  spec.count = count;
  spec.seed = seed;
  return spec;
}

TrainConfig reference_train_config() {
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.optimizer = Optimizer::Adam;
  cfg.learning_rate = 0.002;
  cfg.batch_size = 8;
  return cfg;
}

std::vector<PairScene> make_pair_scenes(const PairDatasetSpec& spec) {
  if (spec.count < 0) throw std::invalid_argument("pair count must be >= 0");
  if (spec.min_objects < 0 || spec.max_objects < spec.min_objects) {
    throw std::invalid_argument("object count range invalid");
  }
  std::vector<PairScene> scenes;
  scenes.reserve(static_cast<std::size_t>(spec.count));
  synth::SplitMix64 counts(synth::SplitMix64::mix(spec.seed, 0));
  const auto span = static_cast<std::uint64_t>(spec.max_objects - spec.min_objects + 1);
  for (int i = 0; i < spec.count; ++i) {
    synth::ScenarioSpec s = spec.scene;
    s.num_frames = 1;
    s.num_objects = spec.min_objects + static_cast<int>(counts.next() % span);
    s.births.clear();
    s.deaths.clear();
    s.occlusions.clear();
    s.center_noise = 0.0;
    s.size_noise = 0.0;
    s.miss_prob = 0.0;
    s.seed = synth::SplitMix64::mix(spec.seed, static_cast<std::uint64_t>(i) + 1);
    const synth::Scenario sc = synth::generate(s);
    const synth::GridSpec grid{s.grid_h, s.grid_w, s.id_channels, s.seed};
    PairScene scene;
    scene.a.image = s.image();
    if (!sc.gt.empty()) scene.a.objects = sc.gt.front().entries;
    scene.a.features = sc.features.front();
    scene.b = synth::perturb_static(scene.a, spec.perturb, synth::SplitMix64::mix(s.seed, 7), grid);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

TrainingPair to_training_pair(const PairScene& scene) {
  TrainingPair p;
  p.feat_a = scene.a.features;
  p.feat_b = scene.b.features;
  for (const auto& o : scene.a.objects) {
    p.gt_a.push_back({o.box.to_center(scene.a.image), 0});
    p.ids_a.push_back(o.id);
  }
  for (const auto& o : scene.b.objects) {
    p.gt_b.push_back({o.box.to_center(scene.b.image), 0});
    p.ids_b.push_back(o.id);
  }
  return p;
}

std::vector<TrainingPair> to_training_pairs(const std::vector<PairScene>& scenes) {
  std::vector<TrainingPair> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(to_training_pair(s));
  return out;
}

MotReport evaluate_pairs(const ModelParams& params, const std::vector<PairScene>& scenes,
                         const TrackerConfig& cfg) {
  std::vector<MotReport> parts;
  parts.reserve(scenes.size());
  for (const auto& scene : scenes) {
    ToyNetProvider provider(params, {scene.a.features, scene.b.features}, scene.a.image);
    const auto results = run_sequence(2, provider, provider, cfg);
    Sequence gt;
    if (!scene.a.objects.empty()) gt.push_back({1, scene.a.objects});
    if (!scene.b.objects.empty()) gt.push_back({2, scene.b.objects});
    if (gt.empty() || gt.back().frame != 2) gt.push_back({2, {}});
    parts.push_back(evaluate(gt, io::to_sequence(results)));
  }
  return merge_reports(parts);
}

}  // namespace transtrack::toynet
