#pragma once

#include <cstdint>
#include <vector>

#include "transtrack/metrics.hpp"
#include "transtrack/synth.hpp"
#include "transtrack/toynet.hpp"
#include "transtrack/tracker.hpp"

namespace transtrack::toynet {

/// Runs the network over a sequence of feature grids. Detections come from
/// the object queries, tracking boxes from the tracklets' stored features.
/// Frame 1 is encoded against itself.
class ToyNetProvider final : public Detector, public Propagator {
 public:
  ToyNetProvider(ModelParams params, std::vector<Tensor> features, ImageSize image);

  std::vector<Detection> detect(int frame) override;
  /// Tracklets without a feature of the model width keep their stored box.
  std::vector<TrackBox> propagate(int frame, std::span<const Tracklet> tracklets) override;

  [[nodiscard]] const ModelParams& params() const { return params_; }

 private:
  const Tensor& memory(int frame);

  ModelParams params_;
  std::vector<Tensor> features_;
  ImageSize image_;
  int cached_frame_ = 0;
  Tensor cached_memory_;
};

/// A static scene and its scaled/translated copy.
struct PairScene {
  synth::StaticFrame a;
  synth::StaticFrame b;
};

struct PairDatasetSpec {
  synth::ScenarioSpec scene;  // image, object sizes, grid; motion fields unused
  int count = 64;
  int min_objects = 1;
  int max_objects = 3;
  synth::PerturbRanges perturb{0.05, 12.0};
  std::uint64_t seed = 1;
};

/// The fixed training set: 1-3 objects 100-160 px wide, height/width 1.2-2.0,
/// on the default 640x480 image and 8x8 grid.
PairDatasetSpec reference_pair_dataset(int count = 192, std::uint64_t seed = 11);
/// Adam, step 0.002, batch 8, 400 epochs.
TrainConfig reference_train_config();

std::vector<PairScene> make_pair_scenes(const PairDatasetSpec& spec);
TrainingPair to_training_pair(const PairScene& scene);
std::vector<TrainingPair> to_training_pairs(const std::vector<PairScene>& scenes);

/// Tracks every scene as a two-frame sequence and sums the CLEAR counts.
MotReport evaluate_pairs(const ModelParams& params, const std::vector<PairScene>& scenes,
                         const TrackerConfig& cfg);

}  // namespace transtrack::toynet
