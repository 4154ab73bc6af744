#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "transtrack/annotations.hpp"
#include "transtrack/kv_config.hpp"
#include "transtrack/tensor.hpp"
#include "transtrack/tracker.hpp"

namespace transtrack::synth {

/// SplitMix64 (Steele, Lea, Flood 2014). State advances by 0x9E3779B97F4A7C15;
/// output mix uses 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB with shifts
/// 30, 27, 31. Doubles take the top 53 bits. Normals use Box-Muller with the
/// cosine branch only, so each normal consumes exactly two uniforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Independent stream derived from this seed and a key, state untouched.
  [[nodiscard]] static std::uint64_t mix(std::uint64_t seed, std::uint64_t key);

 private:
  std::uint64_t state_;
};

enum class MotionKind { Linear, Sinusoidal };

struct Occlusion {
  int object = 1;  // 1-based object id
  int first = 1;   // inclusive frame range
  int last = 1;
};

struct ScenarioSpec {
  double image_width = 640.0;
  double image_height = 480.0;
  int num_frames = 50;
  int num_objects = 4;
  std::vector<int> births;  // per object, inclusive first frame (default 1)
  std::vector<int> deaths;  // per object, inclusive last frame (default num_frames)
  MotionKind motion = MotionKind::Linear;
  double min_speed = 1.0;  // px / frame
  double max_speed = 4.0;
  double sine_amplitude = 20.0;  // px, perpendicular to the heading
  double sine_period = 30.0;     // frames
  double min_width = 50.0;
  double max_width = 90.0;
  double min_aspect = 1.5;  // height / width
  double max_aspect = 2.5;
  double center_noise = 0.0;  // detection jitter std, px
  double size_noise = 0.0;
  double miss_prob = 0.0;
  std::vector<Occlusion> occlusions;
  int grid_h = 8;
  int grid_w = 8;
  int id_channels = 4;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument.
  void validate() const;
  [[nodiscard]] ImageSize image() const { return {image_width, image_height}; }
};

ScenarioSpec spec_from_config(KvConfig& cfg);
std::string spec_to_text(const ScenarioSpec& spec);

/// Layout of the feature grid channels.
struct FeatureLayout {
  int id_channels = 4;
  static constexpr int kOccupancy = 0;
  static constexpr int kCx = 1;
  static constexpr int kCy = 2;
  static constexpr int kW = 3;
  static constexpr int kH = 4;
  static constexpr int kIdBase = 5;
  [[nodiscard]] int coord_x() const { return kIdBase + id_channels; }
  [[nodiscard]] int coord_y() const { return kIdBase + id_channels + 1; }
  [[nodiscard]] int channels() const { return kIdBase + id_channels + 2; }
};

struct GridSpec {
  int height = 8;
  int width = 8;
  int id_channels = 4;
  std::uint64_t identity_seed = 1;  // keys the per-object identity codes
};

/// Paints a [H, W, C] grid. Each object contributes an anisotropic Gaussian
/// footprint g centred on its box (std = half the box extent plus half a
/// cell). Channel 0 is the summed footprint; the attribute channels (box
/// centre, size, identity code) hold the footprint-weighted mean attribute
/// faded towards 0 where the footprint sum drops below 0.1; the last two
/// channels are the cell-centre coordinates.
Tensor render_features(std::span<const Annotation> objects, ImageSize image, const GridSpec& grid);

struct Scenario {
  ScenarioSpec spec;
  Sequence gt;
  Sequence dets;
  std::vector<Tensor> features;  // one grid per frame, index = frame - 1
};

/// Deterministic given spec.seed. Random draws happen in a fixed order: per
/// object (size, aspect, start x, start y, heading, speed, sine phase), then
/// per frame and per live object in id order (miss, dx, dy, dw, dh, conf).
Scenario generate(const ScenarioSpec& spec);

struct StaticFrame {
  ImageSize image;
  std::vector<Annotation> objects;
  Tensor features;
};

struct PerturbRanges {
  double scale = 0.0;      // scale drawn from [1 - scale, 1 + scale]
  double translate = 0.0;  // px, drawn from [-translate, translate] per axis
};

struct Transform2D {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

/// Draws one transform from the ranges (scale, then tx, then ty).
Transform2D draw_transform(const PerturbRanges& ranges, std::uint64_t seed);

/// Applies one scale (about the image centre) plus translation to every box,
/// clips to the image, drops boxes clipped to nothing, and re-renders the
/// feature grid of the transformed scene with the input grid's shape.
StaticFrame perturb_static(const StaticFrame& frame, const Transform2D& t, const GridSpec& grid);
StaticFrame perturb_static(const StaticFrame& frame, const PerturbRanges& ranges,
                           std::uint64_t seed, const GridSpec& grid);

/// Keeps frames 1, 1 + stride, 1 + 2 stride, ... and renumbers them densely.
Sequence skip_sample(const Sequence& seq, int stride);
std::vector<Tensor> skip_sample(const std::vector<Tensor>& frames, int stride);
Scenario skip_sample(const Scenario& sc, int stride);

/// Coarse image regions standing in for detection-query slots: a detection's
/// query index is the row-major index of the cell holding its box centre.
struct QuerySlots {
  ImageSize image;
  int cols = 0;  // 0 disables slot assignment
  int rows = 0;
};

/// Detector and propagator that read boxes straight from the GT.
/// The propagator finds, for each tracklet, the GT object whose box in the
/// previous frame best overlaps the tracklet's box and returns that object's
/// current box.
class OracleProvider final : public Detector, public Propagator {
 public:
  explicit OracleProvider(Sequence gt, bool visible_only = true, QuerySlots slots = {});
  std::vector<Detection> detect(int frame) override;
  std::vector<TrackBox> propagate(int frame, std::span<const Tracklet> tracklets) override;

 private:
  [[nodiscard]] std::vector<Annotation> frame_objects(int frame) const;
  Sequence gt_;
  bool visible_only_;
  QuerySlots slots_;
};

/// Largest pairwise IoU between GT boxes of the same frame.
double max_pairwise_gt_iou(const Sequence& gt);

/// Largest IoU between boxes of two different objects, in the same frame or
/// in consecutive frames of the sequence.
double max_cross_object_iou(const Sequence& gt);

/// Linear-motion scene used for the motion-model and association ablations:
/// 80 frames, 10 objects at 2-6 px per frame, 1 px detection jitter.
ScenarioSpec ablation_scenario(std::uint64_t seed);

}  // namespace transtrack::synth
