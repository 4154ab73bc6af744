#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "transtrack/geometry.hpp"
#include "transtrack/motion.hpp"

namespace transtrack {

/// Propagation state carried by a tracklet: nothing, a track-query feature
/// vector, or a Kalman state.
using Payload = std::variant<std::monostate, std::vector<double>, motion::KalmanState>;

enum class TrackState { Active, Inactive };

struct Tracklet {
  int id = 0;
  Box box;
  double score = 0.0;
  TrackState state = TrackState::Active;
  int inactive_count = 0;
  Payload payload;
};

enum class AssociationMode { Hungarian, Nms };

struct TrackerConfig {
  int rebirth_k = 32;
  double min_iou = 0.3;
  AssociationMode association = AssociationMode::Hungarian;
  double score_thresh = 0.5;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct Detection {
  Box box;
  double score = 0.0;
  std::vector<double> class_probs;
  std::vector<double> feature;
  int query_index = -1;  // output slot of the producing query, when known
};

struct TrackBox {
  int tracklet_id = 0;
  Box box;
  double score = 0.0;
  std::vector<double> feature;
  Payload payload;  // propagated state; monostate keeps the tracklet's own
};

struct OutputBox {
  int id = 0;
  Box box;
  double score = 0.0;

  friend bool operator==(const OutputBox&, const OutputBox&) = default;
};

struct FrameResult {
  int frame = 0;
  std::vector<OutputBox> boxes;  // ascending id
};

/// Produces detection boxes for a 1-based frame index.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(int frame) = 0;
};

/// Produces one tracking box per given tracklet, in the same order.
class Propagator {
 public:
  virtual ~Propagator() = default;
  virtual std::vector<TrackBox> propagate(int frame, std::span<const Tracklet> tracklets) = 0;
  /// Payload of a tracklet after it is matched to a detection. The default
  /// adopts the detection's feature when it has one.
  virtual Payload absorb(const Tracklet& tracklet, const Detection& det);
  /// Payload for a tracklet spawned from an unmatched detection.
  virtual Payload spawn(const Detection& det);
};

/// Joint detection-and-tracking state machine with track rebirth.
///
/// Unmatched tracklets stay Inactive with their last box frozen until they
/// have been unmatched for more than rebirth_k consecutive frames. Removed
/// ids are never reused.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg);

  /// One association step. Tracklets without an entry in track_boxes compete
  /// with their stored box. Throws std::logic_error if a track box refers to
  /// a tracklet that is not live.
  std::vector<OutputBox> step(std::span<const Detection> dets, std::span<const TrackBox> tracks,
                              Propagator* hooks = nullptr);

  /// Track-query-only variant: tracking boxes scoring at least score_thresh
  /// keep their tracklets alive, nothing new is ever spawned.
  std::vector<OutputBox> step_propagation_only(std::span<const TrackBox> tracks);

  /// Detection-only variant: identities follow the detection's query index.
  std::vector<OutputBox> step_by_index(std::span<const Detection> dets);

  [[nodiscard]] const std::vector<Tracklet>& tracklets() const { return tracklets_; }
  [[nodiscard]] std::vector<Tracklet> active_tracklets() const;
  [[nodiscard]] const TrackerConfig& config() const { return cfg_; }

 private:
  Tracklet& spawn(const Detection& det, Propagator* hooks);
  void miss(Tracklet& t);
  void activate(Tracklet& t, const Box& box, double score);
  std::vector<OutputBox> finish_frame();
  std::vector<Detection> confident(std::span<const Detection> dets) const;

  TrackerConfig cfg_;
  std::vector<Tracklet> tracklets_;  // ascending id
  int next_id_ = 1;
  std::map<int, int> slot_to_id_;
};

enum class QueryMode { Both, ObjectOnly, TrackOnly };

/// Runs frames 1..num_frames. Frame 1 is detection only; every later frame
/// propagates the Active tracklets, detects, and associates. Inactive
/// tracklets keep their frozen box. Provider errors are rethrown as
/// std::runtime_error naming the frame.
std::vector<FrameResult> run_sequence(int num_frames, Detector& detector, Propagator& propagator,
                                      const TrackerConfig& cfg, QueryMode mode = QueryMode::Both);

/// Propagator that returns each tracklet's stored box unchanged.
class FrozenBoxPropagator final : public Propagator {
 public:
  std::vector<TrackBox> propagate(int frame, std::span<const Tracklet> tracklets) override;
};

/// Constant-velocity Kalman propagation of each tracklet's box.
class KalmanPropagator final : public Propagator {
 public:
  explicit KalmanPropagator(motion::KalmanConfig cfg = {}) : cfg_(cfg) {}
  std::vector<TrackBox> propagate(int frame, std::span<const Tracklet> tracklets) override;
  Payload absorb(const Tracklet& tracklet, const Detection& det) override;
  Payload spawn(const Detection& det) override;

 private:
  motion::KalmanConfig cfg_;
};

}  // namespace transtrack
