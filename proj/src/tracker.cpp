#include "transtrack/tracker.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "transtrack/assignment.hpp"

namespace transtrack {

void TrackerConfig::validate() const {
  if (rebirth_k < 0) throw std::invalid_argument("rebirth_k must be >= 0");
  if (min_iou < 0.0 || min_iou > 1.0) throw std::invalid_argument("min_iou must be in [0, 1]");
  if (score_thresh < 0.0 || score_thresh > 1.0) {
    throw std::invalid_argument("score_thresh must be in [0, 1]");
  }
}

Payload Propagator::absorb(const Tracklet& tracklet, const Detection& det) {
  if (!det.feature.empty()) return det.feature;
  return tracklet.payload;
}

Payload Propagator::spawn(const Detection& det) {
  if (!det.feature.empty()) return det.feature;
  return std::monostate{};
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<Tracklet> Tracker::active_tracklets() const {
  std::vector<Tracklet> out;
  for (const auto& t : tracklets_) {
    if (t.state == TrackState::Active) out.push_back(t);
  }
  return out;
}

std::vector<Detection> Tracker::confident(std::span<const Detection> dets) const {
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.score >= cfg_.score_thresh) out.push_back(d);
  }
  return out;
}

Tracklet& Tracker::spawn(const Detection& det, Propagator* hooks) {
  Tracklet t;
  t.id = next_id_++;
  t.box = det.box;
  t.score = det.score;
  t.payload = hooks != nullptr ? hooks->spawn(det) : FrozenBoxPropagator{}.spawn(det);
  tracklets_.push_back(std::move(t));
  return tracklets_.back();
}

void Tracker::activate(Tracklet& t, const Box& box, double score) {
  t.box = box;
  t.score = score;
  t.state = TrackState::Active;
  t.inactive_count = 0;
}

void Tracker::miss(Tracklet& t) {
  t.state = TrackState::Inactive;
  ++t.inactive_count;
}

std::vector<OutputBox> Tracker::finish_frame() {
  std::erase_if(tracklets_, [&](const Tracklet& t) { return t.inactive_count > cfg_.rebirth_k; });
  std::vector<OutputBox> out;
  for (const auto& t : tracklets_) {
    if (t.state == TrackState::Active) out.push_back({t.id, t.box, t.score});
  }
  return out;
}

std::vector<OutputBox> Tracker::step(std::span<const Detection> all_dets,
                                     std::span<const TrackBox> tracks, Propagator* hooks) {
  const std::vector<Detection> dets = confident(all_dets);
  FrozenBoxPropagator default_hooks;
  Propagator& h = hooks != nullptr ? *hooks : default_hooks;

  std::unordered_map<int, std::size_t> index_of;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) index_of[tracklets_[i].id] = i;

  // Candidate box per live tracklet, in tracklet order.
  const std::size_t n_tracks = tracklets_.size();
  std::vector<Box> cand_box(n_tracks);
  std::vector<double> cand_score(n_tracks);
  for (std::size_t i = 0; i < n_tracks; ++i) {
    cand_box[i] = tracklets_[i].box;
    cand_score[i] = tracklets_[i].score;
  }
  for (const auto& tb : tracks) {
    const auto it = index_of.find(tb.tracklet_id);
    if (it == index_of.end()) {
      throw std::logic_error("track box refers to tracklet " + std::to_string(tb.tracklet_id) +
                             " which is not live");
    }
    cand_box[it->second] = tb.box;
    cand_score[it->second] = tb.score;
    if (!std::holds_alternative<std::monostate>(tb.payload)) {
      tracklets_[it->second].payload = tb.payload;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (det, tracklet)
  std::vector<char> det_spawns(dets.size(), 0);
  std::vector<Box> det_boxes;
  det_boxes.reserve(dets.size());
  for (const auto& d : dets) det_boxes.push_back(d.box);

  if (cfg_.association == AssociationMode::Hungarian) {
    const Assignment a = match_by_iou(det_boxes, cand_box, cfg_.min_iou);
    pairs = a.pairs;
    for (const std::size_t r : a.unmatched_rows) det_spawns[r] = 1;
  } else {
    // Pool tracking boxes [0, n_tracks) and detections [n_tracks, ...).
    std::vector<ScoredBox> pool;
    pool.reserve(n_tracks + dets.size());
    for (std::size_t i = 0; i < n_tracks; ++i) pool.push_back({cand_box[i], cand_score[i]});
    for (const auto& d : dets) pool.push_back({d.box, d.score});
    const NmsResult nms = nms_with_suppressors(pool, cfg_.min_iou);
    std::vector<char> track_paired(n_tracks, 0), det_paired(dets.size(), 0);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pool[a].score > pool[b].score; });
    for (const std::size_t idx : order) {
      const std::ptrdiff_t by = nms.suppressed_by[idx];
      if (by < 0) continue;
      const auto k = static_cast<std::size_t>(by);
      const bool idx_is_track = idx < n_tracks;
      const bool k_is_track = k < n_tracks;
      if (idx_is_track == k_is_track) continue;
      const std::size_t t = idx_is_track ? idx : k;
      const std::size_t d = (idx_is_track ? k : idx) - n_tracks;
      if (track_paired[t] || det_paired[d]) continue;
      track_paired[t] = det_paired[d] = 1;
      pairs.emplace_back(d, t);
    }
    for (const std::size_t k : nms.kept) {
      if (k >= n_tracks && !det_paired[k - n_tracks]) det_spawns[k - n_tracks] = 1;
    }
    std::sort(pairs.begin(), pairs.end());
  }

  std::vector<char> matched(n_tracks, 0);
  for (const auto& [d, t] : pairs) {
    matched[t] = 1;
    Tracklet& tr = tracklets_[t];
    tr.payload = h.absorb(tr, dets[d]);
    activate(tr, dets[d].box, dets[d].score);
  }
  for (std::size_t t = 0; t < n_tracks; ++t) {
    if (!matched[t]) miss(tracklets_[t]);
  }
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (det_spawns[d]) spawn(dets[d], &h);
  }
  return finish_frame();
}

std::vector<OutputBox> Tracker::step_propagation_only(std::span<const TrackBox> tracks) {
  std::unordered_map<int, std::size_t> index_of;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) index_of[tracklets_[i].id] = i;
  std::vector<char> matched(tracklets_.size(), 0);
  for (const auto& tb : tracks) {
    const auto it = index_of.find(tb.tracklet_id);
    if (it == index_of.end()) {
      throw std::logic_error("track box refers to tracklet " + std::to_string(tb.tracklet_id) +
                             " which is not live");
    }
    Tracklet& t = tracklets_[it->second];
    if (!std::holds_alternative<std::monostate>(tb.payload)) t.payload = tb.payload;
    if (tb.score >= cfg_.score_thresh) {
      if (!tb.feature.empty()) t.payload = tb.feature;
      activate(t, tb.box, tb.score);
      matched[it->second] = 1;
    }
  }
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    if (!matched[i]) miss(tracklets_[i]);
  }
  return finish_frame();
}

std::vector<OutputBox> Tracker::step_by_index(std::span<const Detection> all_dets) {
  const std::vector<Detection> dets = confident(all_dets);
  std::unordered_map<int, std::size_t> index_of;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) index_of[tracklets_[i].id] = i;
  std::vector<char> matched(tracklets_.size(), 0);
  std::vector<const Detection*> spawn_list;
  for (const auto& d : dets) {
    const auto slot = slot_to_id_.find(d.query_index);
    if (slot != slot_to_id_.end()) {
      const auto it = index_of.find(slot->second);
      if (it != index_of.end() && !matched[it->second]) {
        Tracklet& t = tracklets_[it->second];
        t.payload = FrozenBoxPropagator{}.absorb(t, d);
        activate(t, d.box, d.score);
        matched[it->second] = 1;
        continue;
      }
    }
    spawn_list.push_back(&d);
  }
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    if (!matched[i]) miss(tracklets_[i]);
  }
  for (const Detection* d : spawn_list) {
    const int id = spawn(*d, nullptr).id;
    if (d->query_index >= 0) slot_to_id_[d->query_index] = id;
  }
  return finish_frame();
}

std::vector<FrameResult> run_sequence(int num_frames, Detector& detector, Propagator& propagator,
                                      const TrackerConfig& cfg, QueryMode mode) {
  Tracker tracker(cfg);
  std::vector<FrameResult> out;
  out.reserve(static_cast<std::size_t>(std::max(0, num_frames)));
  for (int frame = 1; frame <= num_frames; ++frame) {
    try {
      FrameResult fr;
      fr.frame = frame;
      if (frame == 1) {
        const auto dets = detector.detect(frame);
        fr.boxes = mode == QueryMode::ObjectOnly ? tracker.step_by_index(dets)
                                                 : tracker.step(dets, {}, &propagator);
      } else if (mode == QueryMode::ObjectOnly) {
        fr.boxes = tracker.step_by_index(detector.detect(frame));
      } else {
        const auto active = tracker.active_tracklets();
        const auto tracks = propagator.propagate(frame, active);
        if (tracks.size() != active.size()) {
          throw std::runtime_error("propagator returned " + std::to_string(tracks.size()) +
                                   " boxes for " + std::to_string(active.size()) + " tracklets");
        }
        if (mode == QueryMode::TrackOnly) {
          fr.boxes = tracker.step_propagation_only(tracks);
        } else {
          fr.boxes = tracker.step(detector.detect(frame), tracks, &propagator);
        }
      }
      out.push_back(std::move(fr));
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(frame) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TrackBox> FrozenBoxPropagator::propagate(int /*frame*/,
                                                     std::span<const Tracklet> tracklets) {
  std::vector<TrackBox> out;
  out.reserve(tracklets.size());
  for (const auto& t : tracklets) {
    out.push_back({t.id, motion::propagate_none(t.box), t.score, {}, {}});
  }
  return out;
}

std::vector<TrackBox> KalmanPropagator::propagate(int /*frame*/,
                                                  std::span<const Tracklet> tracklets) {
  std::vector<TrackBox> out;
  out.reserve(tracklets.size());
  for (const auto& t : tracklets) {
    const auto* state = std::get_if<motion::KalmanState>(&t.payload);
    const motion::KalmanState predicted =
        motion::kf_predict(state != nullptr ? *state : motion::kf_init(t.box, cfg_), cfg_);
    out.push_back({t.id, motion::state_box(predicted), t.score, {}, predicted});
  }
  return out;
}

Payload KalmanPropagator::absorb(const Tracklet& tracklet, const Detection& det) {
  if (const auto* state = std::get_if<motion::KalmanState>(&tracklet.payload)) {
    return motion::kf_update(*state, det.box, cfg_);
  }
  return motion::kf_init(det.box, cfg_);
}

Payload KalmanPropagator::spawn(const Detection& det) { return motion::kf_init(det.box, cfg_); }

}  // namespace transtrack
