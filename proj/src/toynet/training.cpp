#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "internal.hpp"
#include "transtrack/kernels.hpp"

namespace transtrack::toynet {
namespace {

struct TrackQueries {
  Tensor queries;        // n x d
  std::vector<int> ids;  // source object id per query
};

/// Frame A through the detection decoder; matched out_features become track
/// queries, in ascending prediction index.
TrackQueries make_track_queries(const ModelParams& p, const TrainingPair& pair,
                                const LossWeights& w) {
  const Tensor mem = encode(pair.feat_a, pair.feat_a, p);
  const DecodeOutput out = decode(p.object_queries, mem, p, DecoderRole::Detection);
  const auto preds = to_predictions(out);
  const Assignment a = optimal_match(preds, pair.gt_a, w);
  const auto d = static_cast<std::size_t>(p.config.d_model);
  TrackQueries tq;
  tq.queries = Tensor::matrix(a.pairs.size(), d);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    const auto [row, col] = a.pairs[i];
    std::copy_n(out.out_features.row(row).begin(), d, tq.queries.row(i).begin());
    tq.ids.push_back(pair.ids_a.at(col));
  }
  return tq;
}

Assignment inherit_matching(const std::vector<int>& query_ids, const std::vector<int>& ids_b) {
  Assignment a;
  std::vector<char> used(ids_b.size(), 0);
  for (std::size_t i = 0; i < query_ids.size(); ++i) {
    bool found = false;
    for (std::size_t j = 0; j < ids_b.size(); ++j) {
      if (!used[j] && ids_b[j] == query_ids[i]) {
        a.pairs.emplace_back(i, j);
        used[j] = 1;
        found = true;
        break;
      }
    }
    if (!found) a.unmatched_rows.push_back(i);
  }
  for (std::size_t j = 0; j < ids_b.size(); ++j) {
    if (!used[j]) a.unmatched_cols.push_back(j);
  }
  return a;
}

struct Matchings {
  std::optional<Assignment> det;
  std::optional<Assignment> track;
};

void gradient_tensors(const SetLossResult& r, std::size_t classes, Tensor& d_box, Tensor& d_prob) {
  const std::size_t n = r.box_grad.size();
  d_box = Tensor::matrix(n, 4);
  d_prob = Tensor::matrix(n, classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 4; ++k) d_box(i, k) = r.box_grad[i][k];
    for (std::size_t c = 0; c < classes; ++c) d_prob(i, c) = r.prob_grad[i][c];
  }
}

/// Frame-B loss with the track queries given. Empty matchings are filled in
/// (optimal for detection, per strategy for tracking) and reported back.
PairLoss frame_b_loss(const ModelParams& p, const TrainingPair& pair, const LossWeights& w,
                      MatchingStrategy strategy, const TrackQueries& tq, Matchings& m,
                      ModelParams* grads) {
  EncodeCache ecache;
  DecodeCache det_cache;
  DecodeCache track_cache;
  const bool want_grad = grads != nullptr;
  const Tensor mem = encode(pair.feat_b, pair.feat_a, p, want_grad ? &ecache : nullptr);

  const DecodeOutput det_out =
      decode(p.object_queries, mem, p, DecoderRole::Detection, want_grad ? &det_cache : nullptr);
  const auto det_preds = to_predictions(det_out);
  if (!m.det) m.det = optimal_match(det_preds, pair.gt_b, w);
  const SetLossResult det_r = set_loss_for_matching(det_preds, pair.gt_b, w, *m.det);

  PairLoss out;
  out.det_loss = det_r.loss;

  std::optional<SetLossResult> track_r;
  if (tq.queries.rows() > 0) {
    const DecodeOutput tr_out =
        decode(tq.queries, mem, p, DecoderRole::Track, want_grad ? &track_cache : nullptr);
    const auto tr_preds = to_predictions(tr_out);
    if (!m.track) {
      m.track = strategy == MatchingStrategy::Current ? optimal_match(tr_preds, pair.gt_b, w)
                                                      : inherit_matching(tq.ids, pair.ids_b);
    }
    track_r = set_loss_for_matching(tr_preds, pair.gt_b, w, *m.track);
    out.track_loss = track_r->loss;
  }
  out.loss = out.det_loss + out.track_loss;
  if (!std::isfinite(out.loss)) throw std::runtime_error("pair loss is not finite");
  if (!want_grad) return out;

  const auto classes = static_cast<std::size_t>(p.config.classes);
  Tensor d_box, d_prob;
  gradient_tensors(det_r, classes, d_box, d_prob);
  auto [dq, d_mem] = decode_backward(p, DecoderRole::Detection, det_cache, d_box, d_prob, *grads);
  add_inplace(grads->object_queries, dq);
  if (d_mem.empty()) d_mem = Tensor::matrix(mem.rows(), mem.cols());
  if (track_r) {
    gradient_tensors(*track_r, classes, d_box, d_prob);
    auto [dq_track, d_mem_track] =
        decode_backward(p, DecoderRole::Track, track_cache, d_box, d_prob, *grads);
    if (!d_mem_track.empty()) add_inplace(d_mem, d_mem_track);
  }
  encode_backward(p, ecache, d_mem, *grads);
  return out;
}

void add_scaled(ModelParams& dst, const ModelParams& src, double alpha) {
  std::vector<const Tensor*> from;
  for_each_tensor(src, [&](const std::string&, const Tensor& t) { from.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(dst, [&](const std::string&, Tensor& t) {
    kernels::axpy(t.values(), alpha, from[i++]->values());
  });
}

double squared_norm(const ModelParams& g) {
  double s = 0.0;
  for_each_tensor(g, [&](const std::string&, const Tensor& t) {
    s += kernels::dot(t.values(), t.values());
  });
  return s;
}

}  // namespace

PairLoss pair_loss(const ModelParams& p, const TrainingPair& pair, const LossWeights& w,
                   MatchingStrategy strategy, ModelParams* grads) {
  const TrackQueries tq = make_track_queries(p, pair, w);
  Matchings m;
  return frame_b_loss(p, pair, w, strategy, tq, m, grads);
}

GradCheckResult grad_check(const ModelParams& p, const TrainingPair& pair, const LossWeights& w,
                           double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("grad_check epsilon must be positive");
  const TrackQueries tq = make_track_queries(p, pair, w);
  Matchings m;
  ModelParams grads = zero_params(p.config);
  frame_b_loss(p, pair, w, MatchingStrategy::Current, tq, m, &grads);

  std::vector<const Tensor*> analytic;
  for_each_tensor(grads, [&](const std::string&, const Tensor& t) { analytic.push_back(&t); });

  ModelParams probe = p;
  GradCheckResult res;
  std::size_t ti = 0;
  for_each_tensor(probe, [&](const std::string& name, Tensor& t) {
    const Tensor& g = *analytic[ti++];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t.values()[i];
      t.values()[i] = orig + epsilon;
      const double up = frame_b_loss(probe, pair, w, MatchingStrategy::Current, tq, m, nullptr).loss;
      t.values()[i] = orig - epsilon;
      const double down =
          frame_b_loss(probe, pair, w, MatchingStrategy::Current, tq, m, nullptr).loss;
      t.values()[i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = g.values()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++res.checked;
      if (rel > res.max_rel_error || res.worst_tensor.empty()) {
        res.max_rel_error = std::max(res.max_rel_error, rel);
        res.worst_tensor = name;
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
  });
  return res;
}

double mean_loss(const ModelParams& p, const std::vector<TrainingPair>& data,
                 const LossWeights& w, MatchingStrategy strategy) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  double sum = 0.0;
  for (const auto& pair : data) sum += pair_loss(p, pair, w, strategy).loss;
  return sum / static_cast<double>(data.size());
}

TrainResult train_toy(const std::vector<TrainingPair>& data, ModelParams init,
                      const TrainConfig& cfg,
                      const std::function<void(int, double, const ModelParams&)>& on_epoch) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  cfg.weights.validate();

  TrainResult res;
  res.params = std::move(init);
  ModelParams& p = res.params;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  auto check = [](int epoch, double loss) {
    if (!std::isfinite(loss)) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                               ": loss is not finite");
    }
  };

  // Adam moments, flat in for_each_tensor order.
  std::vector<std::vector<double>> m1, m2;
  if (cfg.optimizer == Optimizer::Adam) {
    for_each_tensor(p, [&](const std::string&, const Tensor& t) {
      m1.emplace_back(t.size(), 0.0);
      m2.emplace_back(t.size(), 0.0);
    });
  }
  long step_count = 0;

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const double loss = mean_loss(p, data, cfg.weights, cfg.strategy);
    check(epoch, loss);
    res.history.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss, p);
    if (epoch == cfg.epochs) break;
    for (std::size_t start = 0; start < data.size(); start += batch) {
      const std::size_t end = std::min(data.size(), start + batch);
      ModelParams grads = zero_params(p.config);
      for (std::size_t i = start; i < end; ++i) {
        pair_loss(p, data[i], cfg.weights, cfg.strategy, &grads);
      }
      double scale = 1.0 / static_cast<double>(end - start);
      if (cfg.clip_norm > 0.0) {
        const double norm = std::sqrt(squared_norm(grads)) * scale;
        check(epoch, norm);
        if (norm > cfg.clip_norm) scale *= cfg.clip_norm / norm;
      }
      if (cfg.optimizer == Optimizer::Gd) {
        add_scaled(p, grads, -cfg.learning_rate * scale);
        continue;
      }
      ++step_count;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
      std::vector<const Tensor*> g;
      for_each_tensor(grads, [&](const std::string&, const Tensor& t) { g.push_back(&t); });
      std::size_t ti = 0;
      for_each_tensor(p, [&](const std::string&, Tensor& t) {
        auto& a = m1[ti];
        auto& b = m2[ti];
        const auto& gv = g[ti]->values();
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double gi = gv[i] * scale;
          a[i] = cfg.beta1 * a[i] + (1.0 - cfg.beta1) * gi;
          b[i] = cfg.beta2 * b[i] + (1.0 - cfg.beta2) * gi * gi;
          t.values()[i] -= cfg.learning_rate * (a[i] / c1) / (std::sqrt(b[i] / c2) + cfg.adam_eps);
        }
        ++ti;
      });
    }
  }
  return res;
}

}  // namespace transtrack::toynet
