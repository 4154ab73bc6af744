#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "transtrack/kv_config.hpp"
#include "transtrack/metrics.hpp"
#include "transtrack/mot_io.hpp"
#include "transtrack/synth.hpp"
#include "transtrack/toynet.hpp"
#include "transtrack/toynet_provider.hpp"
#include "transtrack/tracker.hpp"

namespace transtrack::cli {
namespace {

using toynet::ModelConfig;
using toynet::ModelParams;

/// Bad flags, bad config values, inconsistent inputs. Exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kConfigEnv = "TRANSTRACK_CONFIG";

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* app, ConfigArgs& a, const std::string& what) {
  app->add_option("-c,--config", a.path, what);
  app->add_option("-s,--set", a.sets, "Override one entry, key=value (repeatable)");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

/// File entries first, then --set entries, then dedicated flags.
KvConfig load_config(const ConfigArgs& a, bool use_env) {
  std::string path = a.path;
  if (path.empty() && use_env) {
    if (const char* env = std::getenv(kConfigEnv); env != nullptr) path = env;
  }
  KvConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    cfg = KvConfig::parse(in);
  }
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || trim(kv.substr(0, eq)).empty()) {
      throw UsageError("--set expects key=value, got '" + kv + "'");
    }
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return cfg;
}

void set_if(KvConfig& cfg, const std::string& key, const std::string& value) {
  if (!value.empty()) cfg.set(key, value);
}

AssociationMode parse_association(const std::string& s) {
  if (s == "hungarian") return AssociationMode::Hungarian;
  if (s == "nms") return AssociationMode::Nms;
  throw UsageError("association must be hungarian or nms, got '" + s + "'");
}

const char* association_name(AssociationMode m) {
  return m == AssociationMode::Hungarian ? "hungarian" : "nms";
}

TrackerConfig read_tracker(KvConfig& c) {
  TrackerConfig t;
  t.rebirth_k = c.get_int("rebirth_k", t.rebirth_k);
  t.min_iou = c.get_double("min_iou", t.min_iou);
  t.association = parse_association(c.get_string("association", "hungarian"));
  t.score_thresh = c.get_double("score_thresh", t.score_thresh);
  t.validate();
  return t;
}

motion::KalmanConfig read_kalman(KvConfig& c) {
  motion::KalmanConfig k;
  k.std_weight_position = c.get_double("kalman.std_weight_position", k.std_weight_position);
  k.std_weight_velocity = c.get_double("kalman.std_weight_velocity", k.std_weight_velocity);
  k.std_aspect = c.get_double("kalman.std_aspect", k.std_aspect);
  k.std_aspect_velocity = c.get_double("kalman.std_aspect_velocity", k.std_aspect_velocity);
  k.std_aspect_measurement =
      c.get_double("kalman.std_aspect_measurement", k.std_aspect_measurement);
  if (!(k.std_weight_position > 0.0 && k.std_weight_velocity > 0.0 && k.std_aspect > 0.0 &&
        k.std_aspect_velocity > 0.0 && k.std_aspect_measurement > 0.0)) {
    throw UsageError("kalman noise scales must be positive");
  }
  return k;
}

LossWeights read_loss(KvConfig& c) {
  LossWeights w;
  w.lambda_cls = c.get_double("loss.lambda_cls", w.lambda_cls);
  w.lambda_l1 = c.get_double("loss.lambda_l1", w.lambda_l1);
  w.lambda_giou = c.get_double("loss.lambda_giou", w.lambda_giou);
  w.focal_alpha = c.get_double("loss.focal_alpha", w.focal_alpha);
  w.focal_gamma = c.get_double("loss.focal_gamma", w.focal_gamma);
  w.validate();
  return w;
}

/// Grid and channel count follow the scene; the rest comes from model.* keys.
ModelConfig read_model(KvConfig& c, const synth::ScenarioSpec& scene, ModelConfig m = {}) {
  m.grid_h = scene.grid_h;
  m.grid_w = scene.grid_w;
  m.feature_channels = synth::FeatureLayout{scene.id_channels}.channels();
  m.d_model = c.get_int("model.d_model", m.d_model);
  m.ffn_dim = c.get_int("model.ffn_dim", m.ffn_dim);
  m.num_queries = c.get_int("model.num_queries", m.num_queries);
  m.encoder_layers = c.get_int("model.encoder_layers", m.encoder_layers);
  m.decoder_layers = c.get_int("model.decoder_layers", m.decoder_layers);
  m.share_decoders = c.get_bool("model.share_decoders", m.share_decoders);
  m.init_scale = c.get_double("model.init_scale", m.init_scale);
  m.seed = c.get_u64("model.seed", m.seed);
  m.validate();
  return m;
}

toynet::PairDatasetSpec read_dataset(KvConfig& c, const std::string& prefix,
                                     toynet::PairDatasetSpec d) {
  d.count = c.get_int(prefix + "count", d.count);
  d.seed = c.get_u64(prefix + "seed", d.seed);
  d.min_objects = c.get_int(prefix + "min_objects", d.min_objects);
  d.max_objects = c.get_int(prefix + "max_objects", d.max_objects);
  d.perturb.scale = c.get_double(prefix + "scale", d.perturb.scale);
  d.perturb.translate = c.get_double(prefix + "translate", d.perturb.translate);
  d.scene.min_width = c.get_double(prefix + "min_width", d.scene.min_width);
  d.scene.max_width = c.get_double(prefix + "max_width", d.scene.max_width);
  d.scene.min_aspect = c.get_double(prefix + "min_aspect", d.scene.min_aspect);
  d.scene.max_aspect = c.get_double(prefix + "max_aspect", d.scene.max_aspect);
  d.scene.grid_h = c.get_int(prefix + "grid_h", d.scene.grid_h);
  d.scene.grid_w = c.get_int(prefix + "grid_w", d.scene.grid_w);
  if (d.count < 1) throw UsageError(prefix + "count must be >= 1");
  if (d.min_objects < 0 || d.max_objects < d.min_objects) {
    throw UsageError(prefix + "min_objects/max_objects out of order");
  }
  if (d.perturb.scale < 0.0 || d.perturb.scale >= 1.0 || d.perturb.translate < 0.0) {
    throw UsageError(prefix + "scale must lie in [0, 1) and translate must be >= 0");
  }
  synth::ScenarioSpec probe = d.scene;
  probe.num_frames = 1;
  probe.num_objects = d.max_objects;
  probe.validate();
  return d;
}

toynet::TrainConfig read_train(KvConfig& c) {
  toynet::TrainConfig t = toynet::reference_train_config();
  t.epochs = c.get_int("train.epochs", t.epochs);
  const std::string opt = c.get_string("train.optimizer", "adam");
  if (opt == "adam") {
    t.optimizer = toynet::Optimizer::Adam;
  } else if (opt == "gd") {
    t.optimizer = toynet::Optimizer::Gd;
  } else {
    throw UsageError("train.optimizer must be adam or gd, got '" + opt + "'");
  }
  t.learning_rate = c.get_double("train.lr", t.learning_rate);
  t.batch_size = c.get_int("train.batch_size", t.batch_size);
  t.clip_norm = c.get_double("train.clip_norm", t.clip_norm);
  const std::string strategy = c.get_string("train.strategy", "current");
  if (strategy == "current") {
    t.strategy = toynet::MatchingStrategy::Current;
  } else if (strategy == "previous") {
    t.strategy = toynet::MatchingStrategy::Previous;
  } else {
    throw UsageError("train.strategy must be current or previous, got '" + strategy + "'");
  }
  t.weights = read_loss(c);
  if (t.epochs < 0) throw UsageError("train.epochs must be >= 0");
  if (t.batch_size < 1) throw UsageError("train.batch_size must be >= 1");
  if (!(t.learning_rate > 0.0)) throw UsageError("train.lr must be positive");
  if (t.clip_norm < 0.0) throw UsageError("train.clip_norm must be >= 0");
  return t;
}

synth::ScenarioSpec load_scenario(const std::string& path,
                                  const std::vector<std::string>& overrides = {}) {
  KvConfig cfg = KvConfig::parse_file(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  synth::ScenarioSpec spec = synth::spec_from_config(cfg);
  cfg.finish();
  spec.validate();
  return spec;
}

void check_model_input(const ModelConfig& m, const std::vector<Tensor>& features) {
  for (const auto& f : features) {
    if (f.rank() != 3 || f.dim(0) != static_cast<std::size_t>(m.grid_h) ||
        f.dim(1) != static_cast<std::size_t>(m.grid_w) ||
        f.dim(2) != static_cast<std::size_t>(m.feature_channels)) {
      throw UsageError("feature grid " + f.shape_string() + " does not fit the model (" +
                       std::to_string(m.grid_h) + "x" + std::to_string(m.grid_w) + "x" +
                       std::to_string(m.feature_channels) + ")");
    }
  }
}

/// Writes to a file, or to out when the path is empty or "-".
template <typename Fn>
void emit(const std::string& path, std::ostream& out, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(out);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  fn(file);
  if (!file) throw std::runtime_error("write to " + path + " failed");
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------- track

enum class ProviderKind { Replay, None, Kalman, ToyNet };

ProviderKind parse_provider(const std::string& s) {
  if (s == "replay") return ProviderKind::Replay;
  if (s == "none") return ProviderKind::None;
  if (s == "kalman") return ProviderKind::Kalman;
  if (s == "toynet") return ProviderKind::ToyNet;
  throw UsageError("provider must be replay, none, kalman or toynet, got '" + s + "'");
}

QueryMode parse_query_mode(const std::string& s) {
  if (s == "both") return QueryMode::Both;
  if (s == "object") return QueryMode::ObjectOnly;
  if (s == "track") return QueryMode::TrackOnly;
  throw UsageError("query_mode must be both, object or track, got '" + s + "'");
}

struct TrackArgs {
  ConfigArgs config;
  std::string det;
  std::string scenario;
  std::string features;
  std::string checkpoint;
  std::string out;
  std::string provider;
  std::string association;
  std::string stride;
};

int num_frames_after_stride(int frames, int stride) {
  return frames <= 0 ? 0 : (frames - 1) / stride + 1;
}

int cmd_track(const TrackArgs& a, std::ostream& out) {
  KvConfig cfg = load_config(a.config, true);
  set_if(cfg, "provider", a.provider);
  set_if(cfg, "association", a.association);
  set_if(cfg, "stride", a.stride);
  const ProviderKind kind = parse_provider(cfg.get_string("provider", "replay"));
  const TrackerConfig tcfg = read_tracker(cfg);
  const motion::KalmanConfig kcfg = read_kalman(cfg);
  const QueryMode mode = parse_query_mode(cfg.get_string("query_mode", "both"));
  const int stride = cfg.get_int("stride", 1);
  int num_frames = cfg.get_int("num_frames", 0);
  const ImageSize image{cfg.get_double("image_width", 640.0), cfg.get_double("image_height", 480.0)};
  cfg.finish();
  if (stride < 1) throw UsageError("stride must be >= 1");
  if (num_frames < 0) throw UsageError("num_frames must be >= 0");
  if (!a.det.empty() == !a.scenario.empty() && kind != ProviderKind::ToyNet) {
    throw UsageError("give exactly one of --det or --scenario");
  }
  if (kind == ProviderKind::ToyNet) {
    if (a.checkpoint.empty()) throw UsageError("provider toynet needs --checkpoint");
    if (a.features.empty() == a.scenario.empty()) {
      throw UsageError("provider toynet needs exactly one of --features or --scenario");
    }
  }
  if (mode != QueryMode::Both && kind != ProviderKind::ToyNet) {
    throw UsageError("query_mode applies to provider toynet only");
  }

  std::vector<FrameResult> results;
  if (kind == ProviderKind::ToyNet) {
    ModelParams params = toynet::load_checkpoint(a.checkpoint);
    std::vector<Tensor> features;
    ImageSize img = image;
    if (!a.scenario.empty()) {
      const synth::ScenarioSpec spec = load_scenario(a.scenario);
      features = synth::generate(spec).features;
      img = spec.image();
    } else {
      features = toynet::load_feature_grids(a.features);
    }
    features = synth::skip_sample(features, stride);
    check_model_input(params.config, features);
    const int available = static_cast<int>(features.size());
    const int frames = num_frames > 0
                           ? std::min(num_frames_after_stride(num_frames, stride), available)
                           : available;
    toynet::ToyNetProvider provider(std::move(params), std::move(features), img);
    results = run_sequence(frames, provider, provider, tcfg, mode);
  } else {
    Sequence dets;
    if (!a.scenario.empty()) {
      const synth::ScenarioSpec spec = load_scenario(a.scenario);
      dets = synth::generate(spec).dets;
      if (num_frames == 0) num_frames = spec.num_frames;
    } else {
      dets = io::parse_mot_file(a.det, io::MotKind::Det);
    }
    num_frames = num_frames_after_stride(num_frames, stride);
    dets = synth::skip_sample(dets, stride);
    io::ReplayDetector detector(std::move(dets), num_frames);
    if (kind == ProviderKind::Kalman) {
      KalmanPropagator propagator(motion::scaled_for_stride(kcfg, stride));
      results = run_sequence(detector.num_frames(), detector, propagator, tcfg);
    } else {
      FrozenBoxPropagator propagator;
      results = run_sequence(detector.num_frames(), detector, propagator, tcfg);
    }
  }
  const Sequence seq = io::to_sequence(results);
  emit(a.out, out, [&](std::ostream& o) { io::write_results(o, seq); });
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  ConfigArgs config;
  std::string gt;
  std::string result;
  std::string kv;
  std::string name = "sequence";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  KvConfig cfg = load_config(a.config, true);
  const double iou_thresh = cfg.get_double("iou_thresh", 0.5);
  io::ParseOptions popts;
  popts.min_visibility = cfg.get_double("min_visibility", popts.min_visibility);
  popts.keep_class = cfg.get_int("keep_class", popts.keep_class);
  cfg.finish();
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) throw UsageError("iou_thresh must lie in (0, 1]");

  const Sequence gt = io::parse_mot_file(a.gt, io::MotKind::Gt, popts);
  const Sequence pred = io::parse_mot_file(a.result, io::MotKind::Result);
  MotReport report;
  try {
    report = evaluate(gt, pred, iou_thresh);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("cannot evaluate: ") + e.what());
  }
  out << format_report_table(report, a.name);
  if (!a.kv.empty()) {
    emit(a.kv, out, [&](std::ostream& o) { o << format_report_kv(report); });
  }
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string spec;
  std::vector<std::string> sets;
  std::string out_dir;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  synth::ScenarioSpec spec;
  if (a.spec.empty()) {
    KvConfig cfg;
    for (const auto& kv : a.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    spec = synth::spec_from_config(cfg);
    cfg.finish();
    spec.validate();
  } else {
    spec = load_scenario(a.spec, a.sets);
  }
  const synth::Scenario sc = synth::generate(spec);
  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  emit((dir / "gt.txt").string(), out, [&](std::ostream& o) { io::write_gt(o, sc.gt); });
  emit((dir / "det.txt").string(), out, [&](std::ostream& o) { io::write_detections(o, sc.dets); });
  emit((dir / "scenario.txt").string(), out,
       [&](std::ostream& o) { o << synth::spec_to_text(spec); });
  toynet::save_feature_grids((dir / "features.bin").string(), sc.features);
  out << "wrote " << spec.num_frames << " frames, " << spec.num_objects << " objects to "
      << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  ConfigArgs config;
  std::string scenario;
  std::string checkpoint;
  std::string out;
};

struct AblationRow {
  std::string provider;
  int stride = 1;
  AssociationMode association = AssociationMode::Hungarian;
  MotReport report;
  std::vector<std::string> results;  // per scenario result file text
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  KvConfig cfg = load_config(a.config, true);
  const int count = cfg.get_int("count", 10);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const std::vector<int> strides = cfg.get_int_list("strides", {1, 4});
  const double unambiguous_iou = cfg.get_double("unambiguous_iou", 0.3);
  const double stride1_tolerance = cfg.get_double("stride1_tolerance", 0.10);
  TrackerConfig tcfg = read_tracker(cfg);
  const motion::KalmanConfig kcfg = read_kalman(cfg);
  cfg.finish();
  if (count < 1) throw UsageError("count must be >= 1");
  for (const int s : strides) {
    if (s < 1) throw UsageError("strides must be >= 1");
  }
  const synth::ScenarioSpec base =
      a.scenario.empty() ? synth::ablation_scenario(seed) : load_scenario(a.scenario);
  std::optional<ModelParams> params;
  if (!a.checkpoint.empty()) params = toynet::load_checkpoint(a.checkpoint);

  std::vector<synth::Scenario> scenarios;
  for (int i = 0; i < count; ++i) {
    synth::ScenarioSpec s = base;
    s.seed = base.seed + static_cast<std::uint64_t>(i);
    scenarios.push_back(synth::generate(s));
  }
  if (params) check_model_input(params->config, scenarios.front().features);

  std::vector<std::string> providers{"none", "kalman"};
  if (params) providers.emplace_back("toynet");
  std::vector<AblationRow> rows;
  for (const auto& provider : providers) {
    for (const int stride : strides) {
      for (const AssociationMode assoc : {AssociationMode::Hungarian, AssociationMode::Nms}) {
        AblationRow row{provider, stride, assoc, {}, {}};
        tcfg.association = assoc;
        std::vector<MotReport> parts;
        for (const auto& full : scenarios) {
          const synth::Scenario sc = synth::skip_sample(full, stride);
          const int frames = num_frames_after_stride(full.spec.num_frames, stride);
          std::vector<FrameResult> res;
          if (provider == "toynet") {
            toynet::ToyNetProvider p(*params, sc.features, sc.spec.image());
            res = run_sequence(frames, p, p, tcfg);
          } else {
            io::ReplayDetector det(sc.dets, frames);
            if (provider == "kalman") {
              KalmanPropagator prop(motion::scaled_for_stride(kcfg, stride));
              res = run_sequence(frames, det, prop, tcfg);
            } else {
              FrozenBoxPropagator prop;
              res = run_sequence(frames, det, prop, tcfg);
            }
          }
          const Sequence pred = io::to_sequence(res);
          Sequence gt = sc.gt;
          if (gt.empty() || gt.back().frame < frames) gt.push_back({frames, {}});
          parts.push_back(evaluate(gt, pred));
          row.results.push_back(io::write_results(pred));
        }
        row.report = merge_reports(parts);
        rows.push_back(std::move(row));
      }
    }
  }

  std::ostringstream table;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %6s %-10s %7s %7s %6s %6s %6s\n", "provider", "stride",
                "assoc", "MOTA", "IDF1", "FP", "FN", "IDs");
  table << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %6d %-10s %7.1f %7.1f %6ld %6ld %6ld\n",
                  r.provider.c_str(), r.stride, association_name(r.association), r.report.mota,
                  r.report.idf1, r.report.fp, r.report.fn, r.report.idsw);
    table << buf;
  }

  auto find = [&](const std::string& provider, int stride, AssociationMode assoc) {
    for (const auto& r : rows) {
      if (r.provider == provider && r.stride == stride && r.association == assoc) return &r;
    }
    return static_cast<const AblationRow*>(nullptr);
  };
  bool ok = true;
  auto check = [&](const std::string& name, bool pass, const std::string& detail) {
    table << "check " << name << ": " << (pass ? "PASS" : "FAIL") << " (" << detail << ")\n";
    ok = ok && pass;
  };
  const auto* none1 = find("none", 1, AssociationMode::Hungarian);
  const auto* kalman1 = find("kalman", 1, AssociationMode::Hungarian);
  if (none1 != nullptr && kalman1 != nullptr) {
    const long x = none1->report.idsw;
    const long y = kalman1->report.idsw;
    const double gap = std::abs(static_cast<double>(x - y));
    check("stride-1 IDs near equal", gap <= stride1_tolerance * static_cast<double>(std::max(x, y)),
          "none " + std::to_string(x) + ", kalman " + std::to_string(y));
  }
  const auto* none4 = find("none", 4, AssociationMode::Hungarian);
  const auto* kalman4 = find("kalman", 4, AssociationMode::Hungarian);
  if (none4 != nullptr && kalman4 != nullptr) {
    check("stride-4 IDs(none) >= IDs(kalman)", none4->report.idsw >= kalman4->report.idsw,
          "none " + std::to_string(none4->report.idsw) + ", kalman " +
              std::to_string(kalman4->report.idsw));
  }
  long compared = 0;
  long differing = 0;
  for (const auto& r : rows) {
    if (r.association != AssociationMode::Hungarian) continue;
    const auto* nms = find(r.provider, r.stride, AssociationMode::Nms);
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      const Sequence gt = synth::skip_sample(scenarios[i].gt, r.stride);
      if (synth::max_cross_object_iou(gt) >= unambiguous_iou) continue;
      ++compared;
      if (r.results[i] != nms->results[i]) ++differing;
    }
  }
  if (compared == 0) {
    table << "check hungarian == nms on unambiguous scenes: SKIP (no unambiguous scene)\n";
  } else {
    check("hungarian == nms on unambiguous scenes", differing == 0,
          std::to_string(compared) + " runs compared, " + std::to_string(differing) + " differ");
  }

  emit(a.out, out, [&](std::ostream& o) { o << table.str(); });
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  ConfigArgs config;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  KvConfig cfg = load_config(a.config, true);
  // Small enough to enumerate every parameter in well under a minute.
  toynet::PairDatasetSpec base = toynet::reference_pair_dataset(1, 3);
  base.scene.grid_h = 4;
  base.scene.grid_w = 4;
  toynet::PairDatasetSpec data = read_dataset(cfg, "data.", base);
  data.count = 1;
  ModelConfig small;
  small.d_model = 8;
  small.ffn_dim = 16;
  small.num_queries = 4;
  const ModelConfig mcfg = read_model(cfg, data.scene, small);
  const LossWeights w = read_loss(cfg);
  const double tolerance = cfg.get_double("tolerance", 1e-3);
  const double epsilon = cfg.get_double("epsilon", 1e-5);
  cfg.finish();
  if (!(tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");

  const auto scenes = toynet::make_pair_scenes(data);
  const toynet::TrainingPair pair = toynet::to_training_pair(scenes.front());
  const ModelParams params = toynet::init_params(mcfg);
  const toynet::GradCheckResult r = toynet::grad_check(params, pair, w, epsilon);
  const bool pass = r.max_rel_error <= tolerance;
  out << "parameters " << toynet::parameter_count(params) << "\n";
  out << "checked " << r.checked << "\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
  out << "max_rel_error " << buf << "\n";
  out << "worst " << r.worst_tensor << "[" << r.worst_index << "]\n";
  out << "tolerance " << tolerance << "\n";
  out << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ConfigArgs config;
  std::string out;
  std::string history;
  std::string epochs;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  KvConfig cfg = load_config(a.config, true);
  set_if(cfg, "train.epochs", a.epochs);
  const toynet::PairDatasetSpec data =
      read_dataset(cfg, "data.", toynet::reference_pair_dataset());
  toynet::PairDatasetSpec held = data;
  held.count = 40;
  held.seed = 999;
  held = read_dataset(cfg, "eval.", held);
  const ModelConfig mcfg = read_model(cfg, data.scene);
  const toynet::TrainConfig tc = read_train(cfg);
  const TrackerConfig tcfg = read_tracker(cfg);
  const int log_every = cfg.get_int("log_every", 50);
  cfg.finish();
  if (a.out.empty()) throw UsageError("train needs --out");
  if (log_every < 1) throw UsageError("log_every must be >= 1");

  const auto pairs = toynet::to_training_pairs(toynet::make_pair_scenes(data));
  const auto held_scenes = toynet::make_pair_scenes(held);
  const toynet::TrainResult res = toynet::train_toy(
      pairs, toynet::init_params(mcfg), tc, [&](int epoch, double loss, const ModelParams&) {
        if (epoch % log_every == 0 || epoch == tc.epochs) {
          out << "epoch " << epoch << " loss " << fixed(loss, 4) << "\n" << std::flush;
        }
      });
  toynet::save_checkpoint(a.out, res.params);
  if (!a.history.empty()) {
    emit(a.history, out, [&](std::ostream& o) {
      for (std::size_t e = 0; e < res.history.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu %.17g\n", e, res.history[e]);
        o << buf;
      }
    });
  }
  const MotReport r = toynet::evaluate_pairs(res.params, held_scenes, tcfg);
  out << "held-out pairs " << held_scenes.size() << "\n";
  out << format_report_table(r, "held-out");
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint detection and tracking with track queries, at desk scale."};
  app.name("transtrack");
  app.require_subcommand(1);
  const std::string cfg_help =
      std::string("key = value config file (default: $") + kConfigEnv + ")";

  TrackArgs track;
  auto* track_cmd = app.add_subcommand("track", "Run the tracker and write MOT result records");
  add_config_options(track_cmd, track.config, cfg_help);
  track_cmd->add_option("--det", track.det, "Detection file (MOT format)");
  track_cmd->add_option("--scenario", track.scenario, "Scenario spec to generate inputs from");
  track_cmd->add_option("--features", track.features, "Feature grid file (provider toynet)");
  track_cmd->add_option("--checkpoint", track.checkpoint, "Model checkpoint (provider toynet)");
  track_cmd->add_option("-o,--out", track.out, "Result file (default: stdout)");
  track_cmd->add_option("--provider", track.provider, "replay | none | kalman | toynet");
  track_cmd->add_option("--association", track.association, "hungarian | nms");
  track_cmd->add_option("--stride", track.stride, "Keep every n-th frame");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a result file against ground truth");
  add_config_options(eval_cmd, eval.config, cfg_help);
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth file")->required();
  eval_cmd->add_option("--result", eval.result, "Result file")->required();
  eval_cmd->add_option("--kv", eval.kv, "Also write key-value metrics here");
  eval_cmd->add_option("--name", eval.name, "Row label");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic scenario");
  sim_cmd->add_option("--spec", sim.spec, "Scenario spec file (key = value)");
  sim_cmd->add_option("-s,--set", sim.sets, "Override one spec entry, key=value (repeatable)");
  sim_cmd->add_option("-o,--out-dir", sim.out_dir, "Output directory")->required();

  AblateArgs ablate;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Compare motion models, strides and association modes");
  add_config_options(ablate_cmd, ablate.config, cfg_help);
  ablate_cmd->add_option("--scenario", ablate.scenario, "Base scenario spec");
  ablate_cmd->add_option("--checkpoint", ablate.checkpoint, "Adds toynet rows");
  ablate_cmd->add_option("-o,--out", ablate.out, "Table file (default: stdout)");

  GradcheckArgs gradcheck;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the toy network");
  add_config_options(gc_cmd, gradcheck.config, cfg_help);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the toy network on perturbed pairs");
  add_config_options(train_cmd, train.config, cfg_help);
  train_cmd->add_option("-o,--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--history", train.history, "Per-epoch loss file");
  train_cmd->add_option("--epochs", train.epochs, "Override train.epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (track_cmd->parsed()) return cmd_track(track, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate, out);
    if (gc_cmd->parsed()) return cmd_gradcheck(gradcheck, out);
    if (train_cmd->parsed()) return cmd_train(train, out);
  } catch (const UsageError& e) {
    err << "transtrack: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "transtrack: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "transtrack: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "transtrack: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace transtrack::cli
