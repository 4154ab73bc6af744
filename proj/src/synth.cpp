#include "transtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace transtrack::synth {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SplitMix64::mix(std::uint64_t seed, std::uint64_t key) {
  SplitMix64 g(seed ^ (key * 0xD1B54A32D192ED03ULL));
  g.next();
  return g.next();
}

void ScenarioSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("scenario spec: " + m); };
  if (!(image_width > 0.0) || !(image_height > 0.0)) fail("image size must be positive");
  if (num_frames < 1) fail("num_frames must be >= 1");
  if (num_objects < 0) fail("num_objects must be >= 0");
  if (!births.empty() && births.size() != static_cast<std::size_t>(num_objects)) {
    fail("births must list one frame per object");
  }
  if (!deaths.empty() && deaths.size() != static_cast<std::size_t>(num_objects)) {
    fail("deaths must list one frame per object");
  }
  for (int k = 0; k < num_objects; ++k) {
    const int b = births.empty() ? 1 : births[static_cast<std::size_t>(k)];
    const int d = deaths.empty() ? num_frames : deaths[static_cast<std::size_t>(k)];
    if (b < 1 || d > num_frames || b > d || (num_frames > 1 && b == d)) {
      fail("object " + std::to_string(k + 1) + " needs 1 <= birth < death <= num_frames");
    }
  }
  if (min_speed < 0.0 || max_speed < min_speed) fail("speed range invalid");
  if (!(min_width > 0.0) || max_width < min_width) fail("width range invalid");
  if (!(min_aspect > 0.0) || max_aspect < min_aspect) fail("aspect range invalid");
  if (max_width > image_width || max_width * max_aspect > image_height) {
    fail("objects larger than the image");
  }
  if (center_noise < 0.0 || size_noise < 0.0) fail("noise must be non-negative");
  if (miss_prob < 0.0 || miss_prob > 1.0) fail("miss_prob must be in [0, 1]");
  if (sine_period <= 0.0) fail("sine_period must be positive");
  if (grid_h < 1 || grid_w < 1 || id_channels < 0) fail("grid shape invalid");
  for (const auto& o : occlusions) {
    if (o.object < 1 || o.object > num_objects || o.first > o.last) fail("bad occlusion window");
  }
}

ScenarioSpec spec_from_config(KvConfig& cfg) {
  ScenarioSpec s;
  s.image_width = cfg.get_double("image_width", s.image_width);
  s.image_height = cfg.get_double("image_height", s.image_height);
  s.num_frames = cfg.get_int("num_frames", s.num_frames);
  s.num_objects = cfg.get_int("num_objects", s.num_objects);
  s.births = cfg.get_int_list("births", {});
  s.deaths = cfg.get_int_list("deaths", {});
  const std::string motion = cfg.get_string("motion", "linear");
  if (motion == "linear") {
    s.motion = MotionKind::Linear;
  } else if (motion == "sinusoidal") {
    s.motion = MotionKind::Sinusoidal;
  } else {
    throw ConfigError("motion must be linear or sinusoidal, got '" + motion + "'");
  }
  s.min_speed = cfg.get_double("min_speed", s.min_speed);
  s.max_speed = cfg.get_double("max_speed", s.max_speed);
  s.sine_amplitude = cfg.get_double("sine_amplitude", s.sine_amplitude);
  s.sine_period = cfg.get_double("sine_period", s.sine_period);
  s.min_width = cfg.get_double("min_width", s.min_width);
  s.max_width = cfg.get_double("max_width", s.max_width);
  s.min_aspect = cfg.get_double("min_aspect", s.min_aspect);
  s.max_aspect = cfg.get_double("max_aspect", s.max_aspect);
  s.center_noise = cfg.get_double("center_noise", s.center_noise);
  s.size_noise = cfg.get_double("size_noise", s.size_noise);
  s.miss_prob = cfg.get_double("miss_prob", s.miss_prob);
  // occlusions = 1:5-8; 2:10-12
  const std::string occ = cfg.get_string("occlusions", "");
  std::stringstream ss(occ);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    Occlusion o;
    char colon = 0, dash = 0;
    std::istringstream is(item);
    if (!(is >> o.object >> colon >> o.first >> dash >> o.last) || colon != ':' || dash != '-') {
      throw ConfigError("occlusions entry '" + item + "' is not object:first-last");
    }
    s.occlusions.push_back(o);
  }
  s.grid_h = cfg.get_int("grid_h", s.grid_h);
  s.grid_w = cfg.get_int("grid_w", s.grid_w);
  s.id_channels = cfg.get_int("id_channels", s.id_channels);
  s.seed = cfg.get_u64("seed", s.seed);
  s.validate();
  return s;
}

std::string spec_to_text(const ScenarioSpec& s) {
  std::ostringstream os;
  os.precision(17);
  auto list = [](const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
  };
  os << "image_width = " << s.image_width << "\nimage_height = " << s.image_height
     << "\nnum_frames = " << s.num_frames << "\nnum_objects = " << s.num_objects << '\n';
  if (!s.births.empty()) os << "births = " << list(s.births) << '\n';
  if (!s.deaths.empty()) os << "deaths = " << list(s.deaths) << '\n';
  os << "motion = " << (s.motion == MotionKind::Linear ? "linear" : "sinusoidal")
     << "\nmin_speed = " << s.min_speed << "\nmax_speed = " << s.max_speed
     << "\nsine_amplitude = " << s.sine_amplitude << "\nsine_period = " << s.sine_period
     << "\nmin_width = " << s.min_width << "\nmax_width = " << s.max_width
     << "\nmin_aspect = " << s.min_aspect << "\nmax_aspect = " << s.max_aspect
     << "\ncenter_noise = " << s.center_noise << "\nsize_noise = " << s.size_noise
     << "\nmiss_prob = " << s.miss_prob << '\n';
  if (!s.occlusions.empty()) {
    os << "occlusions = ";
    for (std::size_t i = 0; i < s.occlusions.size(); ++i) {
      const auto& o = s.occlusions[i];
      os << (i ? "; " : "") << o.object << ':' << o.first << '-' << o.last;
    }
    os << '\n';
  }
  os << "grid_h = " << s.grid_h << "\ngrid_w = " << s.grid_w
     << "\nid_channels = " << s.id_channels << "\nseed = " << s.seed << '\n';
  return os.str();
}

Tensor render_features(std::span<const Annotation> objects, ImageSize image,
                       const GridSpec& grid) {
  const FeatureLayout layout{grid.id_channels};
  const auto hh = static_cast<std::size_t>(grid.height);
  const auto ww = static_cast<std::size_t>(grid.width);
  const auto cc = static_cast<std::size_t>(layout.channels());
  Tensor t({hh, ww, cc}, 0.0);
  constexpr double kFade = 0.1;

  struct Obj {
    double cx, cy, w, h, sx, sy;
    std::vector<double> code;
  };
  std::vector<Obj> objs;
  for (const auto& a : objects) {
    Obj o;
    const CenterBox c = a.box.to_center(image);
    o.cx = c.cx;
    o.cy = c.cy;
    o.w = c.w;
    o.h = c.h;
    o.sx = 0.5 * c.w + 0.5 / grid.width;
    o.sy = 0.5 * c.h + 0.5 / grid.height;
    for (int k = 0; k < grid.id_channels; ++k) {
      SplitMix64 g(SplitMix64::mix(grid.identity_seed,
                                   static_cast<std::uint64_t>(a.id) * 64 + static_cast<unsigned>(k)));
      o.code.push_back(2.0 * g.uniform() - 1.0);
    }
    objs.push_back(std::move(o));
  }

  std::vector<double> attr(cc, 0.0);
  for (std::size_t i = 0; i < hh; ++i) {
    const double y = (static_cast<double>(i) + 0.5) / grid.height;
    for (std::size_t j = 0; j < ww; ++j) {
      const double x = (static_cast<double>(j) + 0.5) / grid.width;
      double* cell = t.data() + (i * ww + j) * cc;
      std::fill(attr.begin(), attr.end(), 0.0);
      double occ = 0.0;
      for (const auto& o : objs) {
        const double dx = (x - o.cx) / o.sx;
        const double dy = (y - o.cy) / o.sy;
        const double g = std::exp(-0.5 * (dx * dx + dy * dy));
        occ += g;
        attr[FeatureLayout::kCx] += g * o.cx;
        attr[FeatureLayout::kCy] += g * o.cy;
        attr[FeatureLayout::kW] += g * o.w;
        attr[FeatureLayout::kH] += g * o.h;
        for (int k = 0; k < grid.id_channels; ++k) {
          attr[static_cast<std::size_t>(FeatureLayout::kIdBase + k)] += g * o.code[static_cast<std::size_t>(k)];
        }
      }
      cell[FeatureLayout::kOccupancy] = occ;
      const double denom = std::max(occ, kFade);
      for (int c = FeatureLayout::kCx; c < layout.coord_x(); ++c) {
        cell[c] = attr[static_cast<std::size_t>(c)] / denom;
      }
      cell[layout.coord_x()] = x;
      cell[layout.coord_y()] = y;
    }
  }
  return t;
}

namespace {

struct ObjectTrack {
  int id = 0;
  int birth = 1;
  int death = 1;
  std::vector<Box> boxes;  // index = frame - birth
};

bool occluded(const ScenarioSpec& spec, int id, int frame) {
  return std::any_of(spec.occlusions.begin(), spec.occlusions.end(), [&](const Occlusion& o) {
    return o.object == id && frame >= o.first && frame <= o.last;
  });
}

}  // namespace

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const double iw = spec.image_width;
  const double ih = spec.image_height;

  std::vector<ObjectTrack> tracks;
  for (int k = 0; k < spec.num_objects; ++k) {
    ObjectTrack tr;
    tr.id = k + 1;
    tr.birth = spec.births.empty() ? 1 : spec.births[static_cast<std::size_t>(k)];
    tr.death = spec.deaths.empty() ? spec.num_frames : spec.deaths[static_cast<std::size_t>(k)];
    const double w = rng.uniform(spec.min_width, spec.max_width);
    const double h = w * rng.uniform(spec.min_aspect, spec.max_aspect);
    double bx = rng.uniform(0.5 * w, iw - 0.5 * w);
    double by = rng.uniform(0.5 * h, ih - 0.5 * h);
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = rng.uniform(spec.min_speed, spec.max_speed);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double vx = speed * std::cos(heading);
    double vy = speed * std::sin(heading);
    for (int f = tr.birth; f <= tr.death; ++f) {
      if (f > tr.birth) {
        bx += vx;
        by += vy;
        // Reflect off the borders so the centre stays in the image.
        if (bx < 0.5 * w) { bx = w - bx; vx = -vx; }
        if (bx > iw - 0.5 * w) { bx = 2.0 * (iw - 0.5 * w) - bx; vx = -vx; }
        if (by < 0.5 * h) { by = h - by; vy = -vy; }
        if (by > ih - 0.5 * h) { by = 2.0 * (ih - 0.5 * h) - by; vy = -vy; }
      }
      double cx = bx;
      double cy = by;
      if (spec.motion == MotionKind::Sinusoidal && speed > 0.0) {
        const double off = spec.sine_amplitude *
                           std::sin(2.0 * std::numbers::pi * (f - tr.birth) / spec.sine_period + phase);
        cx += off * (-vy / speed);
        cy += off * (vx / speed);
      }
      tr.boxes.push_back({cx - 0.5 * w, cy - 0.5 * h, w, h});
    }
    tracks.push_back(std::move(tr));
  }

  Scenario sc;
  sc.spec = spec;
  const GridSpec grid{spec.grid_h, spec.grid_w, spec.id_channels, spec.seed};
  for (int f = 1; f <= spec.num_frames; ++f) {
    FrameAnnotations gt_frame{f, {}};
    FrameAnnotations det_frame{f, {}};
    std::vector<Annotation> visible;
    for (const auto& tr : tracks) {
      if (f < tr.birth || f > tr.death) continue;
      const Box& b = tr.boxes[static_cast<std::size_t>(f - tr.birth)];
      const bool hidden = occluded(spec, tr.id, f);
      Annotation g;
      g.id = tr.id;
      g.box = b;
      g.visibility = hidden ? 0.0 : 1.0;
      gt_frame.entries.push_back(g);
      if (!hidden) visible.push_back(g);

      const double u_miss = rng.uniform();
      const double dx = rng.normal() * spec.center_noise;
      const double dy = rng.normal() * spec.center_noise;
      const double dw = rng.normal() * spec.size_noise;
      const double dh = rng.normal() * spec.size_noise;
      const double conf = 0.6 + 0.4 * rng.uniform();
      if (hidden || u_miss < spec.miss_prob) continue;
      const double w2 = std::max(1.0, b.width + dw);
      const double h2 = std::max(1.0, b.height + dh);
      Annotation d;
      d.id = -1;
      d.box = {b.left + dx - 0.5 * (w2 - b.width), b.top + dy - 0.5 * (h2 - b.height), w2, h2};
      d.conf = conf;
      det_frame.entries.push_back(d);
    }
    sc.features.push_back(render_features(visible, spec.image(), grid));
    if (!gt_frame.entries.empty()) sc.gt.push_back(std::move(gt_frame));
    if (!det_frame.entries.empty()) sc.dets.push_back(std::move(det_frame));
  }
  return sc;
}

Transform2D draw_transform(const PerturbRanges& ranges, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Transform2D t;
  t.scale = rng.uniform(1.0 - ranges.scale, 1.0 + ranges.scale);
  t.tx = rng.uniform(-ranges.translate, ranges.translate);
  t.ty = rng.uniform(-ranges.translate, ranges.translate);
  return t;
}

StaticFrame perturb_static(const StaticFrame& frame, const Transform2D& t, const GridSpec& grid) {
  const double cx = 0.5 * frame.image.width;
  const double cy = 0.5 * frame.image.height;
  StaticFrame out;
  out.image = frame.image;
  for (const auto& a : frame.objects) {
    double left = t.scale * a.box.left + (1.0 - t.scale) * cx + t.tx;
    double top = t.scale * a.box.top + (1.0 - t.scale) * cy + t.ty;
    double w = t.scale * a.box.width;
    double h = t.scale * a.box.height;
    if (left < 0.0) { w += left; left = 0.0; }
    if (top < 0.0) { h += top; top = 0.0; }
    if (left + w > frame.image.width) w = frame.image.width - left;
    if (top + h > frame.image.height) h = frame.image.height - top;
    if (!(w > 0.0) || !(h > 0.0)) continue;
    Annotation moved = a;
    moved.box = {left, top, w, h};
    out.objects.push_back(moved);
  }
  GridSpec g = grid;
  if (frame.features.rank() == 3) {
    g.height = static_cast<int>(frame.features.dim(0));
    g.width = static_cast<int>(frame.features.dim(1));
  }
  out.features = render_features(out.objects, out.image, g);
  return out;
}

StaticFrame perturb_static(const StaticFrame& frame, const PerturbRanges& ranges,
                           std::uint64_t seed, const GridSpec& grid) {
  return perturb_static(frame, draw_transform(ranges, seed), grid);
}

Sequence skip_sample(const Sequence& seq, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  Sequence out;
  for (const auto& fa : seq) {
    if ((fa.frame - 1) % stride != 0) continue;
    FrameAnnotations copy = fa;
    copy.frame = (fa.frame - 1) / stride + 1;
    out.push_back(std::move(copy));
  }
  return out;
}

std::vector<Tensor> skip_sample(const std::vector<Tensor>& frames, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < frames.size(); i += static_cast<std::size_t>(stride)) {
    out.push_back(frames[i]);
  }
  return out;
}

Scenario skip_sample(const Scenario& sc, int stride) {
  Scenario out;
  out.spec = sc.spec;
  out.spec.num_frames = (sc.spec.num_frames - 1) / stride + 1;
  out.gt = skip_sample(sc.gt, stride);
  out.dets = skip_sample(sc.dets, stride);
  out.features = skip_sample(sc.features, stride);
  return out;
}

OracleProvider::OracleProvider(Sequence gt, bool visible_only, QuerySlots slots)
    : gt_(std::move(gt)), visible_only_(visible_only), slots_(slots) {
  if (slots_.cols < 0 || slots_.rows < 0 || (slots_.cols > 0 && slots_.rows < 1)) {
    throw std::invalid_argument("query slot grid must be non-negative");
  }
  if (slots_.cols > 0 && !(slots_.image.width > 0.0 && slots_.image.height > 0.0)) {
    throw std::invalid_argument("query slots need a positive image size");
  }
}

std::vector<Annotation> OracleProvider::frame_objects(int frame) const {
  std::vector<Annotation> out;
  for (const auto& fa : gt_) {
    if (fa.frame != frame) continue;
    for (const auto& e : fa.entries) {
      if (!visible_only_ || e.visibility > 0.0) out.push_back(e);
    }
  }
  return out;
}

std::vector<Detection> OracleProvider::detect(int frame) {
  std::vector<Detection> out;
  for (const auto& e : frame_objects(frame)) {
    Detection d;
    d.box = e.box;
    d.score = 1.0;
    d.class_probs = {1.0};
    if (slots_.cols > 0) {
      const auto cell = [](double v, double extent, int n) {
        return std::clamp(static_cast<int>(std::floor(v / extent * n)), 0, n - 1);
      };
      d.query_index = cell(e.box.center_y(), slots_.image.height, slots_.rows) * slots_.cols +
                      cell(e.box.center_x(), slots_.image.width, slots_.cols);
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<TrackBox> OracleProvider::propagate(int frame, std::span<const Tracklet> tracklets) {
  const auto prev = frame_objects(frame - 1);
  const auto curr = frame_objects(frame);
  std::vector<TrackBox> out;
  for (const auto& t : tracklets) {
    TrackBox tb{t.id, t.box, t.score, {}, {}};
    double best = 0.0;
    int best_id = -1;
    for (const auto& p : prev) {
      const double v = iou(t.box, p.box);
      if (v > best) {
        best = v;
        best_id = p.id;
      }
    }
    for (const auto& c : curr) {
      if (c.id == best_id) tb.box = c.box;
    }
    out.push_back(std::move(tb));
  }
  return out;
}

double max_pairwise_gt_iou(const Sequence& gt) {
  double worst = 0.0;
  for (const auto& fa : gt) {
    for (std::size_t i = 0; i < fa.entries.size(); ++i) {
      for (std::size_t j = i + 1; j < fa.entries.size(); ++j) {
        worst = std::max(worst, iou(fa.entries[i].box, fa.entries[j].box));
      }
    }
  }
  return worst;
}

double max_cross_object_iou(const Sequence& gt) {
  double worst = max_pairwise_gt_iou(gt);
  for (std::size_t f = 1; f < gt.size(); ++f) {
    if (gt[f].frame != gt[f - 1].frame + 1) continue;
    for (const auto& a : gt[f - 1].entries) {
      for (const auto& b : gt[f].entries) {
        if (a.id != b.id) worst = std::max(worst, iou(a.box, b.box));
      }
    }
  }
  return worst;
}

ScenarioSpec ablation_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.num_frames = 80;
  s.num_objects = 10;
  s.min_speed = 2.0;
  s.max_speed = 6.0;
  s.center_noise = 1.0;
  s.size_noise = 1.0;
  s.seed = seed;
  return s;
}

}  // namespace transtrack::synth
