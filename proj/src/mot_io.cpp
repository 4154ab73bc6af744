#include "transtrack/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

namespace transtrack::io {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view field, std::size_t line, const char* name) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("bad ") + name + " field '" + std::string(field) + "'");
  }
  return v;
}

int to_int(std::string_view field, std::size_t line, const char* name) {
  const double v = to_double(field, line, name);
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw ParseError(line, std::string(name) + " must be an integer");
  }
  return static_cast<int>(v);
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid printing "-0.00".
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

std::vector<const FrameAnnotations*> frames_sorted(const Sequence& seq) {
  std::vector<const FrameAnnotations*> out;
  for (const auto& f : seq) out.push_back(&f);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->frame < b->frame; });
  return out;
}

}  // namespace

Sequence parse_mot(std::istream& in, MotKind kind, const ParseOptions& opts) {
  std::map<int, FrameAnnotations> frames;
  std::set<std::pair<int, int>> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const std::size_t min_fields = kind == MotKind::Det ? 7 : 6;
    if (f.size() < min_fields) {
      throw ParseError(line_no, "expected at least " + std::to_string(min_fields) +
                                    " comma-separated fields, got " + std::to_string(f.size()));
    }
    Annotation a;
    const int frame = to_int(f[0], line_no, "frame");
    if (frame < 1) throw ParseError(line_no, "frame must be >= 1");
    a.id = kind == MotKind::Det ? -1 : to_int(f[1], line_no, "id");
    a.box = {to_double(f[2], line_no, "bb_left"), to_double(f[3], line_no, "bb_top"),
             to_double(f[4], line_no, "bb_width"), to_double(f[5], line_no, "bb_height")};
    if (a.box.width < 0.0 || a.box.height < 0.0) {
      throw ParseError(line_no, "negative box extent");
    }
    a.conf = f.size() > 6 ? to_double(f[6], line_no, "conf") : 1.0;
    if (kind == MotKind::Gt) {
      a.class_id = f.size() > 7 ? to_int(f[7], line_no, "class") : 1;
      a.visibility = f.size() > 8 ? to_double(f[8], line_no, "visibility") : 1.0;
      if (a.class_id != opts.keep_class || a.visibility < opts.min_visibility) continue;
    }
    if (a.id != -1 && !seen.emplace(frame, a.id).second) {
      throw ParseError(line_no, "duplicate (frame, id) = (" + std::to_string(frame) + ", " +
                                    std::to_string(a.id) + ")");
    }
    auto& fa = frames[frame];
    fa.frame = frame;
    fa.entries.push_back(a);
  }
  Sequence out;
  out.reserve(frames.size());
  for (auto& [k, fa] : frames) out.push_back(std::move(fa));
  return out;
}

Sequence parse_mot_file(const std::string& path, MotKind kind, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_mot(in, kind, opts);
}

void write_results(std::ostream& out, const Sequence& seq) {
  for (const FrameAnnotations* fa : frames_sorted(seq)) {
    std::vector<const Annotation*> entries;
    for (const auto& e : fa->entries) {
      if (e.id < 1) throw std::invalid_argument("result ids must be >= 1");
      entries.push_back(&e);
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto* a, const auto* b) { return a->id < b->id; });
    for (const Annotation* e : entries) {
      out << fa->frame << ',' << e->id << ',' << coord(e->box.left) << ',' << coord(e->box.top)
          << ',' << coord(e->box.width) << ',' << coord(e->box.height) << ','
          << shortest(e->conf) << ",-1,-1,-1\n";
    }
  }
}

std::string write_results(const Sequence& seq) {
  std::ostringstream os;
  write_results(os, seq);
  return os.str();
}

void write_results_file(const std::string& path, const Sequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_results(out, seq);
  if (!out) throw std::runtime_error("error while writing " + path);
}

void write_detections(std::ostream& out, const Sequence& seq) {
  for (const FrameAnnotations* fa : frames_sorted(seq)) {
    for (const auto& e : fa->entries) {
      out << fa->frame << ",-1," << coord(e.box.left) << ',' << coord(e.box.top) << ','
          << coord(e.box.width) << ',' << coord(e.box.height) << ',' << shortest(e.conf)
          << ",-1,-1,-1\n";
    }
  }
}

void write_gt(std::ostream& out, const Sequence& seq) {
  for (const FrameAnnotations* fa : frames_sorted(seq)) {
    std::vector<const Annotation*> entries;
    for (const auto& e : fa->entries) entries.push_back(&e);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto* a, const auto* b) { return a->id < b->id; });
    for (const Annotation* e : entries) {
      out << fa->frame << ',' << e->id << ',' << coord(e->box.left) << ',' << coord(e->box.top)
          << ',' << coord(e->box.width) << ',' << coord(e->box.height) << ",1," << e->class_id
          << ',' << shortest(e->visibility) << '\n';
    }
  }
}

Sequence to_sequence(const std::vector<FrameResult>& frames) {
  Sequence out;
  for (const auto& fr : frames) {
    if (fr.boxes.empty()) continue;
    FrameAnnotations fa;
    fa.frame = fr.frame;
    for (const auto& b : fr.boxes) {
      Annotation a;
      a.id = b.id;
      a.box = b.box;
      a.conf = b.score;
      fa.entries.push_back(a);
    }
    out.push_back(std::move(fa));
  }
  return out;
}

ReplayDetector::ReplayDetector(Sequence dets, int num_frames) : dets_(std::move(dets)) {
  std::stable_sort(dets_.begin(), dets_.end(),
                   [](const auto& a, const auto& b) { return a.frame < b.frame; });
  const int last = dets_.empty() ? 0 : dets_.back().frame;
  num_frames_ = num_frames > 0 ? std::max(num_frames, last) : last;
}

std::vector<Detection> ReplayDetector::detect(int frame) {
  if (frame < 1 || frame > num_frames_) {
    throw std::out_of_range("detection frame " + std::to_string(frame) + " outside [1, " +
                            std::to_string(num_frames_) + "]");
  }
  std::vector<Detection> out;
  const auto it = std::lower_bound(dets_.begin(), dets_.end(), frame,
                                   [](const FrameAnnotations& fa, int f) { return fa.frame < f; });
  for (auto fit = it; fit != dets_.end() && fit->frame == frame; ++fit) {
    for (const auto& e : fit->entries) {
      Detection d;
      d.box = e.box;
      d.score = e.conf;
      d.class_probs = {e.conf};
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace transtrack::io
