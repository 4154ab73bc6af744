#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "transtrack/annotations.hpp"
#include "transtrack/tracker.hpp"

namespace transtrack::io {

enum class MotKind { Gt, Det, Result };

struct ParseOptions {
  double min_visibility = 0.0;  // gt only
  int keep_class = 1;           // gt only; rows of other classes are skipped
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads `frame,id,left,top,width,height,conf[,x,y,z]` records. For gt the
/// 8th and 9th fields are class and visibility. det forces id = -1.
/// Result is grouped by frame in ascending order, file order within a frame.
/// Throws ParseError for a malformed line or a duplicate (frame, id).
Sequence parse_mot(std::istream& in, MotKind kind, const ParseOptions& opts = {});
Sequence parse_mot_file(const std::string& path, MotKind kind, const ParseOptions& opts = {});

/// Writes `frame,id,left,top,w,h,conf,-1,-1,-1` lines, frames ascending and
/// ids ascending within a frame, coordinates with two decimals. conf uses the
/// shortest representation that round-trips.
/// Throws std::invalid_argument for an id below 1.
void write_results(std::ostream& out, const Sequence& seq);
std::string write_results(const Sequence& seq);
void write_results_file(const std::string& path, const Sequence& seq);

/// Writes detections (id -1) in the same layout, for generated det files.
void write_detections(std::ostream& out, const Sequence& seq);
/// Writes GT records `frame,id,left,top,w,h,1,class,visibility`.
void write_gt(std::ostream& out, const Sequence& seq);

Sequence to_sequence(const std::vector<FrameResult>& frames);

/// Serves recorded detections to the tracker, in file order per frame.
class ReplayDetector final : public Detector {
 public:
  /// num_frames <= 0 means "up to the last frame present".
  explicit ReplayDetector(Sequence dets, int num_frames = 0);
  /// Throws std::out_of_range for a frame outside [1, num_frames()].
  std::vector<Detection> detect(int frame) override;
  [[nodiscard]] int num_frames() const { return num_frames_; }

 private:
  Sequence dets_;
  int num_frames_ = 0;
};

}  // namespace transtrack::io
