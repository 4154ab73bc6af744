#pragma once

#include <vector>

#include "transtrack/geometry.hpp"

namespace transtrack {

/// One box of a MOTChallenge-style record. id is -1 for anonymous detections.
struct Annotation {
  int id = -1;
  Box box;  // pixel corner form
  double conf = 1.0;
  int class_id = 1;
  double visibility = 1.0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct FrameAnnotations {
  int frame = 1;  // 1-based
  std::vector<Annotation> entries;

  friend bool operator==(const FrameAnnotations&, const FrameAnnotations&) = default;
};

/// Frames in ascending order; frames without entries may be omitted.
using Sequence = std::vector<FrameAnnotations>;

}  // namespace transtrack
