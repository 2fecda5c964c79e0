#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cdckws/posteriorgram.hpp"

namespace cdckws {

struct DetectionEvent {
  std::size_t t = 0;  // 1-based frame
  double time_s = 0.0;
  double score = 0.0;
};

struct DetectConfig {
  double threshold = 0.5;
  double lockout_s = 3.0;

  void validate() const;
  std::size_t lockout_frames(double frame_ms = kDefaultFrameMs) const;
};

/// Fires at the first frame with score >= threshold, then stays silent for
/// lockout_frames frames.
std::vector<DetectionEvent> detect_events(std::span<const double> scores, const DetectConfig& config,
                                          double frame_ms = kDefaultFrameMs);

/// Same rule, counting only. Used by threshold searches.
std::size_t count_events(std::span<const double> scores, double threshold, std::size_t lockout_frames);

}  // namespace cdckws
