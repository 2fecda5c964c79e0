#include "cdckws/detect.hpp"

#include <cmath>

#include "cdckws/error.hpp"

namespace cdckws {

void DetectConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw KwsError(ErrorCode::InvalidConfig, "threshold must lie in [0, 1]");
  if (!(lockout_s > 0.0)) throw KwsError(ErrorCode::InvalidConfig, "lockout must be positive");
}

std::size_t DetectConfig::lockout_frames(double frame_ms) const {
  const double frames = std::round(lockout_s * 1000.0 / frame_ms);
  return frames < 1.0 ? 1 : static_cast<std::size_t>(frames);
}

std::vector<DetectionEvent> detect_events(std::span<const double> scores, const DetectConfig& config,
                                          double frame_ms) {
  config.validate();
  const std::size_t lockout = config.lockout_frames(frame_ms);
  std::vector<DetectionEvent> events;
  std::size_t next_allowed = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i < next_allowed || !(scores[i] >= config.threshold)) continue;
    events.push_back({i + 1, static_cast<double>(i + 1) * frame_ms / 1000.0, scores[i]});
    next_allowed = i + lockout;
  }
  return events;
}

std::size_t count_events(std::span<const double> scores, double threshold, std::size_t lockout_frames) {
  std::size_t count = 0;
  std::size_t next_allowed = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i < next_allowed || !(scores[i] >= threshold)) continue;
    ++count;
    next_allowed = i + lockout_frames;
  }
  return count;
}

}  // namespace cdckws
