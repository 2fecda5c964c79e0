#include "cdckws/posteriorgram.hpp"

#include <algorithm>
#include <cmath>

#include "cdckws/error.hpp"

namespace cdckws {

PosteriorGram::PosteriorGram(std::size_t num_frames, std::size_t vocab_size, double frame_ms)
    : PosteriorGram(num_frames, vocab_size,
                    std::vector<float>(num_frames * vocab_size, -INFINITY), frame_ms) {}

PosteriorGram::PosteriorGram(std::size_t num_frames, std::size_t vocab_size,
                             std::vector<float> logp, double frame_ms)
    : num_frames_(num_frames), vocab_size_(vocab_size), logp_(std::move(logp)), frame_ms_(frame_ms) {
  if (vocab_size_ == 0) throw KwsError(ErrorCode::DimensionMismatch, "vocab_size must be positive");
  if (logp_.size() != num_frames_ * vocab_size_)
    throw KwsError(ErrorCode::DimensionMismatch,
                   "expected " + std::to_string(num_frames_ * vocab_size_) + " values, got " +
                       std::to_string(logp_.size()));
  if (!(frame_ms_ > 0.0)) throw KwsError(ErrorCode::InvalidConfig, "frame duration must be positive");
}

double PosteriorGram::max_normalization_error() const {
  double worst = 0.0;
  for (std::size_t t = 0; t < num_frames_; ++t) {
    double sum = 0.0;
    for (float v : frame(t)) sum += std::exp(static_cast<double>(v));
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

bool PosteriorGram::is_normalized(double tol) const {
  if (std::any_of(logp_.begin(), logp_.end(), [](float v) { return v > 0.0f; })) return false;
  return max_normalization_error() <= tol;
}

}  // namespace cdckws
