#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cdckws {

using TokenId = std::uint32_t;
inline constexpr TokenId kBlank = 0;
inline constexpr double kDefaultFrameMs = 30.0;

/// Row-major T x V matrix of natural-log posteriors. Token 0 is the CTC blank.
class PosteriorGram {
 public:
  PosteriorGram() = default;
  PosteriorGram(std::size_t num_frames, std::size_t vocab_size, double frame_ms = kDefaultFrameMs);
  PosteriorGram(std::size_t num_frames, std::size_t vocab_size, std::vector<float> logp,
                double frame_ms = kDefaultFrameMs);

  std::size_t num_frames() const noexcept { return num_frames_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  double frame_ms() const noexcept { return frame_ms_; }
  void set_frame_ms(double ms) { frame_ms_ = ms; }

  std::span<const float> frame(std::size_t t) const {
    return {logp_.data() + t * vocab_size_, vocab_size_};
  }
  std::span<float> frame(std::size_t t) { return {logp_.data() + t * vocab_size_, vocab_size_}; }

  float at(std::size_t t, std::size_t v) const { return logp_[t * vocab_size_ + v]; }
  float& at(std::size_t t, std::size_t v) { return logp_[t * vocab_size_ + v]; }

  const std::vector<float>& data() const noexcept { return logp_; }
  std::vector<float>& data() noexcept { return logp_; }

  /// Largest |sum_v exp(logp) - 1| over all frames.
  double max_normalization_error() const;
  /// True when every entry is <= 0 and every frame sums to 1 within tol.
  bool is_normalized(double tol = 1e-3) const;

  friend bool operator==(const PosteriorGram&, const PosteriorGram&) = default;

 private:
  std::size_t num_frames_ = 0;
  std::size_t vocab_size_ = 0;
  std::vector<float> logp_;
  double frame_ms_ = kDefaultFrameMs;
};

}  // namespace cdckws
