#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "cdckws/posteriorgram.hpp"
#include "cdckws/trellis.hpp"

namespace cdckws {

enum class StreamRole { Init, Inter, Cdc, Refine };

/// Per-frame linear scores in [0, 1].
struct ScoreStream {
  std::vector<double> scores;
  StreamRole role = StreamRole::Init;

  std::size_t size() const noexcept { return scores.size(); }
  double peak() const;
};

enum class Similarity { Cosine };

struct CdcConfig {
  std::size_t l_his = 0;
  std::size_t l_fut = 30;
  Similarity similarity = Similarity::Cosine;

  /// Throws InvalidConfig when the window covers fewer than two frames.
  void validate() const;
  double added_latency_ms(double frame_ms = kDefaultFrameMs) const {
    return static_cast<double>(l_fut) * frame_ms;
  }
};

/// exp(score_log) clamped to [0, 1]; -inf maps to 0.
ScoreStream to_linear_unit(std::span<const FrameScore> frame_scores,
                           StreamRole role = StreamRole::Init);

/// Cosine similarity of two equal-length non-negative vectors, 0 when either is all zero.
double window_cosine(std::span<const double> a, std::span<const double> b);

ScoreStream cdc_scores(const ScoreStream& init, const ScoreStream& inter, const CdcConfig& config);

/// Elementwise (init + cdc) / 2.
ScoreStream refine(const ScoreStream& init, const ScoreStream& cdc);

struct RefinedFrame {
  std::size_t t = 0;           // 1-based frame the score belongs to
  std::size_t emitted_at = 0;  // frames consumed when it was emitted
  double cdc = 0.0;
  double refined = 0.0;
};

/// Frame-by-frame refinement. Frame t is emitted as soon as frame t + l_fut has
/// been consumed (or at finish() for the stream tail) and matches the batch
/// cdc_scores/refine result bit for bit.
class StreamingRefiner {
 public:
  explicit StreamingRefiner(CdcConfig config);

  /// Consumes one frame from each branch; returns the frames that became ready.
  std::vector<RefinedFrame> push(double init, double inter);
  /// Flushes frames whose future window was truncated by the end of the stream.
  std::vector<RefinedFrame> finish();

  std::size_t consumed() const noexcept { return consumed_; }
  /// Largest emitted_at - t observed over frames that were not flushed by finish().
  std::size_t max_added_delay_frames() const noexcept { return max_delay_; }

 private:
  RefinedFrame emit(std::size_t t, std::size_t last);

  CdcConfig config_;
  std::deque<double> init_;
  std::deque<double> inter_;
  std::size_t first_ = 1;  // frame index of init_.front()
  std::size_t consumed_ = 0;
  std::size_t next_emit_ = 1;
  std::size_t max_delay_ = 0;
  std::vector<double> scratch_a_, scratch_b_;
};

}  // namespace cdckws
