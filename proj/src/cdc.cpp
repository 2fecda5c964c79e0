#include "cdckws/cdc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdckws/error.hpp"

namespace cdckws {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b)
    throw KwsError(ErrorCode::LengthMismatch,
                   "score streams differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

// Inclusive 0-based window [t - l_his, t + l_fut] truncated to [0, n).
std::pair<std::size_t, std::size_t> window(std::size_t t, std::size_t n, const CdcConfig& c) {
  const std::size_t lo = t >= c.l_his ? t - c.l_his : 0;
  const std::size_t hi = std::min(n - 1, t + c.l_fut);
  return {lo, hi};
}

}  // namespace

double ScoreStream::peak() const {
  if (scores.empty()) return 0.0;
  return *std::max_element(scores.begin(), scores.end());
}

void CdcConfig::validate() const {
  if (l_his + l_fut < 2)
    throw KwsError(ErrorCode::InvalidConfig, "l_his + l_fut must be at least 2");
}

ScoreStream to_linear_unit(std::span<const FrameScore> frame_scores, StreamRole role) {
  ScoreStream out;
  out.role = role;
  out.scores.reserve(frame_scores.size());
  for (const auto& fs : frame_scores) {
    const double v = fs.score_log == kNegInf ? 0.0 : std::exp(fs.score_log);
    out.scores.push_back(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

double window_cosine(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size());
  double max_a = 0.0, max_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    max_a = std::max(max_a, a[i]);
    max_b = std::max(max_b, b[i]);
  }
  if (max_a <= 0.0 || max_b <= 0.0) return 0.0;

  // Scaling by the window maximum keeps tiny scores from underflowing the norms.
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] / max_a;
    const double y = b[i] / max_b;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

ScoreStream cdc_scores(const ScoreStream& init, const ScoreStream& inter, const CdcConfig& config) {
  config.validate();
  require_same_length(init.size(), inter.size());
  const std::size_t n = init.size();
  ScoreStream out;
  out.role = StreamRole::Cdc;
  out.scores.resize(n);
  const std::span<const double> a(init.scores), b(inter.scores);
  for (std::size_t t = 0; t < n; ++t) {
    const auto [lo, hi] = window(t, n, config);
    out.scores[t] = window_cosine(a.subspan(lo, hi - lo + 1), b.subspan(lo, hi - lo + 1));
  }
  return out;
}

ScoreStream refine(const ScoreStream& init, const ScoreStream& cdc) {
  require_same_length(init.size(), cdc.size());
  ScoreStream out;
  out.role = StreamRole::Refine;
  out.scores.resize(init.size());
  for (std::size_t t = 0; t < init.size(); ++t)
    out.scores[t] = std::clamp((init.scores[t] + cdc.scores[t]) / 2.0, 0.0, 1.0);
  return out;
}

StreamingRefiner::StreamingRefiner(CdcConfig config) : config_(config) { config_.validate(); }

RefinedFrame StreamingRefiner::emit(std::size_t t, std::size_t last) {
  const std::size_t lo = t > config_.l_his ? t - config_.l_his : 1;
  scratch_a_.assign(init_.begin() + static_cast<std::ptrdiff_t>(lo - first_),
                    init_.begin() + static_cast<std::ptrdiff_t>(last - first_ + 1));
  scratch_b_.assign(inter_.begin() + static_cast<std::ptrdiff_t>(lo - first_),
                    inter_.begin() + static_cast<std::ptrdiff_t>(last - first_ + 1));
  RefinedFrame f;
  f.t = t;
  f.emitted_at = consumed_;
  f.cdc = window_cosine(scratch_a_, scratch_b_);
  const double init = init_[t - first_];
  f.refined = std::clamp((init + f.cdc) / 2.0, 0.0, 1.0);

  // Drop history no later frame can reach.
  const std::size_t keep_from = t + 1 > config_.l_his ? t + 1 - config_.l_his : 1;
  while (first_ < keep_from && !init_.empty()) {
    init_.pop_front();
    inter_.pop_front();
    ++first_;
  }
  return f;
}

std::vector<RefinedFrame> StreamingRefiner::push(double init, double inter) {
  init_.push_back(init);
  inter_.push_back(inter);
  ++consumed_;
  std::vector<RefinedFrame> ready;
  while (next_emit_ + config_.l_fut <= consumed_) {
    ready.push_back(emit(next_emit_, next_emit_ + config_.l_fut));
    max_delay_ = std::max(max_delay_, ready.back().emitted_at - ready.back().t);
    ++next_emit_;
  }
  return ready;
}

std::vector<RefinedFrame> StreamingRefiner::finish() {
  std::vector<RefinedFrame> ready;
  while (next_emit_ <= consumed_) {
    ready.push_back(emit(next_emit_, consumed_));
    ++next_emit_;
  }
  return ready;
}

}  // namespace cdckws
