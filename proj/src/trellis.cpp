#include "cdckws/trellis.hpp"

#include <cmath>
#include <string>

#include "cdckws/error.hpp"

namespace cdckws {

namespace {

// Lexicographic comparison on (score, start): equal scores fall back to the
// start frame according to the tie-break rule.
bool better(double a, std::size_t a_start, double b, std::size_t b_start, TieBreak tb) {
  if (a != b) return a > b;
  return tb == TieBreak::PreferShorter ? a_start > b_start : a_start < b_start;
}

}  // namespace

KeywordSpec expand_keyword(std::span<const TokenId> tokens, TokenId blank_id) {
  if (tokens.empty()) throw KwsError(ErrorCode::EmptyKeyword, "keyword has no tokens");
  for (TokenId tok : tokens)
    if (tok == blank_id)
      throw KwsError(ErrorCode::BlankInKeyword, "keyword contains the blank id " + std::to_string(blank_id));
  if (tokens.size() == 1)
    throw KwsError(ErrorCode::DegenerateKeyword, "single-token keywords always score the bonus");

  KeywordSpec spec;
  spec.blank = blank_id;
  spec.tokens.assign(tokens.begin(), tokens.end());
  spec.augmented.reserve(2 * tokens.size() + 1);
  spec.augmented.push_back(blank_id);
  for (TokenId tok : tokens) {
    spec.augmented.push_back(tok);
    spec.augmented.push_back(blank_id);
  }
  return spec;
}

std::size_t DecoderConfig::timeout_frames(double frame_ms) const {
  if (!(timeout_s > 0.0) || !(frame_ms > 0.0))
    throw KwsError(ErrorCode::InvalidConfig, "timeout and frame duration must be positive");
  const double frames = std::round(timeout_s * 1000.0 / frame_ms);
  if (frames < 1.0)
    throw KwsError(ErrorCode::InvalidConfig, "timeout shorter than half a frame");
  return static_cast<std::size_t>(frames);
}

DecoderState init_state(const KeywordSpec& spec) {
  DecoderState s;
  s.delta.assign(spec.num_states(), kNegInf);
  s.starts.assign(spec.num_states(), 0);
  s.t = 1;
  s.delta[0] = s.delta[1] = 0.0;
  s.starts[0] = s.starts[1] = 1;
  return s;
}

FrameScore score_state(const DecoderState& state, const KeywordSpec& spec,
                       const DecoderConfig& config, std::size_t timeout_frames) {
  const std::size_t last = spec.num_states() - 1;
  std::size_t best = last - 1;
  if (better(state.delta[last], state.starts[last], state.delta[best], state.starts[best],
             config.tie_break))
    best = last;

  FrameScore out;
  out.t = state.t;
  if (state.delta[best] == kNegInf) return out;

  out.raw_log = config.log_bonus + state.delta[best];
  out.path_len = state.t - state.starts[best] + 1;
  if (out.path_len <= timeout_frames) out.score_log = out.raw_log / static_cast<double>(out.path_len);
  return out;
}

FrameScore step(DecoderState& state, const KeywordSpec& spec, std::span<const float> frame_logp,
                const DecoderConfig& config, std::size_t timeout_frames) {
  for (TokenId tok : spec.augmented)
    if (tok >= frame_logp.size())
      throw KwsError(ErrorCode::DimensionMismatch,
                     "token " + std::to_string(tok) + " outside frame of size " +
                         std::to_string(frame_logp.size()));

  auto& delta = state.delta;
  auto& starts = state.starts;
  const auto& aug = spec.augmented;
  const TieBreak tb = config.tie_break;
  const std::size_t t = state.t + 1;

  // Descending order lets the column be updated in place: state k only reads k-2..k.
  for (std::size_t k = aug.size() - 1; k >= 2; --k) {
    double best = delta[k];
    std::size_t best_start = starts[k];
    if (better(delta[k - 1], starts[k - 1], best, best_start, tb)) {
      best = delta[k - 1];
      best_start = starts[k - 1];
    }
    const bool blank = aug[k] == spec.blank;
    if (!blank && aug[k] != aug[k - 2] &&
        better(delta[k - 2], starts[k - 2], best, best_start, tb)) {
      best = delta[k - 2];
      best_start = starts[k - 2];
    }
    if (best == kNegInf) {
      delta[k] = kNegInf;
      starts[k] = 0;
    } else {
      delta[k] = best + static_cast<double>(frame_logp[aug[k]]);
      starts[k] = delta[k] == kNegInf ? 0 : best_start;
    }
  }

  // Fresh competitors enter at every frame.
  delta[0] = 0.0;
  delta[1] = config.literal_entry ? 0.0 : static_cast<double>(frame_logp[aug[1]]);
  starts[0] = t;
  starts[1] = delta[1] == kNegInf ? 0 : t;
  state.t = t;

  return score_state(state, spec, config, timeout_frames);
}

KeywordDecoder::KeywordDecoder(KeywordSpec spec, DecoderConfig config, std::size_t vocab_size,
                               double frame_ms)
    : spec_(std::move(spec)),
      config_(config),
      vocab_size_(vocab_size),
      timeout_frames_(config.timeout_frames(frame_ms)) {
  if (spec_.num_states() < 5)
    throw KwsError(ErrorCode::DegenerateKeyword, "keyword spec must hold at least two tokens");
  for (TokenId tok : spec_.augmented)
    if (tok >= vocab_size_)
      throw KwsError(ErrorCode::DimensionMismatch,
                     "keyword token " + std::to_string(tok) + " >= vocab size " +
                         std::to_string(vocab_size_));
}

void KeywordDecoder::reset() {
  state_ = DecoderState{};
  started_ = false;
}

FrameScore KeywordDecoder::push(std::span<const float> frame_logp) {
  if (frame_logp.size() != vocab_size_)
    throw KwsError(ErrorCode::DimensionMismatch,
                   "frame has " + std::to_string(frame_logp.size()) + " entries, expected " +
                       std::to_string(vocab_size_));
  if (started_) return step(state_, spec_, frame_logp, config_, timeout_frames_);

  started_ = true;
  state_ = init_state(spec_);
  if (!config_.literal_entry) {
    state_.delta[1] = static_cast<double>(frame_logp[spec_.augmented[1]]);
    if (state_.delta[1] == kNegInf) state_.starts[1] = 0;
  }
  return score_state(state_, spec_, config_, timeout_frames_);
}

std::vector<FrameScore> decode_utterance(const PosteriorGram& pg, const KeywordSpec& spec,
                                         const DecoderConfig& config) {
  KeywordDecoder decoder(spec, config, pg.vocab_size(), pg.frame_ms());
  std::vector<FrameScore> scores;
  scores.reserve(pg.num_frames());
  for (std::size_t t = 0; t < pg.num_frames(); ++t) scores.push_back(decoder.push(pg.frame(t)));
  return scores;
}

}  // namespace cdckws
