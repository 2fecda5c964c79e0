#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cdckws/posteriorgram.hpp"

namespace cdckws {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Keyword token sequence plus its blank-augmented form
/// [blank, y1, blank, y2, ..., yU, blank].
struct KeywordSpec {
  std::vector<TokenId> tokens;
  std::vector<TokenId> augmented;
  TokenId blank = kBlank;

  std::size_t num_states() const noexcept { return augmented.size(); }
};

/// Throws EmptyKeyword, DegenerateKeyword (single token) or BlankInKeyword.
KeywordSpec expand_keyword(std::span<const TokenId> tokens, TokenId blank_id = kBlank);

enum class TieBreak { PreferShorter, PreferLonger };

struct DecoderConfig {
  double log_bonus = 3.0;   // natural log of the score bonus (e^3)
  double timeout_s = 3.0;
  // When false the y1 entry state consumes log p_t(y1) instead of being pinned to 0.
  bool literal_entry = true;
  TieBreak tie_break = TieBreak::PreferShorter;

  /// round(timeout_s * 1000 / frame_ms); throws InvalidConfig when < 1.
  std::size_t timeout_frames(double frame_ms = kDefaultFrameMs) const;
};

/// One trellis column. Frame indices are 1-based to match the score stream.
struct DecoderState {
  std::vector<double> delta;
  std::vector<std::size_t> starts;
  std::size_t t = 0;
};

struct FrameScore {
  std::size_t t = 0;
  double score_log = kNegInf;
  std::size_t path_len = 0;  // 0 when no terminal state is reachable
  double raw_log = kNegInf;  // log_bonus + best terminal log score, before timeout/normalization
};

/// State after frame 1 in literal mode: entry states at log 1, the rest unreachable.
DecoderState init_state(const KeywordSpec& spec);

/// Advances the column by one frame and scores the result.
FrameScore step(DecoderState& state, const KeywordSpec& spec, std::span<const float> frame_logp,
                const DecoderConfig& config, std::size_t timeout_frames);

/// Scores the current column of `state` without advancing it.
FrameScore score_state(const DecoderState& state, const KeywordSpec& spec,
                       const DecoderConfig& config, std::size_t timeout_frames);

/// Streaming front end: push one frame at a time, get one score back.
class KeywordDecoder {
 public:
  KeywordDecoder(KeywordSpec spec, DecoderConfig config, std::size_t vocab_size,
                 double frame_ms = kDefaultFrameMs);

  FrameScore push(std::span<const float> frame_logp);
  void reset();

  const DecoderState& state() const noexcept { return state_; }
  const KeywordSpec& spec() const noexcept { return spec_; }
  std::size_t timeout_frames() const noexcept { return timeout_frames_; }

 private:
  KeywordSpec spec_;
  DecoderConfig config_;
  std::size_t vocab_size_;
  std::size_t timeout_frames_;
  DecoderState state_;
  bool started_ = false;
};

std::vector<FrameScore> decode_utterance(const PosteriorGram& pg, const KeywordSpec& spec,
                                         const DecoderConfig& config);

}  // namespace cdckws
