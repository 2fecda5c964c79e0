#pragma once

// Exhaustive reference decoder. Enumerates every entry frame and every
// admissible state sequence explicitly; exponential, test use only.

#include <cstddef>
#include <vector>

#include "cdckws/posteriorgram.hpp"
#include "cdckws/trellis.hpp"

namespace cdckws::oracle {

inline constexpr std::size_t kMaxFrames = 12;
inline constexpr std::size_t kMaxTokens = 4;

struct ExplicitPath {
  std::size_t entry_frame = 0;        // 1-based
  std::vector<std::size_t> states;    // 0-based state per frame entry_frame..end
  double log_score = 0.0;
  std::size_t length() const noexcept { return states.size(); }
};

/// All paths that end in a terminal state at frame `t` (1-based). The entry
/// frame is the last frame the path spends in one of the two entry states.
std::vector<ExplicitPath> enumerate_paths(const PosteriorGram& pg, const KeywordSpec& spec,
                                          const DecoderConfig& config, std::size_t t);

/// Throws InstanceTooLarge beyond kMaxFrames frames or kMaxTokens tokens.
std::vector<FrameScore> oracle_decode(const PosteriorGram& pg, const KeywordSpec& spec,
                                      const DecoderConfig& config);

}  // namespace cdckws::oracle
