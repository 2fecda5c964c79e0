#include "cdckws/oracle.hpp"

#include <string>

#include "cdckws/error.hpp"

namespace cdckws::oracle {

namespace {

struct Walker {
  const PosteriorGram& pg;
  const KeywordSpec& spec;
  std::size_t end_frame;  // 1-based
  std::vector<ExplicitPath>& out;
  std::vector<std::size_t> states;

  double emission(std::size_t frame, std::size_t state) const {
    return static_cast<double>(pg.at(frame - 1, spec.augmented[state]));
  }

  bool terminal(std::size_t state) const { return state + 2 >= spec.num_states(); }

  void extend(std::size_t entry, std::size_t frame, double acc) {
    const std::size_t cur = states.back();
    if (frame == end_frame) {
      if (terminal(cur) && acc != kNegInf) out.push_back({entry, states, acc});
      return;
    }
    const auto& aug = spec.augmented;
    for (std::size_t next = cur; next <= cur + 2 && next < aug.size(); ++next) {
      if (next < 2) continue;  // entry states are only occupied at the entry frame
      if (next == cur + 2 && (aug[next] == spec.blank || aug[next] == aug[cur])) continue;
      states.push_back(next);
      extend(entry, frame + 1, acc + emission(frame + 1, next));
      states.pop_back();
    }
  }
};

}  // namespace

std::vector<ExplicitPath> enumerate_paths(const PosteriorGram& pg, const KeywordSpec& spec,
                                          const DecoderConfig& config, std::size_t t) {
  std::vector<ExplicitPath> paths;
  Walker walker{pg, spec, t, paths, {}};
  for (std::size_t entry = 1; entry <= t; ++entry) {
    for (std::size_t state : {std::size_t{0}, std::size_t{1}}) {
      double init = 0.0;
      if (state == 1 && !config.literal_entry) init = walker.emission(entry, 1);
      walker.states.assign(1, state);
      walker.extend(entry, entry, init);
    }
  }
  return paths;
}

std::vector<FrameScore> oracle_decode(const PosteriorGram& pg, const KeywordSpec& spec,
                                      const DecoderConfig& config) {
  if (pg.num_frames() > kMaxFrames || spec.tokens.size() > kMaxTokens)
    throw KwsError(ErrorCode::InstanceTooLarge,
                   "oracle limited to " + std::to_string(kMaxFrames) + " frames and " +
                       std::to_string(kMaxTokens) + " tokens");
  for (TokenId tok : spec.augmented)
    if (tok >= pg.vocab_size()) throw KwsError(ErrorCode::DimensionMismatch, "token outside vocabulary");

  const std::size_t timeout = config.timeout_frames(pg.frame_ms());
  std::vector<FrameScore> scores;
  for (std::size_t t = 1; t <= pg.num_frames(); ++t) {
    FrameScore fs;
    fs.t = t;
    const ExplicitPath* best = nullptr;
    const auto paths = enumerate_paths(pg, spec, config, t);
    for (const auto& p : paths) {
      if (best == nullptr || p.log_score > best->log_score) {
        best = &p;
      } else if (p.log_score == best->log_score) {
        const bool shorter = p.length() < best->length();
        const bool longer = p.length() > best->length();
        if ((config.tie_break == TieBreak::PreferShorter && shorter) ||
            (config.tie_break == TieBreak::PreferLonger && longer))
          best = &p;
      }
    }
    if (best != nullptr) {
      fs.raw_log = config.log_bonus + best->log_score;
      fs.path_len = best->length();
      if (fs.path_len <= timeout) fs.score_log = fs.raw_log / static_cast<double>(fs.path_len);
    }
    scores.push_back(fs);
  }
  return scores;
}

}  // namespace cdckws::oracle
