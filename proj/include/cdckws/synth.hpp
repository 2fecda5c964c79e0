#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cdckws/io.hpp"
#include "cdckws/posteriorgram.hpp"

namespace cdckws::synth {

/// Dual-branch posteriorgram generator. Dominance is the posterior mass of the
/// aligned keyword token; branch correlation is the weight of the main branch
/// when mixing the intermediate branch with independent perturbation frames.
struct SynthConfig {
  std::size_t vocab_size = 71;
  double frame_ms = kDefaultFrameMs;
  std::vector<TokenId> keyword;

  std::size_t num_pos = 100;
  std::size_t num_neg = 100;
  double neg_duration_s = 30.0;  // per negative utterance

  std::vector<double> dominance_tiers{0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
  // Bucket label per tier; nullopt is the clean (+inf) bucket.
  std::vector<std::optional<double>> tier_snr{-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, std::nullopt};

  double blank_mass = 0.7;         // background frames
  double speech_blank_mass = 0.2;  // perturbation near confusable spans
  double noise_temp = 1.0;
  double branch_corr_pos = 0.95;
  double branch_corr_neg = 0.1;
  double branch_corr_bg = 0.95;  // negatives away from any confusable span
  double confusable_rate = 0.5;
  double partial_rate = 0.5;  // share of confusables that are a partial keyword
  double timeout_s = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t timeout_frames() const;
};

struct GroundTruth {
  std::string id;
  bool keyword_present = false;
  std::optional<std::pair<std::size_t, std::size_t>> keyword_span;  // 1-based inclusive
  std::optional<double> snr_db;
  double dominance = 0.0;
  bool confusable = false;
};

struct SynthUtterance {
  PosteriorGram main;
  PosteriorGram inter;
  GroundTruth truth;
};

using Rng = std::mt19937_64;

/// Stream derived from (seed, kind, index) so generation order does not matter.
Rng utterance_rng(std::uint64_t seed, bool positive, std::size_t index);

/// Throws SpanTooLong when the sampled keyword layout exceeds the timeout;
/// callers redraw.
SynthUtterance synth_positive(const SynthConfig& config, double dominance, Rng& rng);
SynthUtterance synth_negative(const SynthConfig& config, double dominance, Rng& rng);

/// Positive `index` uses tier index % tiers; negatives draw a tier at random.
SynthUtterance make_positive(const SynthConfig& config, std::size_t index);
SynthUtterance make_negative(const SynthConfig& config, std::size_t index);

std::vector<SynthUtterance> generate_corpus(const SynthConfig& config, std::size_t threads = 1);

/// Writes <id>.main.kwsp / <id>.inter.kwsp, manifest.jsonl, phones.txt and lexicon.txt.
io::Manifest synth_corpus(const SynthConfig& config, const std::filesystem::path& out_dir,
                          std::size_t threads = 1);

/// FNV-1a over the manifest text and every referenced file, in manifest order.
std::uint64_t corpus_digest(const std::filesystem::path& manifest_path);

/// Small CMU-style lexicon that covers the demo keyword "HEY SNIPS".
std::string demo_lexicon_text();
inline constexpr const char* kDemoKeyword = "HEY SNIPS";

}  // namespace cdckws::synth
