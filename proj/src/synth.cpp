#include "cdckws/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cdckws/error.hpp"
#include "cdckws/parallel.hpp"

namespace cdckws::synth {

namespace fs = std::filesystem;

namespace {

// Raw-bit conversions keep corpora identical across standard libraries.
double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

using Frame = std::vector<double>;

Frame spread_frame(const SynthConfig& c, Rng& rng, double blank_mass) {
  Frame p(c.vocab_size);
  const double blank = std::clamp(blank_mass + 0.1 * (uniform(rng) - 0.5), 0.05, 0.99);
  double total = 0.0;
  for (std::size_t v = 1; v < p.size(); ++v) {
    p[v] = std::pow(-std::log1p(-uniform(rng)), 1.0 / c.noise_temp) + 1e-12;
    total += p[v];
  }
  for (std::size_t v = 1; v < p.size(); ++v) p[v] *= (1.0 - blank) / total;
  p[kBlank] = blank;
  return p;
}

Frame background_frame(const SynthConfig& c, Rng& rng) { return spread_frame(c, rng, c.blank_mass); }

Frame token_frame(const SynthConfig& c, Rng& rng, TokenId token, double dominance) {
  Frame p = background_frame(c, rng);
  const double mass = dominance + (1.0 - dominance) * 0.3 * uniform(rng);
  for (double& v : p) v *= 1.0 - mass;
  p[token] += mass;
  return p;
}

Frame mix(const Frame& main, const Frame& noise, double corr) {
  Frame out(main.size());
  double total = 0.0;
  for (std::size_t v = 0; v < main.size(); ++v) {
    out[v] = corr * main[v] + (1.0 - corr) * noise[v];
    total += out[v];
  }
  for (double& v : out) v /= total;
  return out;
}

void store(PosteriorGram& pg, std::size_t t, const Frame& p) {
  auto row = pg.frame(t);
  for (std::size_t v = 0; v < p.size(); ++v) row[v] = static_cast<float>(std::log(p[v]));
}

struct Layout {
  std::vector<std::pair<std::size_t, TokenId>> token_frames;  // 0-based frame offset within span
  std::size_t length = 0;
};

// Each token holds for 2-6 frames; an optional blank frame separates tokens and
// is mandatory between repeated tokens.
Layout sample_layout(std::span<const TokenId> tokens, Rng& rng) {
  Layout layout;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) pos += tokens[i] == tokens[i - 1] ? 1 : uniform_int(rng, 0, 1);
    const std::size_t run = uniform_int(rng, 2, 6);
    for (std::size_t r = 0; r < run; ++r) layout.token_frames.emplace_back(pos++, tokens[i]);
  }
  layout.length = pos;
  return layout;
}

// Builds both branches. Frames in [region_lo, region_hi) mix with `corr`, the
// rest with `corr_outside`. Inside the region of a negative the perturbation is
// speech-like (low blank mass), so the intermediate branch stops tracking the
// main branch once a false activation has fired.
SynthUtterance render(const SynthConfig& c, Rng& rng, std::size_t num_frames, std::size_t span_start,
                      const Layout* layout, double dominance, std::size_t region_lo, std::size_t region_hi,
                      double corr, double corr_outside, bool speech_in_region) {
  SynthUtterance u{PosteriorGram(num_frames, c.vocab_size, c.frame_ms),
                   PosteriorGram(num_frames, c.vocab_size, c.frame_ms), {}};
  std::vector<std::pair<bool, TokenId>> planned(num_frames, {false, kBlank});
  if (layout != nullptr)
    for (const auto& [off, tok] : layout->token_frames) planned[span_start + off] = {true, tok};

  for (std::size_t t = 0; t < num_frames; ++t) {
    const Frame main = planned[t].first ? token_frame(c, rng, planned[t].second, dominance)
                                        : background_frame(c, rng);
    const bool in_region = t >= region_lo && t < region_hi;
    const Frame noise = in_region && speech_in_region ? spread_frame(c, rng, c.speech_blank_mass)
                                                      : background_frame(c, rng);
    const double r = in_region ? corr : corr_outside;
    store(u.main, t, main);
    if (r >= 1.0) {
      std::copy(u.main.frame(t).begin(), u.main.frame(t).end(), u.inter.frame(t).begin());
    } else {
      store(u.inter, t, mix(main, noise, r));
    }
  }
  return u;
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string utterance_id(bool positive, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", positive ? "pos" : "neg", index);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (vocab_size < 3) throw KwsError(ErrorCode::InvalidConfig, "vocab_size must be >= 3");
  if (keyword.size() < 2) throw KwsError(ErrorCode::DegenerateKeyword, "keyword needs at least two tokens");
  for (TokenId t : keyword)
    if (t == kBlank || t >= vocab_size) throw KwsError(ErrorCode::InvalidConfig, "keyword token out of range");
  if (dominance_tiers.empty() || dominance_tiers.size() != tier_snr.size())
    throw KwsError(ErrorCode::InvalidConfig, "need one SNR label per dominance tier");
  for (double d : dominance_tiers)
    if (!(d > 0.0 && d <= 1.0)) throw KwsError(ErrorCode::InvalidConfig, "dominance must lie in (0, 1]");
  if (!(noise_temp > 0.0)) throw KwsError(ErrorCode::InvalidConfig, "noise_temp must be positive");
  for (double b : {blank_mass, speech_blank_mass})
    if (!(b > 0.0 && b < 1.0)) throw KwsError(ErrorCode::InvalidConfig, "blank masses must lie in (0, 1)");
  for (double r : {branch_corr_pos, branch_corr_neg, branch_corr_bg, confusable_rate, partial_rate})
    if (!(r >= 0.0 && r <= 1.0)) throw KwsError(ErrorCode::InvalidConfig, "rates and correlations must lie in [0, 1]");
  if (!(neg_duration_s > 0.0)) throw KwsError(ErrorCode::InvalidConfig, "neg_duration_s must be positive");
  if (!(frame_ms > 0.0)) throw KwsError(ErrorCode::InvalidConfig, "frame_ms must be positive");
}

std::size_t SynthConfig::timeout_frames() const {
  return static_cast<std::size_t>(std::max(1.0, std::round(timeout_s * 1000.0 / frame_ms)));
}

Rng utterance_rng(std::uint64_t seed, bool positive, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    positive ? 1u : 2u, static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return Rng(seq);
}

SynthUtterance synth_positive(const SynthConfig& c, double dominance, Rng& rng) {
  const Layout layout = sample_layout(c.keyword, rng);
  if (layout.length > c.timeout_frames())
    throw KwsError(ErrorCode::SpanTooLong, "keyword span of " + std::to_string(layout.length) +
                                               " frames exceeds the timeout");
  const std::size_t pre = uniform_int(rng, 30, 80);
  const std::size_t post = uniform_int(rng, 40, 100);
  const std::size_t num_frames = pre + layout.length + post;
  SynthUtterance u = render(c, rng, num_frames, pre, &layout, dominance, 0, num_frames,
                            c.branch_corr_pos, c.branch_corr_pos, false);
  u.truth.keyword_present = true;
  u.truth.keyword_span = std::make_pair(pre + 1, pre + layout.length);
  u.truth.dominance = dominance;
  return u;
}

SynthUtterance synth_negative(const SynthConfig& c, double dominance, Rng& rng) {
  const auto num_frames =
      static_cast<std::size_t>(std::max(1.0, std::round(c.neg_duration_s * 1000.0 / c.frame_ms)));
  constexpr std::size_t kLeadMargin = 20;
  const std::size_t trail_margin = c.timeout_frames();

  std::vector<TokenId> tokens = c.keyword;
  bool confusable = uniform(rng) < c.confusable_rate;
  if (confusable && uniform(rng) < c.partial_rate) {
    if (uniform(rng) < 0.5) {
      tokens.pop_back();
    } else {
      const std::size_t pos = uniform_int(rng, 1, tokens.size() - 1);
      TokenId sub = tokens[pos];
      while (sub == tokens[pos]) sub = static_cast<TokenId>(uniform_int(rng, 1, c.vocab_size - 1));
      tokens[pos] = sub;
    }
  }
  const Layout layout = sample_layout(tokens, rng);
  if (num_frames < layout.length + 2 * kLeadMargin) confusable = false;

  if (!confusable) {
    SynthUtterance u = render(c, rng, num_frames, 0, nullptr, dominance, 0, 0, c.branch_corr_neg,
                              c.branch_corr_bg, false);
    return u;
  }
  const std::size_t start = uniform_int(rng, kLeadMargin, num_frames - layout.length - kLeadMargin);
  // The branches agree up to the end of the false activation and diverge after it.
  const std::size_t region_lo = start + layout.length;
  const std::size_t region_hi = std::min(num_frames, start + layout.length + trail_margin);
  SynthUtterance u = render(c, rng, num_frames, start, &layout, dominance, region_lo, region_hi,
                            c.branch_corr_neg, c.branch_corr_bg, true);
  u.truth.confusable = true;
  u.truth.keyword_span = std::make_pair(start + 1, start + layout.length);
  u.truth.dominance = dominance;
  return u;
}

SynthUtterance make_positive(const SynthConfig& c, std::size_t index) {
  Rng rng = utterance_rng(c.seed, true, index);
  const std::size_t tier = index % c.dominance_tiers.size();
  for (int attempt = 0;; ++attempt) {
    try {
      SynthUtterance u = synth_positive(c, c.dominance_tiers[tier], rng);
      u.truth.id = utterance_id(true, index);
      u.truth.snr_db = c.tier_snr[tier];
      return u;
    } catch (const KwsError& e) {
      if (e.code() != ErrorCode::SpanTooLong || attempt >= 100) throw;
    }
  }
}

SynthUtterance make_negative(const SynthConfig& c, std::size_t index) {
  Rng rng = utterance_rng(c.seed, false, index);
  const std::size_t tier = uniform_int(rng, 0, c.dominance_tiers.size() - 1);
  SynthUtterance u = synth_negative(c, c.dominance_tiers[tier], rng);
  u.truth.id = utterance_id(false, index);
  u.truth.snr_db = c.tier_snr[tier];
  return u;
}

std::vector<SynthUtterance> generate_corpus(const SynthConfig& c, std::size_t threads) {
  c.validate();
  std::vector<SynthUtterance> corpus(c.num_pos + c.num_neg);
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    corpus[i] = i < c.num_pos ? make_positive(c, i) : make_negative(c, i - c.num_pos);
  });
  return corpus;
}

io::Manifest synth_corpus(const SynthConfig& c, const fs::path& out_dir, std::size_t threads) {
  c.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw KwsError(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  const std::size_t n = c.num_pos + c.num_neg;
  io::Manifest manifest(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const bool positive = i < c.num_pos;
    SynthUtterance u = positive ? make_positive(c, i) : make_negative(c, i - c.num_pos);
    io::ManifestEntry& e = manifest[i];
    e.id = u.truth.id;
    e.main_path = out_dir / (e.id + ".main.kwsp");
    e.inter_path = out_dir / (e.id + ".inter.kwsp");
    e.label = positive ? Label::Positive : Label::Negative;
    e.snr_db = u.truth.snr_db;
    e.duration_s = static_cast<double>(u.main.num_frames()) * c.frame_ms / 1000.0;
    io::save_posteriors(u.main, e.main_path);
    io::save_posteriors(u.inter, *e.inter_path);
  });
  io::save_manifest(manifest, out_dir / "manifest.jsonl");
  io::write_text(out_dir / "phones.txt", io::PhoneTable::cmu_default().to_text());
  io::write_text(out_dir / "lexicon.txt", demo_lexicon_text());
  return manifest;
}

std::uint64_t corpus_digest(const fs::path& manifest_path) {
  const std::string text = io::read_text(manifest_path);
  std::uint64_t h = fnv1a(0xcbf29ce484222325ULL, text);
  for (const auto& e : io::parse_manifest(text, manifest_path.parent_path())) {
    h = fnv1a(h, io::read_text(e.main_path));
    if (e.inter_path) h = fnv1a(h, io::read_text(*e.inter_path));
  }
  return h;
}

std::string demo_lexicon_text() {
  return ";;; demo pronunciations (CMU style)\n"
         "HEY HH EY1\n"
         "HELLO HH AH0 L OW1\n"
         "HELLO(1) HH EH0 L OW1\n"
         "SNIPS S N IH1 P S\n"
         "SNAP S N AE1 P\n"
         "SNIP S N IH1 P\n"
         "OK OW2 K EY1\n"
         "COMPUTER K AH0 M P Y UW1 T ER0\n";
}

}  // namespace cdckws::synth
