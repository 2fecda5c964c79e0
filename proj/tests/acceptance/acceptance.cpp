// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "cdckws/cdc.hpp"
#include "cdckws/detect.hpp"
#include "cdckws/eval.hpp"
#include "cdckws/io.hpp"
#include "cdckws/oracle.hpp"
#include "cdckws/parallel.hpp"
#include "cdckws/synth.hpp"
#include "cdckws/trellis.hpp"
#include "test_support.hpp"

using namespace cdckws;
using cdckws::testing::Rng;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

bool bit_equal(const FrameScore& a, const FrameScore& b) {
  return std::memcmp(&a.score_log, &b.score_log, sizeof(double)) == 0 &&
         std::memcmp(&a.raw_log, &b.raw_log, sizeof(double)) == 0 && a.path_len == b.path_len && a.t == b.t;
}

std::vector<TokenId> demo_tokens() {
  return io::keyword_to_tokens(synth::kDemoKeyword, io::Lexicon::parse(synth::demo_lexicon_text()),
                               io::PhoneTable::cmu_default());
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  Rng rng(20240601);
  std::size_t instances = 0, mismatches = 0, finite = 0;
  double worst = 0.0;
  for (int mode = 0; mode < 4; ++mode) {
    DecoderConfig config;
    config.literal_entry = mode % 2 == 0;
    config.tie_break = mode < 2 ? TieBreak::PreferShorter : TieBreak::PreferLonger;
    for (int i = 0; i < 400; ++i) {
      const std::size_t T = cdckws::testing::uniform_int(rng, 1, 8);
      const std::size_t V = cdckws::testing::uniform_int(rng, 2, 5);
      const std::size_t U = cdckws::testing::uniform_int(rng, 2, 3);
      // Short timeouts half the time so the timeout rule is exercised too.
      config.timeout_s = i % 2 == 0 ? 3.0 : 0.03 * static_cast<double>(cdckws::testing::uniform_int(rng, 2, 7));
      const auto pg = cdckws::testing::random_posteriorgram(rng, T, V, i % 3 == 0);
      const auto spec = expand_keyword(cdckws::testing::random_keyword(rng, U, V));
      const auto got = decode_utterance(pg, spec, config);
      const auto want = oracle::oracle_decode(pg, spec, config);
      ++instances;
      bool ok = got.size() == want.size();
      for (std::size_t t = 0; ok && t < T; ++t) {
        if (std::isfinite(want[t].score_log)) {
          ++finite;
          worst = std::max(worst, std::abs(got[t].score_log - want[t].score_log));
        }
        ok = cdckws::testing::same_score(got[t].score_log, want[t].score_log, 1e-6) &&
             got[t].path_len == want[t].path_len;
      }
      if (!ok) ++mismatches;
    }
  }
  const double elapsed = seconds_since(start);
  return {instances >= 1000 && mismatches == 0 && elapsed < 60.0,
          fmt("%zu instances, %zu finite frames, %zu mismatches, max |diff| %.2e, %.2f s", instances, finite,
              mismatches, worst, elapsed)};
}

Outcome streaming_equals_batch() {
  Rng rng(77);
  synth::SynthConfig sc;
  sc.keyword = demo_tokens();
  sc.seed = 77;
  std::size_t utterances = 0, split_checks = 0, failures = 0, finite_frames = 0;
  for (int i = 0; i < 100; ++i) {
    PosteriorGram pg;
    KeywordSpec spec;
    DecoderConfig config;
    config.literal_entry = i % 2 == 0;
    config.tie_break = (i / 2) % 2 == 0 ? TieBreak::PreferShorter : TieBreak::PreferLonger;
    if (i % 2 == 0) {
      // Half synthetic keyword utterances so plenty of frames score finitely.
      pg = synth::make_positive(sc, static_cast<std::size_t>(i)).main;
      spec = expand_keyword(sc.keyword);
    } else {
      const std::size_t V = cdckws::testing::uniform_int(rng, 3, 71);
      pg = cdckws::testing::random_posteriorgram(rng, cdckws::testing::uniform_int(rng, 1, 500), V);
      spec = expand_keyword(cdckws::testing::random_keyword(rng, cdckws::testing::uniform_int(rng, 2, 10), V));
      config.timeout_s = 0.03 * static_cast<double>(cdckws::testing::uniform_int(rng, 2, 120));
    }
    if (pg.num_frames() > 500) continue;
    ++utterances;
    const auto batch = decode_utterance(pg, spec, config);
    KeywordDecoder decoder(spec, config, pg.vocab_size(), pg.frame_ms());
    bool ok = true;
    for (std::size_t t = 0; t < pg.num_frames(); ++t) {
      ok &= bit_equal(decoder.push(pg.frame(t)), batch[t]);
      finite_frames += std::isfinite(batch[t].score_log);
    }
    const std::size_t V = pg.vocab_size();
    for (std::size_t k = 1; k <= pg.num_frames(); ++k) {
      PosteriorGram prefix(k, V, std::vector<float>(pg.data().begin(), pg.data().begin() + k * V));
      const auto head = decode_utterance(prefix, spec, config);
      for (std::size_t t = 0; t < k; ++t) ok &= bit_equal(head[t], batch[t]);
      ++split_checks;
    }
    if (!ok) ++failures;
  }
  return {utterances == 100 && failures == 0,
          fmt("%zu utterances, %zu split points, %zu finite frames, %zu failures", utterances, split_checks,
              finite_frames, failures)};
}

// Keyword y1..yU over one-hot frames: y1..y(U-1) on frames 1..U-1, blanks, yU
// on frame K. The only completing path starts at frame 1 and spans K frames.
PosteriorGram timeout_instance(std::size_t U, std::size_t K, std::size_t V) {
  PosteriorGram pg(K + 20, V);
  for (std::size_t t = 0; t < pg.num_frames(); ++t) {
    TokenId tok = kBlank;
    if (t + 1 < U) tok = static_cast<TokenId>(t + 1);
    if (t + 1 == K) tok = static_cast<TokenId>(U);
    for (std::size_t v = 0; v < V; ++v)
      pg.at(t, v) = v == tok ? 0.0f : -std::numeric_limits<float>::infinity();
  }
  return pg;
}

Outcome timeout_rule() {
  const DecoderConfig defaults;
  const std::size_t limit = defaults.timeout_frames(kDefaultFrameMs);
  std::size_t cases = 0, failures = 0;
  for (std::size_t U : {2u, 3u, 5u, 10u}) {
    std::vector<TokenId> tokens(U);
    for (std::size_t i = 0; i < U; ++i) tokens[i] = static_cast<TokenId>(i + 1);
    const auto spec = expand_keyword(tokens);
    for (bool literal : {true, false}) {
      DecoderConfig config;
      config.literal_entry = literal;
      // With the literal entry a U = 2 path can idle in the pinned y1 state
      // until y2 arrives, so there the span is always two frames.
      const bool idles = U == 2 && literal;
      const std::size_t fits = idles ? 2 : limit;
      if (!idles) {
        ++cases;
        bool all_dead = true;
        for (const auto& fs : decode_utterance(timeout_instance(U, limit + 1, U + 1), spec, config))
          all_dead &= fs.score_log == kNegInf;
        if (!all_dead) ++failures;
      }
      ++cases;
      const auto ok = decode_utterance(timeout_instance(U, fits, U + 1), spec, config);
      const auto& at = ok[fits - 1];
      if (!(std::isfinite(at.score_log) && at.path_len == fits)) ++failures;
    }
  }
  return {limit == 100 && failures == 0,
          fmt("timeout_frames = %zu, %zu constructed cases (spans of %zu and %zu frames), %zu failures", limit, cases,
              limit + 1, limit, failures)};
}

struct DecodedCorpus {
  std::vector<ScoreStream> init, inter;
  std::vector<UtteranceRecord> records;
};

DecodedCorpus decode_corpus(const synth::SynthConfig& sc) {
  const auto corpus = synth::generate_corpus(sc, worker_count());
  const auto spec = expand_keyword(sc.keyword);
  DecodedCorpus out;
  out.init.resize(corpus.size());
  out.inter.resize(corpus.size());
  out.records.resize(corpus.size());
  parallel_for(corpus.size(), worker_count(), [&](std::size_t i) {
    const auto& u = corpus[i];
    out.init[i] = to_linear_unit(decode_utterance(u.main, spec, {}), StreamRole::Init);
    out.inter[i] = to_linear_unit(decode_utterance(u.inter, spec, {}), StreamRole::Inter);
    out.records[i] = {u.truth.id, u.truth.keyword_present ? Label::Positive : Label::Negative, u.truth.snr_db,
                      static_cast<double>(u.main.num_frames()) * sc.frame_ms / 1000.0, 0.0};
  });
  return out;
}

std::vector<ScoredUtterance> refined_corpus(const DecodedCorpus& d, const CdcConfig& config) {
  std::vector<ScoredUtterance> out(d.init.size());
  parallel_for(d.init.size(), worker_count(), [&](std::size_t i) {
    out[i] = make_scored(d.records[i], refine(d.init[i], cdc_scores(d.init[i], d.inter[i], config)).scores);
  });
  return out;
}

std::vector<ScoredUtterance> init_corpus(const DecodedCorpus& d) {
  std::vector<ScoredUtterance> out;
  for (std::size_t i = 0; i < d.init.size(); ++i) out.push_back(make_scored(d.records[i], d.init[i].scores));
  return out;
}

double peak_auc(const std::vector<ScoredUtterance>& corpus) {
  std::vector<double> pos, neg;
  for (const auto& u : corpus) (u.record.label == Label::Positive ? pos : neg).push_back(u.record.peak_score);
  return roc_auc(pos, neg);
}

Outcome cdc_mechanism() {
  synth::SynthConfig sc;
  sc.keyword = demo_tokens();
  sc.num_pos = 500;
  sc.num_neg = 500;
  sc.neg_duration_s = 20.0;
  sc.branch_corr_pos = 0.95;
  sc.branch_corr_neg = 0.1;
  sc.confusable_rate = 1.0;
  sc.partial_rate = 0.0;
  sc.seed = 7;
  const auto decoded = decode_corpus(sc);
  const double init_auc = peak_auc(init_corpus(decoded));
  const double refined_auc = peak_auc(refined_corpus(decoded, {}));
  return {refined_auc - init_auc >= 0.05,
          fmt("AUC init %.4f, refined %.4f, gain %+.4f (need >= +0.05)", init_auc, refined_auc,
              refined_auc - init_auc)};
}

struct WindowRun {
  std::size_t l_his, l_fut;
  double recall = 0.0;
  double far = 0.0;
  std::size_t delay_frames = 0;
};

DecodedCorpus trend_corpus() {
  synth::SynthConfig sc;
  sc.keyword = demo_tokens();
  sc.num_pos = 700;
  sc.num_neg = 600;
  sc.neg_duration_s = 30.0;
  sc.confusable_rate = 0.5;
  sc.seed = 1;
  return decode_corpus(sc);
}

constexpr double kTrendFar = 2.0;

Outcome window_trend(const DecodedCorpus& decoded) {
  std::vector<WindowRun> runs{{30, 0}, {20, 10}, {10, 20}, {5, 25}, {0, 30}};
  const std::array<double, 5> expected_ms{0, 300, 600, 750, 900};
  bool monotone = true, latency_ok = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto& r = runs[i];
    const CdcConfig config{r.l_his, r.l_fut};
    const auto corpus = refined_corpus(decoded, config);
    const auto report = evaluate(corpus, kTrendFar);
    r.recall = report.recall.macro_recall;
    r.far = report.far_per_hour;

    StreamingRefiner refiner(config);
    for (std::size_t t = 0; t < decoded.init[0].size(); ++t)
      refiner.push(decoded.init[0].scores[t], decoded.inter[0].scores[t]);
    r.delay_frames = refiner.max_added_delay_frames();
    const double ms = static_cast<double>(r.delay_frames) * kDefaultFrameMs;
    latency_ok &= ms == expected_ms[i] && ms == config.added_latency_ms();
    if (i > 0) monotone &= r.recall >= runs[i - 1].recall;
    detail += fmt("%s(%zu,%zu) recall %.4f lat %.0f ms", i ? "; " : "", r.l_his, r.l_fut, r.recall, ms);
  }
  return {monotone && latency_ok, fmt("FAR %.1f/h: ", kTrendFar) + detail};
}

Outcome evaluation_correctness(const DecodedCorpus& decoded) {
  const auto corpus = refined_corpus(decoded, {});
  const double theta = threshold_for_far(corpus, 0.0);
  const double far = far_at_threshold(corpus, theta);
  const auto recall = recall_at_threshold(corpus, theta);

  // Recount with the detector directly.
  std::map<double, std::pair<std::size_t, std::size_t>> recount;
  for (const auto& u : corpus) {
    if (u.record.label != Label::Positive) continue;
    auto& [hit, total] = recount[u.record.snr_bucket()];
    ++total;
    if (theta <= 1.0 && !detect_events(u.scores, {theta, 3.0}).empty()) ++hit;
  }
  bool same = recount.size() == recall.by_snr.size();
  double macro = 0.0;
  for (const auto& [snr, ht] : recount) {
    same &= recall.by_snr.count(snr) && recall.by_snr.at(snr).detected == ht.first &&
            recall.by_snr.at(snr).total == ht.second;
    macro += static_cast<double>(ht.first) / static_cast<double>(ht.second);
  }
  macro /= static_cast<double>(recount.size());
  same &= macro == recall.macro_recall;

  std::vector<double> one_peak(100, 0.0);
  one_peak[10] = 0.9;
  const std::vector<ScoredUtterance> arithmetic{
      make_scored({"a", Label::Negative, std::nullopt, 20.0 * 3600.0, 0.0}, one_peak),
      make_scored({"b", Label::Negative, std::nullopt, 20.0 * 3600.0, 0.0}, one_peak)};
  const double far_example = far_at_threshold(arithmetic, 0.5);

  return {far == 0.0 && same && far_example == 0.05,
          fmt("threshold_for_far(0) = %.9f, measured FAR %.4f, recall %.4f vs recount %.4f, 2 events / 40 h = %.4f/h",
              theta, far, recall.macro_recall, macro, far_example)};
}

struct Run {
  int code = -1;
  std::string out;
};

Run shell(const std::string& args) {
  const std::string cmd = std::string(CDCKWS_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::optional<std::string> demo_pipeline(const fs::path& dir, std::size_t threads, double* elapsed) {
  fs::remove_all(dir);
  const std::string g = "--quiet --seed 42 --threads " + std::to_string(threads) + " ";
  const auto c = dir / "corpus";
  const auto start = Clock::now();
  const std::vector<std::string> steps{
      g + "synth --out " + c.string() + " --num-pos 100 --neg-hours 2",
      g + "decode --manifest " + (c / "manifest.jsonl").string() + " --lexicon " + (c / "lexicon.txt").string() +
          " --phones " + (c / "phones.txt").string() + " --keyword \"HEY SNIPS\" --out " + (dir / "scores").string(),
      g + "refine --init-dir " + (dir / "scores").string() + " --inter-dir " + (dir / "scores").string() + " --out " +
          (dir / "refined").string(),
      g + "eval --manifest " + (c / "manifest.jsonl").string() + " --scores-dir " + (dir / "refined").string() +
          " --far 0.05 --out " + (dir / "report.txt").string()};
  for (const auto& s : steps) {
    const auto r = shell(s);
    if (r.code != 0) {
      std::fprintf(stderr, "step failed (%d): %s\n%s", r.code, s.c_str(), r.out.c_str());
      return std::nullopt;
    }
  }
  *elapsed = seconds_since(start);
  return io::read_text(dir / "report.txt");
}

Outcome end_to_end_demo() {
  const auto root = fs::temp_directory_path() / "cdckws_acceptance_demo";
  double t1 = 0, t2 = 0, t4 = 0;
  const auto a = demo_pipeline(root / "run1", 1, &t1);
  const auto b = demo_pipeline(root / "run2", 1, &t2);
  const auto c = demo_pipeline(root / "run4", 4, &t4);
  if (!a || !b || !c) return {false, "pipeline step failed"};
  const bool stable = *a == *b && *a == *c;
  std::string headline;
  if (auto pos = a->find("macro_recall"); pos != std::string::npos) headline = a->substr(pos, a->find('\n', pos) - pos);
  return {stable && t1 < 120.0 && t2 < 120.0,
          fmt("single-threaded %.1f s and %.1f s, 4 threads %.1f s, reports %s; %s", t1, t2, t4,
              stable ? "byte-identical" : "DIFFER", headline.c_str())};
}

Outcome throughput() {
  constexpr std::size_t kFrames = 100000, kVocab = 71, kTokens = 10;
  synth::SynthConfig sc;
  Rng rng(99);
  const auto pg = cdckws::testing::random_posteriorgram(rng, kFrames, kVocab);
  const auto spec = expand_keyword(cdckws::testing::random_keyword(rng, kTokens, kVocab));
  KeywordDecoder decoder(spec, {}, kVocab);
  double sink = 0.0;
  const auto start = Clock::now();
  for (std::size_t t = 0; t < kFrames; ++t) sink += decoder.push(pg.frame(t)).path_len;
  const double elapsed = seconds_since(start);
  const double audio_s = kFrames * kDefaultFrameMs / 1000.0;
  return {elapsed < 2.0, fmt("%zu frames (V=%zu, U=%zu) in %.3f s, %.0fx real time (checksum %.0f)", kFrames, kVocab,
                             kTokens, elapsed, audio_s / elapsed, sink)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* name, const Outcome& o) {
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  report(1, "oracle equivalence", oracle_equivalence());
  report(2, "streaming equals batch", streaming_equals_batch());
  report(3, "timeout", timeout_rule());
  report(4, "CDC mechanism", cdc_mechanism());
  const auto trend = trend_corpus();
  report(5, "window trend", window_trend(trend));
  report(6, "evaluation correctness", evaluation_correctness(trend));
  report(7, "end-to-end demo", end_to_end_demo());
  report(8, "throughput", throughput());
  return failures == 0 ? 0 : 1;
}
