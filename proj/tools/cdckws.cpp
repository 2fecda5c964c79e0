// cdckws: synth -> decode -> refine -> eval/sweep over posteriorgram corpora.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cdckws/cdc.hpp"
#include "cdckws/error.hpp"
#include "cdckws/eval.hpp"
#include "cdckws/io.hpp"
#include "cdckws/parallel.hpp"
#include "cdckws/synth.hpp"
#include "cdckws/trellis.hpp"

namespace fs = std::filesystem;
using namespace cdckws;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool quiet = false;
  double frame_ms = kDefaultFrameMs;
};

void info(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

void warn_all(const Globals& g, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) info(g, "warning: " + w);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw KwsError(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("list", "not a number: \"" + item + "\"");
    }
  }
  if (out.empty()) throw CLI::ValidationError("list", "empty list");
  return out;
}

fs::path score_path(const fs::path& dir, const std::string& id, const char* role) {
  return dir / (id + "." + role + ".scores");
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  std::size_t num_pos = 100;
  std::size_t num_neg = 240;
  double neg_hours = 2.0;
  std::string tiers = "0.35,0.45,0.55,0.65,0.75,0.85,0.95";
  std::string keyword = synth::kDemoKeyword;
  double confusable_rate = 0.1;
  double rho_pos = 0.95;
  double rho_neg = 0.1;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  synth::SynthConfig c;
  c.seed = g.seed;
  c.frame_ms = g.frame_ms;
  c.num_pos = a.num_pos;
  c.num_neg = a.num_neg;
  c.confusable_rate = a.confusable_rate;
  c.branch_corr_pos = a.rho_pos;
  c.branch_corr_neg = a.rho_neg;
  if (a.num_neg > 0) c.neg_duration_s = a.neg_hours * 3600.0 / static_cast<double>(a.num_neg);

  c.dominance_tiers = parse_list(a.tiers);
  const auto labels = default_snr_buckets();
  if (c.dominance_tiers.size() > labels.size())
    throw CLI::ValidationError("--dominance-tiers", "at most 7 tiers (-5 dB .. +inf)");
  // Tiers map onto the highest SNR labels so the strongest tier is always "clean".
  c.tier_snr.clear();
  for (std::size_t i = 0; i < c.dominance_tiers.size(); ++i) {
    const double label = labels[labels.size() - c.dominance_tiers.size() + i];
    c.tier_snr.push_back(std::isinf(label) ? std::nullopt : std::optional<double>(label));
  }

  const auto phones = io::PhoneTable::cmu_default();
  const auto lexicon = io::Lexicon::parse(synth::demo_lexicon_text());
  c.keyword = io::keyword_to_tokens(a.keyword, lexicon, phones);
  c.vocab_size = phones.vocab_size();

  const auto manifest = synth::synth_corpus(c, a.out, g.threads);
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(synth::corpus_digest(a.out / "manifest.jsonl")));
  info(g, "wrote " + std::to_string(manifest.size()) + " utterances to " + a.out.string() +
              " (digest " + digest + ")");
  return 0;
}

// ---- decode ----------------------------------------------------------------

struct DecodeArgs {
  fs::path manifest, lexicon, phones, out;
  std::string keyword;
  double bonus_log = 3.0;
  double timeout_s = 3.0;
  bool variant_entry = false;
  std::string tie_break = "shorter";
};

int cmd_decode(const Globals& g, const DecodeArgs& a) {
  std::vector<std::string> warnings;
  const auto phones = io::PhoneTable::load(a.phones);
  const auto lexicon = io::Lexicon::load(a.lexicon, &warnings);
  const auto spec = expand_keyword(io::keyword_to_tokens(a.keyword, lexicon, phones));
  const auto manifest = io::load_manifest(a.manifest);
  warn_all(g, warnings);

  DecoderConfig config;
  config.log_bonus = a.bonus_log;
  config.timeout_s = a.timeout_s;
  config.literal_entry = !a.variant_entry;
  config.tie_break = a.tie_break == "longer" ? TieBreak::PreferLonger : TieBreak::PreferShorter;
  config.timeout_frames(g.frame_ms);  // validates before any work
  ensure_dir(a.out);

  std::vector<std::vector<std::string>> per_utt(manifest.size());
  parallel_for(manifest.size(), g.threads, [&](std::size_t i) {
    const auto& e = manifest[i];
    auto decode_to = [&](const fs::path& in, const char* role, StreamRole stream_role) {
      const auto pg = io::load_posteriors(in, g.frame_ms, &per_utt[i]);
      const auto scores = to_linear_unit(decode_utterance(pg, spec, config), stream_role);
      io::save_scores(scores.scores, score_path(a.out, e.id, role));
    };
    decode_to(e.main_path, "init", StreamRole::Init);
    if (e.inter_path) decode_to(*e.inter_path, "inter", StreamRole::Inter);
  });
  for (const auto& w : per_utt) warn_all(g, w);
  info(g, "decoded " + std::to_string(manifest.size()) + " utterances into " + a.out.string());
  return 0;
}

// ---- refine ----------------------------------------------------------------

struct RefineArgs {
  fs::path init_dir, inter_dir, out;
  std::size_t l_his = 0;
  std::size_t l_fut = 30;
};

int cmd_refine(const Globals& g, const RefineArgs& a) {
  CdcConfig config{a.l_his, a.l_fut};
  config.validate();
  std::vector<std::string> ids;
  const std::string suffix = ".init.scores";
  for (const auto& entry : fs::directory_iterator(a.init_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix))
      ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  ensure_dir(a.out);

  parallel_for(ids.size(), g.threads, [&](std::size_t i) {
    ScoreStream init{io::load_scores(score_path(a.init_dir, ids[i], "init")), StreamRole::Init};
    ScoreStream inter{io::load_scores(score_path(a.inter_dir, ids[i], "inter")), StreamRole::Inter};
    if (init.size() != inter.size())
      throw KwsError(ErrorCode::LengthMismatch, ids[i] + ": init has " + std::to_string(init.size()) +
                                                    " frames, inter has " + std::to_string(inter.size()));
    const auto refined = refine(init, cdc_scores(init, inter, config));
    io::save_scores(refined.scores, score_path(a.out, ids[i], "refine"));
  });
  info(g, "refined " + std::to_string(ids.size()) + " utterances (added latency " +
              std::to_string(static_cast<long>(config.added_latency_ms(g.frame_ms))) + " ms)");
  return 0;
}

// ---- eval / sweep ----------------------------------------------------------

std::vector<ScoredUtterance> load_scored(const fs::path& manifest_path, const fs::path& dir,
                                         const std::string& stream) {
  const auto manifest = io::load_manifest(manifest_path);
  std::vector<ScoredUtterance> corpus;
  corpus.reserve(manifest.size());
  for (const auto& e : manifest) {
    fs::path p;
    if (stream == "auto") {
      p = score_path(dir, e.id, "refine");
      if (!fs::exists(p)) p = score_path(dir, e.id, "init");
    } else {
      p = score_path(dir, e.id, stream.c_str());
    }
    corpus.push_back(make_scored({e.id, e.label, e.snr_db, e.duration_s, 0.0}, io::load_scores(p)));
  }
  return corpus;
}

struct EvalArgs {
  fs::path manifest, scores_dir, out;
  double far = 0.05;
  std::string report = "text";
  std::string stream = "auto";
  double lockout_s = 3.0;
};

void emit(const fs::path& out, const std::string& text) {
  if (out.empty())
    std::cout << text;
  else
    io::write_text(out, text);
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  const auto corpus = load_scored(a.manifest, a.scores_dir, a.stream);
  EvalOptions opts;
  opts.lockout_s = a.lockout_s;
  opts.frame_ms = g.frame_ms;
  const auto report = evaluate(corpus, a.far, opts);
  for (double b : report.recall.empty_buckets)
    info(g, "warning: EmptyBucket: no positives in SNR bucket " + snr_label(b));
  emit(a.out, a.report == "json" ? format_report_json(report) : format_report_text(report, opts));
  return 0;
}

struct SweepArgs {
  fs::path manifest, scores_dir, out;
  std::string grid = "auto";
  std::string stream = "auto";
  double lockout_s = 3.0;
};

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const auto corpus = load_scored(a.manifest, a.scores_dir, a.stream);
  EvalOptions opts;
  opts.lockout_s = a.lockout_s;
  opts.frame_ms = g.frame_ms;
  const auto grid = a.grid == "auto" ? auto_grid() : parse_list(a.grid);
  emit(a.out, det_csv(det_sweep(corpus, grid, opts)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming CTC keyword spotting with cross-layer consistency rescoring"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress and warnings");
  app.add_option("--frame-ms", g.frame_ms, "Frame duration in milliseconds")->check(CLI::PositiveNumber);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dual-branch corpus");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--num-pos", sa.num_pos, "Positive utterances");
  synth_cmd->add_option("--num-neg", sa.num_neg, "Negative utterances");
  synth_cmd->add_option("--neg-hours", sa.neg_hours, "Total negative audio in hours")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dominance-tiers", sa.tiers, "Comma-separated keyword dominance per SNR tier");
  synth_cmd->add_option("--keyword", sa.keyword, "Keyword phrase (demo lexicon)");
  synth_cmd->add_option("--confusable-rate", sa.confusable_rate, "Share of negatives with a near-keyword")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--rho-pos", sa.rho_pos, "Branch correlation on positives")->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--rho-neg", sa.rho_neg, "Branch correlation after false activations")
      ->check(CLI::Range(0.0, 1.0));

  DecodeArgs da;
  auto* decode_cmd = app.add_subcommand("decode", "Run the keyword trellis over every manifest entry");
  decode_cmd->add_option("--manifest", da.manifest)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--lexicon", da.lexicon)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--phones", da.phones)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("--keyword", da.keyword)->required();
  decode_cmd->add_option("--bonus-log", da.bonus_log, "Natural log of the score bonus");
  decode_cmd->add_option("--timeout-s", da.timeout_s, "Longest keyword path in seconds")->check(CLI::PositiveNumber);
  decode_cmd->add_flag("--variant-entry", da.variant_entry, "Charge p_t(y1) when entering the keyword");
  decode_cmd->add_option("--tie-break", da.tie_break)->check(CLI::IsMember({"shorter", "longer"}));
  decode_cmd->add_option("--out", da.out)->required();

  RefineArgs ra;
  auto* refine_cmd = app.add_subcommand("refine", "Combine init and inter scores with windowed cosine consistency");
  refine_cmd->add_option("--init-dir", ra.init_dir)->required()->check(CLI::ExistingDirectory);
  refine_cmd->add_option("--inter-dir", ra.inter_dir)->required()->check(CLI::ExistingDirectory);
  refine_cmd->add_option("--l-his", ra.l_his, "History frames");
  refine_cmd->add_option("--l-fut", ra.l_fut, "Future frames");
  refine_cmd->add_option("--out", ra.out)->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Recall per SNR bucket at a fixed false-alarm rate");
  eval_cmd->add_option("--manifest", ea.manifest)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--scores-dir", ea.scores_dir)->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--far", ea.far, "Target false alarms per hour")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--report", ea.report)->check(CLI::IsMember({"text", "json"}));
  eval_cmd->add_option("--stream", ea.stream)->check(CLI::IsMember({"auto", "init", "inter", "refine"}));
  eval_cmd->add_option("--lockout-s", ea.lockout_s)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ea.out, "Write the report here instead of stdout");

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Threshold sweep as CSV (threshold,far_per_hour,macro_recall)");
  sweep_cmd->add_option("--manifest", wa.manifest)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--scores-dir", wa.scores_dir)->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--grid", wa.grid, "\"auto\" or comma-separated thresholds");
  sweep_cmd->add_option("--stream", wa.stream)->check(CLI::IsMember({"auto", "init", "inter", "refine"}));
  sweep_cmd->add_option("--lockout-s", wa.lockout_s)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", wa.out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*synth_cmd) return cmd_synth(g, sa);
    if (*decode_cmd) return cmd_decode(g, da);
    if (*refine_cmd) return cmd_refine(g, ra);
    if (*eval_cmd) return cmd_eval(g, ea);
    if (*sweep_cmd) return cmd_sweep(g, wa);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const KwsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kUsageError : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}
