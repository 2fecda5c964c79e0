#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdckws/posteriorgram.hpp"

namespace cdckws {

enum class Label { Positive, Negative };

/// SNR buckets are keyed by dB; clean audio is +inf.
inline constexpr double kCleanSnr = std::numeric_limits<double>::infinity();

struct UtteranceRecord {
  std::string id;
  Label label = Label::Negative;
  std::optional<double> snr_db;  // nullopt = clean
  double duration_s = 0.0;
  double peak_score = 0.0;

  double snr_bucket() const { return snr_db.value_or(kCleanSnr); }
};

struct ScoredUtterance {
  UtteranceRecord record;
  std::vector<double> scores;  // linear [0, 1] per frame
};

/// Builds a record/stream pair with peak_score filled in.
ScoredUtterance make_scored(UtteranceRecord record, std::vector<double> scores);

/// "-5", "0", "+inf", "7.5"...
std::string snr_label(double snr_db);

/// The seven-column layout used by the reports: -5 .. 20 dB plus clean.
std::vector<double> default_snr_buckets();

struct EvalOptions {
  double lockout_s = 3.0;
  double frame_ms = kDefaultFrameMs;
  std::vector<double> expected_buckets = default_snr_buckets();

  std::size_t lockout_frames() const;
};

/// False-alarm events per hour of negative audio.
double far_at_threshold(std::span<const ScoredUtterance> corpus, double threshold,
                        const EvalOptions& opts = {});
std::size_t false_alarm_count(std::span<const ScoredUtterance> corpus, double threshold,
                              const EvalOptions& opts = {});
double negative_hours(std::span<const ScoredUtterance> corpus);

inline constexpr double kZeroFarEpsilon = 1e-9;

/// Smallest observed negative score (or 0) whose FAR does not exceed the
/// target. When only silence on every negative meets it (always the case for
/// a target of 0) the result is max negative score + 1e-9.
double threshold_for_far(std::span<const ScoredUtterance> corpus, double target_far,
                         const EvalOptions& opts = {});

struct BucketRecall {
  std::size_t total = 0;
  std::size_t detected = 0;
  double recall() const { return total == 0 ? 0.0 : static_cast<double>(detected) / static_cast<double>(total); }
};

struct RecallResult {
  std::map<double, BucketRecall> by_snr;  // only buckets with positives
  std::vector<double> empty_buckets;       // expected buckets without positives
  double macro_recall = 0.0;               // unweighted mean over by_snr
};

RecallResult recall_at_threshold(std::span<const ScoredUtterance> corpus, double threshold,
                                 const EvalOptions& opts = {});

struct DetPoint {
  double threshold = 0.0;
  double far_per_hour = 0.0;
  double macro_recall = 0.0;
};

std::vector<DetPoint> det_sweep(std::span<const ScoredUtterance> corpus, std::span<const double> grid,
                                const EvalOptions& opts = {});
/// 0.00, 0.01, ..., 1.00
std::vector<double> auto_grid();
std::string det_csv(std::span<const DetPoint> points);

struct EvalReport {
  double target_far = 0.0;
  double threshold = 0.0;
  double far_per_hour = 0.0;
  std::size_t false_alarms = 0;
  double negative_hours = 0.0;
  std::size_t num_positive = 0;
  std::size_t num_negative = 0;
  RecallResult recall;

  std::map<double, double> miss_rate_by_snr() const;
};

EvalReport evaluate(std::span<const ScoredUtterance> corpus, double target_far,
                    const EvalOptions& opts = {});

std::string format_report_text(const EvalReport& report, const EvalOptions& opts = {});
std::string format_report_json(const EvalReport& report);

/// Mann-Whitney estimate of the ROC area of per-utterance peak scores.
double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

}  // namespace cdckws
