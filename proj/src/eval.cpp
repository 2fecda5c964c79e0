#include "cdckws/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cdckws/detect.hpp"
#include "cdckws/error.hpp"

namespace cdckws {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool is_negative(const ScoredUtterance& u) { return u.record.label == Label::Negative; }

}  // namespace

ScoredUtterance make_scored(UtteranceRecord record, std::vector<double> scores) {
  record.peak_score = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  return {std::move(record), std::move(scores)};
}

std::string snr_label(double snr_db) {
  if (std::isinf(snr_db)) return snr_db > 0 ? "+inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr_db);
  return buf;
}

std::vector<double> default_snr_buckets() { return {-5, 0, 5, 10, 15, 20, kCleanSnr}; }

std::size_t EvalOptions::lockout_frames() const {
  return DetectConfig{0.0, lockout_s}.lockout_frames(frame_ms);
}

double negative_hours(std::span<const ScoredUtterance> corpus) {
  double seconds = 0.0;
  for (const auto& u : corpus)
    if (is_negative(u)) seconds += u.record.duration_s;
  return seconds / 3600.0;
}

std::size_t false_alarm_count(std::span<const ScoredUtterance> corpus, double threshold,
                              const EvalOptions& opts) {
  const std::size_t lockout = opts.lockout_frames();
  std::size_t events = 0;
  for (const auto& u : corpus)
    if (is_negative(u)) events += count_events(u.scores, threshold, lockout);
  return events;
}

double far_at_threshold(std::span<const ScoredUtterance> corpus, double threshold,
                        const EvalOptions& opts) {
  const double hours = negative_hours(corpus);
  if (!(hours > 0.0)) throw KwsError(ErrorCode::NoNegativeData, "no negative audio in corpus");
  return static_cast<double>(false_alarm_count(corpus, threshold, opts)) / hours;
}

double threshold_for_far(std::span<const ScoredUtterance> corpus, double target_far,
                         const EvalOptions& opts) {
  if (!(target_far >= 0.0)) throw KwsError(ErrorCode::InvalidConfig, "target FAR must be >= 0");
  const double hours = negative_hours(corpus);
  if (!(hours > 0.0)) throw KwsError(ErrorCode::NoNegativeData, "no negative audio in corpus");

  double max_negative = 0.0;
  std::vector<double> candidates{0.0};
  for (const auto& u : corpus) {
    if (!is_negative(u)) continue;
    max_negative = std::max(max_negative, u.record.peak_score);
    for (double s : u.scores)
      if (s >= 0.0 && s <= 1.0) candidates.push_back(s);
  }
  if (target_far == 0.0) return max_negative + kZeroFarEpsilon;

  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // FAR is non-increasing in the threshold, so binary search the first passing candidate.
  auto passes = [&](double theta) { return far_at_threshold(corpus, theta, opts) <= target_far; };
  std::size_t lo = 0, hi = candidates.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (passes(candidates[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  if (lo == candidates.size()) return max_negative + kZeroFarEpsilon;
  return candidates[lo];
}

RecallResult recall_at_threshold(std::span<const ScoredUtterance> corpus, double threshold,
                                 const EvalOptions& opts) {
  RecallResult result;
  for (const auto& u : corpus) {
    if (is_negative(u)) continue;
    auto& bucket = result.by_snr[u.record.snr_bucket()];
    ++bucket.total;
    // The first crossing always fires, so "at least one event" is a peak test.
    if (u.record.peak_score >= threshold) ++bucket.detected;
  }
  for (double b : opts.expected_buckets)
    if (!result.by_snr.contains(b)) result.empty_buckets.push_back(b);
  if (!result.by_snr.empty()) {
    double sum = 0.0;
    for (const auto& [snr, bucket] : result.by_snr) sum += bucket.recall();
    result.macro_recall = sum / static_cast<double>(result.by_snr.size());
  }
  return result;
}

std::vector<DetPoint> det_sweep(std::span<const ScoredUtterance> corpus, std::span<const double> grid,
                                const EvalOptions& opts) {
  if (grid.empty()) throw KwsError(ErrorCode::InvalidConfig, "empty threshold grid");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<DetPoint> points;
  points.reserve(sorted.size());
  for (double theta : sorted)
    points.push_back({theta, far_at_threshold(corpus, theta, opts),
                      recall_at_threshold(corpus, theta, opts).macro_recall});
  return points;
}

std::vector<double> auto_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

std::string det_csv(std::span<const DetPoint> points) {
  std::string out = "threshold,far_per_hour,macro_recall\n";
  for (const auto& p : points)
    out += fixed(p.threshold, 6) + "," + fixed(p.far_per_hour, 6) + "," + fixed(p.macro_recall, 6) + "\n";
  return out;
}

std::map<double, double> EvalReport::miss_rate_by_snr() const {
  std::map<double, double> miss;
  for (const auto& [snr, bucket] : recall.by_snr) miss[snr] = 1.0 - bucket.recall();
  return miss;
}

EvalReport evaluate(std::span<const ScoredUtterance> corpus, double target_far, const EvalOptions& opts) {
  EvalReport r;
  r.target_far = target_far;
  r.threshold = threshold_for_far(corpus, target_far, opts);
  r.false_alarms = false_alarm_count(corpus, r.threshold, opts);
  r.negative_hours = negative_hours(corpus);
  r.far_per_hour = static_cast<double>(r.false_alarms) / r.negative_hours;
  r.recall = recall_at_threshold(corpus, r.threshold, opts);
  for (const auto& u : corpus) ++(is_negative(u) ? r.num_negative : r.num_positive);
  return r;
}

std::string format_report_text(const EvalReport& report, const EvalOptions& opts) {
  std::ostringstream os;
  os << "threshold            " << fixed(report.threshold, 9) << "\n"
     << "target_far_per_hour  " << fixed(report.target_far, 4) << "\n"
     << "far_per_hour         " << fixed(report.far_per_hour, 4) << "\n"
     << "false_alarms         " << report.false_alarms << "\n"
     << "negative_hours       " << fixed(report.negative_hours, 4) << "\n"
     << "positives            " << report.num_positive << "\n"
     << "negatives            " << report.num_negative << "\n"
     << "macro_recall         " << fixed(100.0 * report.recall.macro_recall, 2) << "\n\n";

  std::vector<double> columns = opts.expected_buckets;
  for (const auto& [snr, bucket] : report.recall.by_snr)
    if (std::find(columns.begin(), columns.end(), snr) == columns.end()) columns.push_back(snr);
  std::sort(columns.begin(), columns.end());

  auto cell = [](const std::string& s) {
    std::string padded(7 > s.size() ? 7 - s.size() : 0, ' ');
    return padded + s;
  };
  os << "SNR    ";
  for (double c : columns) os << cell(snr_label(c));
  os << cell("Avg.") << "\n";
  for (const char* row : {"Recall ", "Miss   ", "Count  "}) {
    os << row;
    for (double c : columns) {
      auto it = report.recall.by_snr.find(c);
      if (it == report.recall.by_snr.end()) {
        os << cell("-");
      } else if (row[0] == 'R') {
        os << cell(fixed(100.0 * it->second.recall(), 1));
      } else if (row[0] == 'M') {
        os << cell(fixed(100.0 * (1.0 - it->second.recall()), 1));
      } else {
        os << cell(std::to_string(it->second.total));
      }
    }
    if (row[0] == 'R') os << cell(fixed(100.0 * report.recall.macro_recall, 1));
    else if (row[0] == 'M') os << cell(fixed(100.0 * (1.0 - report.recall.macro_recall), 1));
    else os << cell(std::to_string(report.num_positive));
    os << "\n";
  }
  return os.str();
}

std::string format_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["target_far_per_hour"] = report.target_far;
  j["far_per_hour"] = report.far_per_hour;
  j["false_alarms"] = report.false_alarms;
  j["negative_hours"] = report.negative_hours;
  j["num_positive"] = report.num_positive;
  j["num_negative"] = report.num_negative;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  nlohmann::ordered_json miss = nlohmann::ordered_json::object();
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [snr, bucket] : report.recall.by_snr) {
    recall[snr_label(snr)] = bucket.recall();
    miss[snr_label(snr)] = 1.0 - bucket.recall();
    counts[snr_label(snr)] = bucket.total;
  }
  j["recall_by_snr"] = recall;
  j["miss_rate_by_snr"] = miss;
  j["positives_by_snr"] = counts;
  j["macro_recall"] = report.recall.macro_recall;
  nlohmann::ordered_json empty = nlohmann::ordered_json::array();
  for (double b : report.recall.empty_buckets) empty.push_back(snr_label(b));
  j["empty_buckets"] = empty;
  return j.dump() + "\n";
}

double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty())
    throw KwsError(ErrorCode::InvalidConfig, "ROC area needs both classes");
  std::vector<double> neg(negative_scores.begin(), negative_scores.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : positive_scores) {
    const auto lower = std::lower_bound(neg.begin(), neg.end(), p);
    const auto upper = std::upper_bound(neg.begin(), neg.end(), p);
    wins += static_cast<double>(lower - neg.begin()) + 0.5 * static_cast<double>(upper - lower);
  }
  return wins / (static_cast<double>(positive_scores.size()) * static_cast<double>(neg.size()));
}

}  // namespace cdckws
