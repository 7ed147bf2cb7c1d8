#pragma once

/**
 * Evaluation metrics and report emission.
 *
 * Score is the mean return over a set of trajectories. Ordering regret
 * comes in two flavors: the approximate one compares a paper set's score
 * against its easiest-first counterpart's, and the exact one replays a
 * single paper under every permutation of its problems (coupled draws, so
 * only the ordering differs) and compares the faced order against the best
 * one. Reports aggregate scores, regrets, per-position accuracy, level
 * error composition, and a spent-token histogram into CSV.
 */

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oskp/env.hpp"

namespace oskp {

struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// No attempted steps to aggregate over.
struct NoAttempts : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroDenominator : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exact regret asked to enumerate more permutations than the guard allows.
struct TooManyPermutations : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Scores and regrets
// ============================================================================

/// Mean return. Throws EmptyInput on an empty set.
double aggregate_score(const std::vector<Trajectory>& trajectories);

enum class RegretDenominator { EasyScore, OriginalScore };

/// (score_easy - score) / denominator, the denominator being score_easy or
/// score. Throws ZeroDenominator when the chosen denominator is <= 0.
double approx_regret(double score, double score_easy, RegretDenominator denominator);

/**
 * Replays the paper under every permutation of its problems with the same
 * run seed (problem outcomes are keyed by problem id, so draws stay coupled
 * across orderings) and returns (best - faced) / best over the achieved
 * returns. A best of zero means no ordering scores at all; the regret is
 * defined as 0 in that case. Guarded to papers of at most 6 problems.
 */
double exact_regret(const Policy& policy, const TestPaper& paper, Budget budget,
                    const InstanceModel& model, std::uint64_t run_seed);

/// Same enumeration, but the policy is rebuilt per ordering (needed by
/// plan-ahead policies whose plan depends on the problem order they see).
using PolicyFactory = std::function<std::unique_ptr<Policy>(const TestPaper& ordered_paper)>;
double exact_regret(const PolicyFactory& make_policy, const TestPaper& paper, Budget budget,
                    const InstanceModel& model, std::uint64_t run_seed);

// ============================================================================
// Diagnostics
// ============================================================================

/// Fraction of trajectories whose step at each position scored. All
/// trajectories must have the same length. Throws EmptyInput when empty.
std::vector<double> per_position_accuracy(const std::vector<Trajectory>& trajectories);

/// Among attempted, non-truncated steps: fraction whose realized band
/// matched, undershot, or overshot the declared one. Throws NoAttempts when
/// no step qualifies.
struct LevelErrorComposition {
  double matched = 0.0;
  double undershot = 0.0;
  double overshot = 0.0;
};
LevelErrorComposition level_error_composition(const std::vector<Trajectory>& trajectories);

/// Histogram of per-step spent tokens; bin k covers [k*w, (k+1)*w).
struct TokenHistogram {
  TokenCount bin_width = 0;
  std::vector<std::int64_t> counts;
};
TokenHistogram token_histogram(const std::vector<Trajectory>& trajectories,
                               TokenCount bin_width);

/// Header "bin_lo,bin_hi,count"; one row per bin, empty bins included.
void write_histogram_csv(std::ostream& out, const TokenHistogram& histogram);

// ============================================================================
// Trajectory records and reports
// ============================================================================

/// One evaluated episode, as stored in a run's trajectories.jsonl.
struct TrajectoryRecord {
  Setting setting = Setting::Medium;
  Variant variant = Variant::Original;
  Trajectory trajectory;
};

std::string to_json_line(const TrajectoryRecord& record);
TrajectoryRecord trajectory_record_from_json_line(const std::string& line);
void write_records_jsonl(std::ostream& out, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_records_jsonl(std::istream& in);

/// Aggregate over one setting's records: scores from the original papers,
/// the easy-variant score when easy records are present, regrets when their
/// denominators are valid, diagnostics over the original papers.
struct MetricsReport {
  double score = 0.0;
  std::optional<double> score_easy;
  std::optional<double> regret_easy_denom;
  std::optional<double> regret_score_denom;
  std::optional<double> exact_regret;
  std::vector<double> per_position;
  std::optional<LevelErrorComposition> level_errors;
  TokenHistogram histogram;
};

MetricsReport build_report(const std::vector<TrajectoryRecord>& records,
                           TokenCount histogram_bin_width,
                           std::optional<double> exact_regret_value);

struct ReportRow {
  std::string setting;
  TokenCount budget = 0;
  std::string policy;
  MetricsReport metrics;
};

/// Header "setting,budget,policy,score,score_easy,regret_easy_denom,
/// regret_score_denom,exact_regret,acc_p1,acc_p2,acc_p3,lvl_correct,
/// lvl_under,lvl_over"; unavailable cells stay empty.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace oskp
