#include "oskp/metrics.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "oskp/csv.hpp"

namespace oskp {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxExactRegretProblems = 6;

std::size_t factorial(std::size_t n) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

json step_to_json(const TrajectoryStep& step) {
  return json{{"predicted_level", static_cast<int>(step.action.predicted_level)},
              {"attempt", step.action.attempt},
              {"tokens_used", step.outcome.tokens_used},
              {"correct", step.outcome.correct},
              {"truncated", step.outcome.truncated},
              {"realized_level", static_cast<int>(step.outcome.realized_level)},
              {"reward", step.outcome.reward}};
}

TrajectoryStep step_from_json(const json& entry) {
  for (const char* key : {"predicted_level", "attempt", "tokens_used", "correct", "truncated",
                          "realized_level", "reward"}) {
    if (!entry.contains(key)) {
      throw std::invalid_argument(std::string("step missing key '") + key + "'");
    }
  }
  const int predicted = entry["predicted_level"].get<int>();
  const int realized = entry["realized_level"].get<int>();
  if (predicted < 0 || predicted >= kNumLevels || realized < 0 || realized >= kNumLevels) {
    throw std::invalid_argument("step level out of range");
  }
  TrajectoryStep step;
  step.action.predicted_level = static_cast<EffortLevel>(predicted);
  step.action.attempt = entry["attempt"].get<bool>();
  if (step.action.attempt != is_attempt(step.action.predicted_level)) {
    throw std::invalid_argument("step attempt flag disagrees with its level");
  }
  step.outcome.tokens_used = entry["tokens_used"].get<TokenCount>();
  step.outcome.correct = entry["correct"].get<bool>();
  step.outcome.truncated = entry["truncated"].get<bool>();
  step.outcome.realized_level = static_cast<EffortLevel>(realized);
  step.outcome.reward = entry["reward"].get<int>();
  return step;
}

}  // namespace

double aggregate_score(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw EmptyInput("EmptyInput: no trajectories to score");
  double sum = 0.0;
  for (const Trajectory& trajectory : trajectories) sum += trajectory.return_value;
  return sum / static_cast<double>(trajectories.size());
}

double approx_regret(double score, double score_easy, RegretDenominator denominator) {
  const double denom = denominator == RegretDenominator::EasyScore ? score_easy : score;
  if (!(denom > 0.0)) {
    throw ZeroDenominator("ZeroDenominator: regret denominator is not positive");
  }
  return (score_easy - score) / denom;
}

namespace {

template <typename PolicyFor>
double exact_regret_impl(PolicyFor&& policy_for, const TestPaper& paper, Budget budget,
                         const InstanceModel& model, std::uint64_t run_seed) {
  const std::size_t n = paper.problems.size();
  if (n == 0) throw EmptyInput("EmptyInput: paper has no problems");
  if (n > kMaxExactRegretProblems) {
    throw TooManyPermutations("TooManyPermutations: " + std::to_string(factorial(n)) +
                              " orderings of " + std::to_string(n) + " problems (max " +
                              std::to_string(factorial(kMaxExactRegretProblems)) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  int faced = 0;
  int best = 0;
  bool first = true;
  do {
    TestPaper permuted = paper;
    for (std::size_t i = 0; i < n; ++i) permuted.problems[i] = paper.problems[order[i]];
    const Policy& policy = policy_for(permuted);
    const Trajectory trajectory = run_episode(policy, permuted, budget, model, run_seed);
    if (first) faced = trajectory.return_value;  // identity ordering comes first
    best = std::max(best, trajectory.return_value);
    first = false;
  } while (std::next_permutation(order.begin(), order.end()));

  if (best <= 0) return 0.0;
  return static_cast<double>(best - faced) / static_cast<double>(best);
}

}  // namespace

double exact_regret(const Policy& policy, const TestPaper& paper, Budget budget,
                    const InstanceModel& model, std::uint64_t run_seed) {
  return exact_regret_impl([&policy](const TestPaper&) -> const Policy& { return policy; },
                           paper, budget, model, run_seed);
}

double exact_regret(const PolicyFactory& make_policy, const TestPaper& paper, Budget budget,
                    const InstanceModel& model, std::uint64_t run_seed) {
  std::unique_ptr<Policy> current;
  return exact_regret_impl(
      [&](const TestPaper& ordered) -> const Policy& {
        current = make_policy(ordered);
        if (!current) throw std::invalid_argument("exact_regret: factory returned null");
        return *current;
      },
      paper, budget, model, run_seed);
}

std::vector<double> per_position_accuracy(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw EmptyInput("EmptyInput: no trajectories");
  const std::size_t length = trajectories.front().steps.size();
  std::vector<double> hits(length, 0.0);
  for (const Trajectory& trajectory : trajectories) {
    if (trajectory.steps.size() != length) {
      throw std::invalid_argument("per_position_accuracy: trajectories differ in length");
    }
    for (std::size_t i = 0; i < length; ++i) hits[i] += trajectory.steps[i].outcome.reward;
  }
  for (double& h : hits) h /= static_cast<double>(trajectories.size());
  return hits;
}

LevelErrorComposition level_error_composition(const std::vector<Trajectory>& trajectories) {
  std::int64_t matched = 0;
  std::int64_t undershot = 0;
  std::int64_t overshot = 0;
  for (const Trajectory& trajectory : trajectories) {
    for (const TrajectoryStep& step : trajectory.steps) {
      if (!step.action.attempt || step.outcome.truncated) continue;
      const int declared = static_cast<int>(step.action.predicted_level);
      const int realized = static_cast<int>(step.outcome.realized_level);
      if (realized == declared) {
        ++matched;
      } else if (realized > declared) {
        ++undershot;  // declared too little effort, spent more
      } else {
        ++overshot;
      }
    }
  }
  const std::int64_t total = matched + undershot + overshot;
  if (total == 0) throw NoAttempts("NoAttempts: no attempted, non-truncated steps");
  LevelErrorComposition out;
  out.matched = static_cast<double>(matched) / static_cast<double>(total);
  out.undershot = static_cast<double>(undershot) / static_cast<double>(total);
  out.overshot = static_cast<double>(overshot) / static_cast<double>(total);
  return out;
}

TokenHistogram token_histogram(const std::vector<Trajectory>& trajectories,
                               TokenCount bin_width) {
  if (bin_width < 1) throw std::invalid_argument("token_histogram: bin_width must be >= 1");
  TokenHistogram histogram;
  histogram.bin_width = bin_width;
  for (const Trajectory& trajectory : trajectories) {
    for (const TrajectoryStep& step : trajectory.steps) {
      const auto bin = static_cast<std::size_t>(step.outcome.tokens_used / bin_width);
      if (bin >= histogram.counts.size()) histogram.counts.resize(bin + 1, 0);
      ++histogram.counts[bin];
    }
  }
  return histogram;
}

void write_histogram_csv(std::ostream& out, const TokenHistogram& histogram) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t bin = 0; bin < histogram.counts.size(); ++bin) {
    const TokenCount lo = static_cast<TokenCount>(bin) * histogram.bin_width;
    out << lo << ',' << lo + histogram.bin_width << ',' << histogram.counts[bin] << '\n';
  }
}

std::string to_json_line(const TrajectoryRecord& record) {
  json steps = json::array();
  for (const TrajectoryStep& step : record.trajectory.steps) steps.push_back(step_to_json(step));
  json line{{"paper_id", record.trajectory.paper_id},
            {"setting", to_string(record.setting)},
            {"variant", to_string(record.variant)},
            {"budget", record.trajectory.budget.limit},
            {"steps", std::move(steps)},
            {"total_tokens", record.trajectory.total_tokens},
            {"return", record.trajectory.return_value}};
  return line.dump();
}

TrajectoryRecord trajectory_record_from_json_line(const std::string& line) {
  json parsed;
  try {
    parsed = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("record line is not valid JSON: ") + e.what());
  }
  for (const char* key :
       {"paper_id", "setting", "variant", "budget", "steps", "total_tokens", "return"}) {
    if (!parsed.contains(key)) {
      throw std::invalid_argument(std::string("record missing key '") + key + "'");
    }
  }
  TrajectoryRecord record;
  record.setting = setting_from_string(parsed["setting"].get<std::string>());
  record.variant = variant_from_string(parsed["variant"].get<std::string>());
  std::vector<TrajectoryStep> steps;
  if (!parsed["steps"].is_array()) throw std::invalid_argument("steps must be an array");
  for (const json& entry : parsed["steps"]) steps.push_back(step_from_json(entry));
  record.trajectory = make_trajectory(parsed["paper_id"].get<std::string>(),
                                      Budget{parsed["budget"].get<TokenCount>()},
                                      std::move(steps));
  if (record.trajectory.total_tokens != parsed["total_tokens"].get<TokenCount>() ||
      record.trajectory.return_value != parsed["return"].get<int>()) {
    throw std::invalid_argument("record totals disagree with its steps");
  }
  return record;
}

void write_records_jsonl(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  for (const TrajectoryRecord& record : records) out << to_json_line(record) << '\n';
}

std::vector<TrajectoryRecord> read_records_jsonl(std::istream& in) {
  std::vector<TrajectoryRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      records.push_back(trajectory_record_from_json_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return records;
}

MetricsReport build_report(const std::vector<TrajectoryRecord>& records,
                           TokenCount histogram_bin_width,
                           std::optional<double> exact_regret_value) {
  std::vector<Trajectory> originals;
  std::vector<Trajectory> easies;
  for (const TrajectoryRecord& record : records) {
    (record.variant == Variant::Original ? originals : easies).push_back(record.trajectory);
  }
  if (originals.empty()) {
    throw EmptyInput("EmptyInput: no original-variant records to report on");
  }

  MetricsReport report;
  report.score = aggregate_score(originals);
  if (!easies.empty()) {
    report.score_easy = aggregate_score(easies);
    try {
      report.regret_easy_denom =
          approx_regret(report.score, *report.score_easy, RegretDenominator::EasyScore);
    } catch (const ZeroDenominator&) {
    }
    try {
      report.regret_score_denom =
          approx_regret(report.score, *report.score_easy, RegretDenominator::OriginalScore);
    } catch (const ZeroDenominator&) {
    }
  }
  report.exact_regret = exact_regret_value;
  report.per_position = per_position_accuracy(originals);
  try {
    report.level_errors = level_error_composition(originals);
  } catch (const NoAttempts&) {
  }
  report.histogram = token_histogram(originals, histogram_bin_width);
  return report;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "setting,budget,policy,score,score_easy,regret_easy_denom,regret_score_denom,"
         "exact_regret,acc_p1,acc_p2,acc_p3,lvl_correct,lvl_under,lvl_over\n";
  for (const ReportRow& row : rows) {
    out << row.setting << ',' << row.budget << ',' << row.policy << ','
        << csv_number(row.metrics.score) << ',';
    if (row.metrics.score_easy) out << csv_number(*row.metrics.score_easy);
    out << ',';
    if (row.metrics.regret_easy_denom) out << csv_number(*row.metrics.regret_easy_denom);
    out << ',';
    if (row.metrics.regret_score_denom) out << csv_number(*row.metrics.regret_score_denom);
    out << ',';
    if (row.metrics.exact_regret) out << csv_number(*row.metrics.exact_regret);
    for (std::size_t position = 0; position < 3; ++position) {
      out << ',';
      if (position < row.metrics.per_position.size()) {
        out << csv_number(row.metrics.per_position[position]);
      }
    }
    if (row.metrics.level_errors) {
      out << ',' << csv_number(row.metrics.level_errors->matched) << ','
          << csv_number(row.metrics.level_errors->undershot) << ','
          << csv_number(row.metrics.level_errors->overshot) << '\n';
    } else {
      out << ",,,\n";
    }
  }
}

}  // namespace oskp
