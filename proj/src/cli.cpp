#include "oskp/cli.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "oskp/csv.hpp"
#include "oskp/env.hpp"
#include "oskp/grpo.hpp"
#include "oskp/knapsack.hpp"
#include "oskp/metrics.hpp"
#include "oskp/papers.hpp"
#include "oskp/policy.hpp"
#include "oskp/rng.hpp"

namespace oskp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ============================================================================
// Shared plumbing
// ============================================================================

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Manifests come first so that any output directory identifies the command
/// that produced it even if that command later died.
void write_manifest(const fs::path& path, const std::string& command, json params) {
  json manifest{{"command", command}, {"params", std::move(params)}};
  write_text_file(path, manifest.dump(2) + "\n");
}

std::vector<TestPaper> load_papers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open papers file: " + path);
  std::vector<TestPaper> papers = read_papers_jsonl(in);
  if (papers.empty()) throw std::runtime_error("papers file is empty: " + path);
  return papers;
}

InstanceModel resolve_model(const std::string& model_path) {
  if (model_path.empty()) {
    InstanceModel model = InstanceModel::defaults();
    validate(model);
    return model;
  }
  return load_model(model_path);
}

// ============================================================================
// Policy specs
// ============================================================================

struct PolicySpec {
  enum class Kind { Fixed, Threshold, Greedy, Params } kind = Kind::Fixed;
  EffortLevel fixed_level = EffortLevel::Level1;
  double tau = 0.5;
  std::string params_path;  // Params always; Greedy optionally
};

PolicySpec parse_policy_spec(const std::string& text) {
  const auto fail = [&text](const std::string& why) -> PolicySpec {
    throw CLI::ValidationError("--policy", "'" + text + "': " + why);
  };
  const std::size_t colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);

  PolicySpec spec;
  if (head == "fixed") {
    spec.kind = PolicySpec::Kind::Fixed;
    if (tail.size() != 1 || tail[0] < '0' || tail[0] > '2') {
      return fail("fixed level must be 0, 1, or 2 (3 marks a skip, not a policy)");
    }
    spec.fixed_level = static_cast<EffortLevel>(tail[0] - '0');
  } else if (head == "threshold") {
    spec.kind = PolicySpec::Kind::Threshold;
    char* end = nullptr;
    spec.tau = std::strtod(tail.c_str(), &end);
    if (tail.empty() || end != tail.c_str() + tail.size() || !(spec.tau >= 0.0) ||
        !(spec.tau <= 1.0)) {
      return fail("threshold needs a number in [0, 1]");
    }
  } else if (head == "greedy-knapsack") {
    spec.kind = PolicySpec::Kind::Greedy;
    spec.params_path = tail;  // optional predictor parameters
  } else if (head == "params") {
    spec.kind = PolicySpec::Kind::Params;
    if (tail.empty()) return fail("params needs a file path");
    spec.params_path = tail;
  } else {
    return fail("expected fixed:L, threshold:T, greedy-knapsack[:FILE], or params:FILE");
  }
  return spec;
}

/// Quantizes a difficulty signal into a declared level (the parameterless
/// greedy predictor).
EffortLevel quantize_signal(double signal) {
  if (signal < 0.25) return EffortLevel::Level0;
  if (signal < 0.75) return EffortLevel::Level1;
  return EffortLevel::Level2;
}

/// Plans a whole paper: predict a level per problem, replace unaffordable
/// picks with skips via the greedy packer, and freeze the result.
std::vector<Action> plan_greedy(const TestPaper& paper, Budget budget,
                                const InstanceModel& model, std::uint64_t episode_seed,
                                const std::optional<PolicyParams>& predictor) {
  const std::vector<double> signals = problem_signals(paper, model, episode_seed);
  const std::size_t n = paper.problems.size();
  std::vector<EffortLevel> predicted(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (predictor) {
      Observation obs;
      obs.difficulty_signal = signals[i];
      obs.remaining_budget_fraction =
          std::clamp(static_cast<double>(budget.limit) /
                         static_cast<double>(model.obs_budget_reference),
                     0.0, 1.0);
      obs.problems_remaining = static_cast<int>(n - i);
      obs.signals_ahead.assign(signals.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                               signals.end());
      LogitVector logits = policy_logits(*predictor, obs);
      int best = 0;
      for (int k = 1; k < kNumLevels; ++k) {
        if (logits[k] > logits[best]) best = k;
      }
      predicted[i] = static_cast<EffortLevel>(best);
    } else {
      predicted[i] = quantize_signal(signals[i]);
    }
  }

  // Predicted skips are pinned before packing; the packer only arbitrates
  // between the attempted levels.
  std::vector<std::optional<EffortLevel>> packable;
  std::vector<std::size_t> packable_index;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_attempt(predicted[i])) {
      packable.push_back(predicted[i]);
      packable_index.push_back(i);
    }
  }
  const std::vector<GreedyDecision> decisions =
      greedy_select_and_fill(packable, budget, CostEstimateTable{});

  std::vector<Action> plan(n, make_action(EffortLevel::Level3Skip));
  for (std::size_t k = 0; k < packable.size(); ++k) {
    if (decisions[k] == GreedyDecision::Keep) {
      plan[packable_index[k]] = make_action(*packable[k]);
    }
  }
  return plan;
}

// ============================================================================
// gen-papers
// ============================================================================

struct GenPapersOptions {
  std::string setting = "medium";
  std::size_t count = 0;
  std::size_t pool_size = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

void run_gen_papers(const GenPapersOptions& options) {
  const Setting setting = setting_from_string(options.setting);
  const fs::path out_path(options.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_manifest(fs::path(options.out + ".manifest.json"), "gen-papers",
                 json{{"setting", options.setting},
                      {"count", options.count},
                      {"pool_size", options.pool_size},
                      {"seed", options.seed},
                      {"out", options.out}});

  SourcePool pool = SourcePool::synthetic(options.pool_size, options.seed);
  const std::vector<TestPaper> papers =
      generate_papers(pool, setting, options.count, options.seed);

  std::ostringstream buffer;
  for (const TestPaper& paper : papers) {
    buffer << to_json_line(paper) << '\n';
    buffer << to_json_line(easy_variant(paper)) << '\n';
  }
  write_text_file(out_path, buffer.str());
}

// ============================================================================
// run
// ============================================================================

struct RunOptions {
  std::string papers;
  TokenCount budget = 1024;
  std::string policy = "fixed:1";
  std::string model;
  std::uint64_t seed = 0;
  std::string out;
  bool exact_regret = false;
  int jobs = 1;
};

struct PaperResult {
  TrajectoryRecord record;
  std::optional<double> exact_regret;
};

void run_run(const RunOptions& options) {
  const PolicySpec spec = parse_policy_spec(options.policy);
  const std::vector<TestPaper> papers = load_papers(options.papers);
  const InstanceModel model = resolve_model(options.model);
  const Budget budget{options.budget};
  validate(budget);

  std::optional<PolicyParams> loaded_params;
  if (!spec.params_path.empty()) loaded_params = load_params(spec.params_path);

  const fs::path out_dir(options.out);
  fs::create_directories(out_dir);
  write_manifest(out_dir / "run_manifest.json", "run",
                 json{{"papers", options.papers},
                      {"budget", options.budget},
                      {"policy", options.policy},
                      {"model", options.model},
                      {"seed", options.seed},
                      {"out", options.out},
                      {"exact_regret", options.exact_regret},
                      {"jobs", options.jobs}});

  // Shared stateless policy for the non-planning kinds.
  std::unique_ptr<Policy> shared_policy;
  switch (spec.kind) {
    case PolicySpec::Kind::Fixed:
      shared_policy = std::make_unique<FixedLevelPolicy>(spec.fixed_level);
      break;
    case PolicySpec::Kind::Threshold:
      shared_policy = std::make_unique<ThresholdSkipPolicy>(spec.tau);
      break;
    case PolicySpec::Kind::Params:
      shared_policy = std::make_unique<SoftmaxPolicy>(*loaded_params);
      break;
    case PolicySpec::Kind::Greedy:
      break;  // planned per paper
  }

  std::vector<PaperResult> results(papers.size());
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;

  const auto evaluate_one = [&](std::size_t index) {
    const TestPaper& paper = papers[index];
    // One seed per paper id, shared by both variants: the same problem gets
    // the same draws either way, so variant comparisons isolate ordering.
    const std::uint64_t episode_seed = rng::derive(options.seed, "episode", paper.paper_id);

    std::unique_ptr<Policy> planned;
    const Policy* policy = shared_policy.get();
    if (spec.kind == PolicySpec::Kind::Greedy) {
      planned = std::make_unique<PlannedPolicy>(
          plan_greedy(paper, budget, model, episode_seed, loaded_params));
      policy = planned.get();
    }

    PaperResult result;
    result.record.setting = paper.setting;
    result.record.variant = paper.variant;
    result.record.trajectory = run_episode(*policy, paper, budget, model, episode_seed);

    if (options.exact_regret && paper.variant == Variant::Original) {
      if (spec.kind == PolicySpec::Kind::Greedy) {
        const PolicyFactory factory = [&](const TestPaper& ordered) -> std::unique_ptr<Policy> {
          return std::make_unique<PlannedPolicy>(
              plan_greedy(ordered, budget, model, episode_seed, loaded_params));
        };
        result.exact_regret = exact_regret(factory, paper, budget, model, episode_seed);
      } else {
        result.exact_regret = exact_regret(*policy, paper, budget, model, episode_seed);
      }
    }
    results[index] = std::move(result);
  };

  const auto worker = [&] {
    while (true) {
      const std::size_t index = next.fetch_add(1);
      if (index >= papers.size()) return;
      try {
        evaluate_one(index);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (options.jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    const std::size_t thread_count =
        std::min(static_cast<std::size_t>(options.jobs), papers.size());
    threads.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (std::thread& thread : threads) thread.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::ostringstream trajectories;
  for (const PaperResult& result : results) {
    trajectories << to_json_line(result.record) << '\n';
  }
  write_text_file(out_dir / "trajectories.jsonl", trajectories.str());

  json summary{{"records", results.size()}};
  if (options.exact_regret) {
    json by_setting = json::object();
    for (Setting setting : {Setting::Medium, Setting::Hard}) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (papers[i].setting != setting || !results[i].exact_regret) continue;
        sum += *results[i].exact_regret;
        ++count;
      }
      if (count > 0) by_setting[to_string(setting)] = sum / static_cast<double>(count);
    }
    summary["exact_regret"] = std::move(by_setting);
  }
  write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
}

// ============================================================================
// train
// ============================================================================

struct TrainOptions {
  std::string papers;
  TokenCount budget = 1024;
  std::string model;
  std::string init;
  std::uint64_t seed = 0;
  std::string out;
  TrainerConfig config;
};

void run_train(const TrainOptions& options) {
  std::vector<TestPaper> papers = load_papers(options.papers);
  // Training sees the faced orderings only; easy variants are an
  // evaluation device and would leak the sorted order into the policy.
  std::erase_if(papers, [](const TestPaper& paper) { return paper.variant != Variant::Original; });
  if (papers.empty()) throw std::runtime_error("no original-variant papers to train on");

  const InstanceModel model = resolve_model(options.model);
  const Budget budget{options.budget};
  TrainerConfig config = options.config;
  config.seed = options.seed;
  validate(config);

  PolicyParams init;
  if (!options.init.empty()) init = load_params(options.init);

  const fs::path out_dir(options.out);
  fs::create_directories(out_dir);
  write_manifest(out_dir / "run_manifest.json", "train",
                 json{{"papers", options.papers},
                      {"budget", options.budget},
                      {"model", options.model},
                      {"init", options.init},
                      {"seed", options.seed},
                      {"out", options.out},
                      {"group_size", config.group_size},
                      {"clip_epsilon", config.clip_epsilon},
                      {"learning_rate", config.learning_rate},
                      {"iterations", config.iterations},
                      {"papers_per_iteration", config.papers_per_iteration},
                      {"normalize_by_length", config.normalize_by_length}});

  const TrainResult result = train(config, papers, budget, model, init);

  save_params(result.params, (out_dir / "params.json").string());
  std::ostringstream history;
  write_history_csv(history, result.history);
  write_text_file(out_dir / "history.csv", history.str());
}

// ============================================================================
// report
// ============================================================================

struct ReportOptions {
  std::vector<std::string> runs;
  std::string out;
  TokenCount bin_width = 64;
};

std::string sanitize_label(std::string label) {
  for (char& c : label) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '-';
  }
  return label;
}

void run_report(const ReportOptions& options) {
  const fs::path out_path(options.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_manifest(fs::path(options.out + ".manifest.json"), "report",
                 json{{"runs", options.runs}, {"out", options.out},
                      {"bin_width", options.bin_width}});

  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, TokenHistogram>> histograms;
  for (const std::string& run_dir : options.runs) {
    const fs::path dir(run_dir);
    json manifest;
    try {
      manifest = json::parse(read_text_file((dir / "run_manifest.json").string()));
    } catch (const json::parse_error& e) {
      throw std::runtime_error(run_dir + ": unreadable run_manifest.json: " + e.what());
    }
    if (!manifest.contains("params") || !manifest["params"].contains("policy") ||
        !manifest["params"].contains("budget")) {
      throw std::runtime_error(run_dir + ": run_manifest.json lacks policy or budget");
    }
    const std::string policy_label = manifest["params"]["policy"].get<std::string>();
    const TokenCount budget = manifest["params"]["budget"].get<TokenCount>();

    std::ifstream in(dir / "trajectories.jsonl");
    if (!in) throw std::runtime_error(run_dir + ": missing trajectories.jsonl");
    const std::vector<TrajectoryRecord> records = read_records_jsonl(in);

    json exact_by_setting = json::object();
    const fs::path summary_path = dir / "summary.json";
    if (fs::exists(summary_path)) {
      const json summary = json::parse(read_text_file(summary_path.string()));
      if (summary.contains("exact_regret")) exact_by_setting = summary["exact_regret"];
    }

    for (Setting setting : {Setting::Medium, Setting::Hard}) {
      std::vector<TrajectoryRecord> subset;
      for (const TrajectoryRecord& record : records) {
        if (record.setting == setting) subset.push_back(record);
      }
      if (subset.empty()) continue;
      std::optional<double> exact;
      if (exact_by_setting.contains(to_string(setting))) {
        exact = exact_by_setting[to_string(setting)].get<double>();
      }
      ReportRow row;
      row.setting = to_string(setting);
      row.budget = budget;
      row.policy = policy_label;
      row.metrics = build_report(subset, options.bin_width, exact);
      histograms.emplace_back(row.setting + "_" + std::to_string(budget) + "_" +
                                  sanitize_label(policy_label),
                              row.metrics.histogram);
      rows.push_back(std::move(row));
    }
  }

  std::ostringstream table;
  write_report_csv(table, rows);
  write_text_file(out_path, table.str());

  const fs::path stem = out_path.parent_path() / out_path.stem();
  for (const auto& [label, histogram] : histograms) {
    std::ostringstream csv;
    write_histogram_csv(csv, histogram);
    write_text_file(fs::path(stem.string() + "_hist_" + label + ".csv"), csv.str());
  }
}

}  // namespace

// ============================================================================
// Argument wiring
// ============================================================================

int execute(int argc, const char* const* argv) {
  CLI::App app{"Budgeted effort allocation over ordered problem sets"};
  app.require_subcommand(1);

  GenPapersOptions gen_options;
  CLI::App* gen = app.add_subcommand("gen-papers", "Generate a synthetic paper set (JSONL)");
  gen->add_option("--setting", gen_options.setting, "Paper difficulty setting")
      ->check(CLI::IsMember({"medium", "hard"}))
      ->required();
  gen->add_option("--count", gen_options.count, "Papers to generate")
      ->check(CLI::PositiveNumber)
      ->required();
  gen->add_option("--pool-size", gen_options.pool_size, "Problems per source pool")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--seed", gen_options.seed, "Generation seed")
      ->envname("OSKP_SEED")
      ->capture_default_str();
  gen->add_option("--out", gen_options.out, "Output JSONL path")->required();
  gen->callback([&gen_options] { run_gen_papers(gen_options); });

  RunOptions run_options;
  CLI::App* run = app.add_subcommand("run", "Evaluate a policy over a paper set");
  run->add_option("--papers", run_options.papers, "Papers JSONL path")->required();
  run->add_option("--budget", run_options.budget, "Token budget per paper")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  run->add_option("--policy", run_options.policy,
                  "fixed:L | threshold:T | greedy-knapsack[:FILE] | params:FILE")
      ->required();
  run->add_option("--model", run_options.model, "Instance model JSON (defaults built in)");
  run->add_option("--seed", run_options.seed, "Evaluation seed")
      ->envname("OSKP_SEED")
      ->capture_default_str();
  run->add_option("--out", run_options.out, "Output directory")->required();
  run->add_flag("--exact-regret", run_options.exact_regret,
                "Also compute exact ordering regret per original paper");
  run->add_option("--jobs", run_options.jobs, "Worker threads")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  run->callback([&run_options] { run_run(run_options); });

  TrainOptions train_options;
  CLI::App* tr = app.add_subcommand("train", "Train the softmax policy");
  tr->add_option("--papers", train_options.papers, "Papers JSONL path")->required();
  tr->add_option("--budget", train_options.budget, "Token budget per paper")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tr->add_option("--model", train_options.model, "Instance model JSON (defaults built in)");
  tr->add_option("--init", train_options.init, "Initial parameters JSON (defaults to zeros)");
  tr->add_option("--seed", train_options.seed, "Training seed")
      ->envname("OSKP_SEED")
      ->capture_default_str();
  tr->add_option("--out", train_options.out, "Output directory")->required();
  tr->add_option("--iterations", train_options.config.iterations, "Training iterations")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tr->add_option("--group-size", train_options.config.group_size, "Rollouts per paper group")
      ->check(CLI::Range(2, 1024))
      ->capture_default_str();
  tr->add_option("--clip-eps", train_options.config.clip_epsilon, "Surrogate clip width")
      ->check(CLI::Range(1e-6, 0.999999))
      ->capture_default_str();
  tr->add_option("--lr", train_options.config.learning_rate, "Learning rate (0 freezes)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tr->add_option("--papers-per-iter", train_options.config.papers_per_iteration,
                 "Paper groups per iteration")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr->add_flag("--normalize-length", train_options.config.normalize_by_length,
               "Divide each rollout's surrogate by its step count (ablation)");
  tr->callback([&train_options] { run_train(train_options); });

  ReportOptions report_options;
  CLI::App* report = app.add_subcommand("report", "Aggregate run directories into CSV");
  report->add_option("runs", report_options.runs, "Run directories")
      ->required()
      ->expected(-1);
  report->add_option("--out", report_options.out, "Output CSV path")->required();
  report->add_option("--bin-width", report_options.bin_width, "Histogram bin width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  report->callback([&report_options] { run_report(report_options); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace oskp::cli
