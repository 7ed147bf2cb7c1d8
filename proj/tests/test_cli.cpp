#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oskp/metrics.hpp"
#include "oskp/papers.hpp"
#include "oskp/policy.hpp"

using namespace oskp;
namespace fs = std::filesystem;

namespace {

const fs::path& test_root() {
  static const fs::path root = [] {
    fs::path path = fs::temp_directory_path() / ("oskp-cli-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
    return path;
  }();
  return root;
}

fs::path case_dir(const std::string& name) {
  const fs::path dir = test_root() / name;
  fs::create_directories(dir);
  return dir;
}

/// Runs the built binary through the shell and returns its exit code.
int run_cli(const std::string& args) {
  const std::string command = std::string(OSKP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(bool(in), "missing file: " << path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

/// Generates a small paper set and returns the JSONL path.
fs::path make_papers(const fs::path& dir, const std::string& setting, int count,
                     std::uint64_t seed) {
  const fs::path path = dir / (setting + "_papers.jsonl");
  REQUIRE(run_cli("gen-papers --setting " + setting + " --count " + std::to_string(count) +
                  " --seed " + std::to_string(seed) + " --out " + path.string()) == 0);
  return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-papers emits a manifest and both variants of each paper") {
  const fs::path dir = case_dir("gen");
  const fs::path out = dir / "papers.jsonl";
  REQUIRE(run_cli("gen-papers --setting medium --count 4 --seed 11 --out " + out.string()) ==
          0);

  const nlohmann::json manifest =
      nlohmann::json::parse(read_file(dir / "papers.jsonl.manifest.json"));
  CHECK(manifest["command"] == "gen-papers");
  CHECK(manifest["params"]["count"] == 4);
  CHECK(manifest["params"]["seed"] == 11);

  const std::string text = read_file(out);
  CHECK(count_lines(text) == 8);
  std::ifstream in(out);
  const std::vector<TestPaper> papers = read_papers_jsonl(in);
  REQUIRE(papers.size() == 8);
  for (std::size_t i = 0; i < papers.size(); i += 2) {
    CHECK(papers[i].variant == Variant::Original);
    CHECK(papers[i + 1].variant == Variant::Easy);
    CHECK(papers[i].paper_id == papers[i + 1].paper_id);
    CHECK(papers[i].setting == Setting::Medium);
  }
}

TEST_CASE("gen-papers is bytewise reproducible and seed-sensitive") {
  const fs::path dir = case_dir("gen-repro");
  const fs::path a = dir / "a.jsonl";
  const fs::path b = dir / "b.jsonl";
  const fs::path c = dir / "c.jsonl";
  REQUIRE(run_cli("gen-papers --setting hard --count 5 --seed 3 --out " + a.string()) == 0);
  REQUIRE(run_cli("gen-papers --setting hard --count 5 --seed 3 --out " + b.string()) == 0);
  REQUIRE(run_cli("gen-papers --setting hard --count 5 --seed 4 --out " + c.string()) == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a) != read_file(c));
}

TEST_CASE("the seed falls back to the environment variable") {
  const fs::path dir = case_dir("gen-env");
  const fs::path flagged = dir / "flagged.jsonl";
  const fs::path from_env = dir / "env.jsonl";
  REQUIRE(run_cli("gen-papers --setting medium --count 2 --seed 21 --out " +
                  flagged.string()) == 0);
  const std::string command = "OSKP_SEED=21 " + std::string(OSKP_CLI_PATH) +
                              " gen-papers --setting medium --count 2 --out " +
                              from_env.string() + " >/dev/null 2>&1";
  REQUIRE(std::system(command.c_str()) == 0);
  CHECK(read_file(flagged) == read_file(from_env));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run_cli("gen-papers --setting medium --out nowhere.jsonl") == 2);  // missing --count
  CHECK(run_cli("gen-papers --setting nonsense --count 2 --out x.jsonl") == 2);
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("") == 2);

  const fs::path dir = case_dir("usage");
  const fs::path papers = make_papers(dir, "medium", 2, 1);
  const std::string base = "run --papers " + papers.string() + " --out " +
                           (dir / "out").string() + " --policy ";
  CHECK(run_cli(base + "nonsense") == 2);
  CHECK(run_cli(base + "fixed:3") == 2);
  CHECK(run_cli(base + "threshold:1.5") == 2);
  CHECK(run_cli(base + "params:") == 2);
}

TEST_CASE("runtime failures exit with 1") {
  const fs::path dir = case_dir("runtime");
  CHECK(run_cli("run --papers " + (dir / "absent.jsonl").string() + " --policy fixed:1 --out " +
                (dir / "out").string()) == 1);
  CHECK(run_cli("report " + (dir / "no-run").string() + " --out " +
                (dir / "report.csv").string()) == 1);
}

TEST_CASE("run writes a manifest, trajectories, and a summary") {
  const fs::path dir = case_dir("run");
  const fs::path papers = make_papers(dir, "medium", 3, 5);
  const fs::path out = dir / "eval";
  REQUIRE(run_cli("run --papers " + papers.string() +
                  " --budget 900 --policy fixed:1 --seed 2 --out " + out.string()) == 0);

  const nlohmann::json manifest =
      nlohmann::json::parse(read_file(out / "run_manifest.json"));
  CHECK(manifest["command"] == "run");
  CHECK(manifest["params"]["budget"] == 900);
  CHECK(manifest["params"]["policy"] == "fixed:1");

  std::ifstream in(out / "trajectories.jsonl");
  const std::vector<TrajectoryRecord> records = read_records_jsonl(in);
  REQUIRE(records.size() == 6);
  for (const TrajectoryRecord& record : records) {
    CHECK(record.trajectory.budget.limit == 900);
    CHECK(record.trajectory.total_tokens <= 900);
    for (const TrajectoryStep& step : record.trajectory.steps) {
      CHECK(step.action.predicted_level == EffortLevel::Level1);
    }
  }

  const nlohmann::json summary = nlohmann::json::parse(read_file(out / "summary.json"));
  CHECK(summary["records"] == 6);
}

TEST_CASE("run output is deterministic and job-count invariant") {
  const fs::path dir = case_dir("run-repro");
  const fs::path papers = make_papers(dir, "hard", 4, 9);
  const std::string base = "run --papers " + papers.string() +
                           " --budget 1024 --policy threshold:0.6 --seed 13 --out ";
  REQUIRE(run_cli(base + (dir / "one").string()) == 0);
  REQUIRE(run_cli(base + (dir / "two").string()) == 0);
  REQUIRE(run_cli(base + (dir / "par").string() + " --jobs 3") == 0);

  const std::string reference = read_file(dir / "one" / "trajectories.jsonl");
  CHECK(reference == read_file(dir / "two" / "trajectories.jsonl"));
  CHECK(reference == read_file(dir / "par" / "trajectories.jsonl"));
}

TEST_CASE("run can attach exact ordering regret to the summary") {
  const fs::path dir = case_dir("run-regret");
  const fs::path papers = make_papers(dir, "medium", 3, 8);
  const fs::path out = dir / "eval";
  REQUIRE(run_cli("run --papers " + papers.string() +
                  " --budget 700 --policy greedy-knapsack --seed 4 --exact-regret --out " +
                  out.string()) == 0);
  const nlohmann::json summary = nlohmann::json::parse(read_file(out / "summary.json"));
  REQUIRE(summary.contains("exact_regret"));
  REQUIRE(summary["exact_regret"].contains("medium"));
  const double regret = summary["exact_regret"]["medium"].get<double>();
  CHECK(regret >= 0.0);
  CHECK(regret <= 1.0);
}

TEST_CASE("train writes parameters and an iteration history") {
  const fs::path dir = case_dir("train");
  const fs::path papers = make_papers(dir, "medium", 2, 6);
  const fs::path out = dir / "trained";
  REQUIRE(run_cli("train --papers " + papers.string() +
                  " --budget 1024 --seed 17 --iterations 2 --group-size 2 "
                  "--papers-per-iter 1 --lr 0 --out " +
                  out.string()) == 0);

  const nlohmann::json manifest =
      nlohmann::json::parse(read_file(out / "run_manifest.json"));
  CHECK(manifest["command"] == "train");
  CHECK(manifest["params"]["iterations"] == 2);

  // lr 0 must leave the zero initialization untouched.
  const PolicyParams params = load_params((out / "params.json").string());
  CHECK(params.weights.isZero(0.0));

  const std::string history = read_file(out / "history.csv");
  CHECK(count_lines(history) == 3);
  CHECK(history.rfind("iteration,mean_return,mean_tokens,skip_rate,degenerate_groups\n", 0) ==
        0);

  const fs::path again = dir / "trained-again";
  REQUIRE(run_cli("train --papers " + papers.string() +
                  " --budget 1024 --seed 17 --iterations 2 --group-size 2 "
                  "--papers-per-iter 1 --lr 0 --out " +
                  again.string()) == 0);
  CHECK(read_file(out / "history.csv") == read_file(again / "history.csv"));
}

TEST_CASE("trained parameters round-trip into an evaluation run") {
  const fs::path dir = case_dir("train-run");
  const fs::path papers = make_papers(dir, "medium", 2, 31);
  const fs::path out = dir / "trained";
  REQUIRE(run_cli("train --papers " + papers.string() +
                  " --budget 1024 --seed 3 --iterations 3 --group-size 4 "
                  "--papers-per-iter 2 --lr 0.1 --out " +
                  out.string()) == 0);
  CHECK(run_cli("run --papers " + papers.string() + " --budget 1024 --policy params:" +
                (out / "params.json").string() + " --seed 3 --out " +
                (dir / "eval").string()) == 0);
  std::ifstream in(dir / "eval" / "trajectories.jsonl");
  CHECK(read_records_jsonl(in).size() == 4);
}

TEST_CASE("report aggregates runs into a table plus histograms") {
  const fs::path dir = case_dir("report");
  const fs::path medium = make_papers(dir, "medium", 3, 12);
  const fs::path hard = make_papers(dir, "hard", 3, 12);
  REQUIRE(run_cli("run --papers " + medium.string() +
                  " --budget 900 --policy fixed:1 --seed 7 --out " +
                  (dir / "eval-med").string()) == 0);
  REQUIRE(run_cli("run --papers " + hard.string() +
                  " --budget 1024 --policy threshold:0.5 --seed 7 --out " +
                  (dir / "eval-hard").string()) == 0);

  const fs::path out = dir / "report.csv";
  REQUIRE(run_cli("report " + (dir / "eval-med").string() + " " +
                  (dir / "eval-hard").string() + " --bin-width 128 --out " + out.string()) ==
          0);

  const std::string table = read_file(out);
  CHECK(count_lines(table) == 3);
  CHECK(table.rfind("setting,budget,policy,score,", 0) == 0);
  CHECK(table.find("\nmedium,900,fixed:1,") != std::string::npos);
  CHECK(table.find("\nhard,1024,threshold:0.5,") != std::string::npos);

  CHECK(fs::exists(dir / "report_hist_medium_900_fixed-1.csv"));
  CHECK(fs::exists(dir / "report_hist_hard_1024_threshold-0-5.csv"));
  CHECK(fs::exists(dir / "report.csv.manifest.json"));

  const std::string histogram = read_file(dir / "report_hist_medium_900_fixed-1.csv");
  CHECK(histogram.rfind("bin_lo,bin_hi,count\n", 0) == 0);
}

}  // TEST_SUITE
