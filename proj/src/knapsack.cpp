#include "oskp/knapsack.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace oskp {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double selection_value(const MckpInstance& instance, const std::vector<std::size_t>& pick) {
  double total = 0.0;  // left-to-right, same order in both solvers
  for (std::size_t j = 0; j < pick.size(); ++j) {
    total += instance.classes[j][pick[j]].value;
  }
  return total;
}

}  // namespace

void validate(const MckpInstance& instance) {
  validate(instance.budget);
  for (const std::vector<MckpItem>& cls : instance.classes) {
    if (cls.empty()) throw std::invalid_argument("MckpInstance: empty class");
    for (const MckpItem& item : cls) {
      if (item.cost < 0) throw std::invalid_argument("MckpInstance: negative item cost");
    }
  }
}

MckpSolution solve_mckp_bruteforce(const MckpInstance& instance) {
  validate(instance);
  const std::size_t n = instance.classes.size();
  if (n == 0) return MckpSolution{0.0, {}};

  std::size_t combinations = 1;
  for (const std::vector<MckpItem>& cls : instance.classes) {
    if (cls.size() > 1000000 / combinations) {
      throw TooLarge("TooLarge: brute-force enumeration past 1e6 combinations");
    }
    combinations *= cls.size();
  }

  // Odometer enumeration, class 0 most significant, so the first optimum
  // found is the lexicographically smallest one.
  std::vector<std::size_t> pick(n, 0);
  MckpSolution best{kNegInf, {}};
  while (true) {
    TokenCount cost = 0;
    for (std::size_t j = 0; j < n; ++j) cost += instance.classes[j][pick[j]].cost;
    if (cost <= instance.budget.limit) {
      double value = selection_value(instance, pick);
      if (value > best.value) best = MckpSolution{value, pick};
    }
    std::size_t j = n;
    while (j > 0) {
      --j;
      if (++pick[j] < instance.classes[j].size()) break;
      pick[j] = 0;
      if (j == 0) {
        if (best.value == kNegInf) {
          throw std::invalid_argument("solve_mckp: no feasible selection");
        }
        return best;
      }
    }
  }
}

MckpSolution solve_mckp_dp(const MckpInstance& instance) {
  validate(instance);
  const std::size_t n = instance.classes.size();
  if (n == 0) return MckpSolution{0.0, {}};
  const TokenCount budget = instance.budget.limit;
  if (static_cast<long long>(n + 1) * (budget + 1) > 50'000'000LL) {
    throw TooLarge("TooLarge: DP table past 5e7 cells");
  }

  // dp[j][b] = best value achievable from classes [j, n) with b tokens left;
  // choice[j][b] = smallest item index attaining it (the enumerator's tie-break).
  const std::size_t width = static_cast<std::size_t>(budget) + 1;
  constexpr std::size_t kNoChoice = static_cast<std::size_t>(-1);
  std::vector<std::vector<double>> dp(n + 1, std::vector<double>(width, kNegInf));
  std::vector<std::vector<std::size_t>> choice(n, std::vector<std::size_t>(width, kNoChoice));
  std::fill(dp[n].begin(), dp[n].end(), 0.0);
  for (std::size_t j = n; j-- > 0;) {
    for (TokenCount b = 0; b <= budget; ++b) {
      double best = kNegInf;
      std::size_t best_k = kNoChoice;
      for (std::size_t k = 0; k < instance.classes[j].size(); ++k) {
        const MckpItem& item = instance.classes[j][k];
        if (item.cost > b) continue;
        double rest = dp[j + 1][static_cast<std::size_t>(b - item.cost)];
        if (rest == kNegInf) continue;
        double v = item.value + rest;
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      dp[j][static_cast<std::size_t>(b)] = best;
      choice[j][static_cast<std::size_t>(b)] = best_k;
    }
  }
  if (dp[0][static_cast<std::size_t>(budget)] == kNegInf) {
    throw std::invalid_argument("solve_mckp: no feasible selection");
  }

  MckpSolution solution;
  solution.selection.resize(n);
  TokenCount b = budget;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t k = choice[j][static_cast<std::size_t>(b)];
    if (k == kNoChoice) throw std::logic_error("solve_mckp_dp: reconstruction lost the optimum");
    solution.selection[j] = k;
    b -= instance.classes[j][k].cost;
  }
  solution.value = selection_value(instance, solution.selection);
  return solution;
}

TokenCount estimate_cost(const std::optional<EffortLevel>& predicted,
                         const CostEstimateTable& table) {
  if (!predicted.has_value()) return table.default_cost;
  switch (*predicted) {
    case EffortLevel::Level0: return table.level0;
    case EffortLevel::Level1: return table.level1;
    case EffortLevel::Level2: return table.level2;
    case EffortLevel::Level3Skip: return table.default_cost;
  }
  throw std::invalid_argument("estimate_cost: unknown EffortLevel");
}

std::vector<GreedyDecision> greedy_select_and_fill(
    const std::vector<std::optional<EffortLevel>>& predicted_levels, Budget budget,
    const CostEstimateTable& table) {
  validate(budget);
  const std::size_t n = predicted_levels.size();
  std::vector<TokenCount> costs(n);
  for (std::size_t i = 0; i < n; ++i) costs[i] = estimate_cost(predicted_levels[i], table);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&costs](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });

  std::vector<GreedyDecision> decisions(n, GreedyDecision::ReplaceWithNA);
  TokenCount running = 0;
  for (std::size_t i : order) {
    if (running + costs[i] <= budget.limit) {
      running += costs[i];
      decisions[i] = GreedyDecision::Keep;
    }
  }
  return decisions;
}

std::optional<std::size_t> hard_truncate(const std::vector<TokenCount>& tokens_by_problem,
                                         Budget budget) {
  validate(budget);
  TokenCount running = 0;
  for (std::size_t i = 0; i < tokens_by_problem.size(); ++i) {
    if (tokens_by_problem[i] < 0) {
      throw std::invalid_argument("hard_truncate: negative token cost");
    }
    running += tokens_by_problem[i];
    if (running > budget.limit) return i;
  }
  return std::nullopt;
}

}  // namespace oskp
