#pragma once

/**
 * Deterministic multiple-choice knapsack solvers and the predict-then-pack
 * baseline.
 *
 * An instance has one class per problem and one item per candidate effort
 * level; at most one item may be taken per class. Callers that want "taking
 * nothing" to be feasible add an explicit zero-cost zero-value item to each
 * class. Two solvers are provided: a brute-force enumerator used as the
 * oracle in tests, and a DP over residual budget that must agree with it
 * exactly, including tie-breaks.
 */

#include <cstddef>
#include <optional>
#include <vector>

#include "oskp/domain.hpp"

namespace oskp {

// ============================================================================
// Exact solvers
// ============================================================================

struct MckpItem {
  TokenCount cost = 0;
  double value = 0.0;
};

struct MckpInstance {
  std::vector<std::vector<MckpItem>> classes;
  Budget budget;
};

/// Instance too big for the brute-force enumerator.
struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MckpSolution {
  double value = 0.0;
  /// One item index per class. Among optima, the lexicographically smallest.
  std::vector<std::size_t> selection;
};

/// Throws std::invalid_argument on an empty class or negative cost,
/// and propagates the budget check.
void validate(const MckpInstance& instance);

/// Exhaustive oracle. Throws TooLarge when the product of class sizes
/// exceeds one million combinations.
MckpSolution solve_mckp_bruteforce(const MckpInstance& instance);

/// DP over (class, residual budget). Agrees with the oracle: same optimal
/// value (both re-sum the chosen items left to right) and the same
/// lexicographically smallest optimal selection. Exact agreement assumes
/// item values whose partial sums are exact in floating point; the tests
/// arrange that by using dyadic values.
MckpSolution solve_mckp_dp(const MckpInstance& instance);

// ============================================================================
// Predict-then-pack baseline
// ============================================================================

/// Fixed per-level cost estimates used when packing predicted levels.
/// `default_cost` stands in for a missing or unusable prediction.
struct CostEstimateTable {
  TokenCount level0 = 128;
  TokenCount level1 = 384;
  TokenCount level2 = 768;
  TokenCount default_cost = 384;
};

/// Estimated cost of a predicted level. A missing prediction or a skip
/// prediction has no band of its own and falls back to default_cost.
TokenCount estimate_cost(const std::optional<EffortLevel>& predicted,
                         const CostEstimateTable& table);

enum class GreedyDecision { Keep, ReplaceWithNA };

/// Packs problems by estimated cost, cheapest first (ties keep input order),
/// accepting each while the running total stays within the budget. Rejected
/// problems are marked ReplaceWithNA. Decisions are returned in input order.
std::vector<GreedyDecision> greedy_select_and_fill(
    const std::vector<std::optional<EffortLevel>>& predicted_levels, Budget budget,
    const CostEstimateTable& table);

/// First index at which the running sum of actual token costs exceeds the
/// budget, or nullopt when everything fits. Cuts at the exact problem
/// boundary: index i means problems [0, i) fit and problem i does not.
std::optional<std::size_t> hard_truncate(const std::vector<TokenCount>& tokens_by_problem,
                                         Budget budget);

}  // namespace oskp
