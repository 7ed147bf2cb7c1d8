#pragma once

/**
 * Group-relative policy optimization.
 *
 * Training rolls out groups of episodes per paper under frozen parameters,
 * scores each rollout against its group mean (no variance scaling, no
 * per-token normalization unless explicitly enabled), and takes ascent
 * steps on a clipped importance-ratio surrogate. The group mean baseline
 * makes the advantages sum to zero within a group and leaves the update
 * direction unchanged when a constant is added to every return.
 */

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "oskp/env.hpp"
#include "oskp/policy.hpp"

namespace oskp {

/// Rollout bookkeeping disagrees with the parameters it claims to come from
/// (wrong sizes, or stored log-probabilities that the frozen parameters do
/// not reproduce).
struct MismatchedParams : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A parameter update produced NaN or infinity.
struct NonFiniteUpdate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ============================================================================
// Rollout groups and advantages
// ============================================================================

struct RolloutGroup {
  std::string paper_id;
  std::vector<EpisodeRecord> rollouts;
  /// returns[i] == rollouts[i].trajectory.return_value, kept denormalized
  /// for the advantage arithmetic.
  std::vector<int> returns;
};

/// G rollouts of one paper under frozen parameters, each on its own derived
/// episode seed.
RolloutGroup collect_group(const PolicyParams& params_old, const TestPaper& paper,
                           Budget budget, const InstanceModel& model, int group_size,
                           std::uint64_t seed);

/// Advantage of each return against the group mean. Computed as
/// (G * R_i - sum(R)) / G, which is exact for integer returns, so shifting
/// every return by a constant changes no advantage bit.
std::vector<double> group_advantages(const std::vector<int>& returns);
std::vector<double> group_advantages(const std::vector<double>& returns);

// ============================================================================
// Clipped surrogate
// ============================================================================

/**
 * Mean over groups of (1/G) sum_i sum_t min(r A_i, clip(r, 1-e, 1+e) A_i),
 * where r = pi_params / pi_params_old for the stored action and A_i is the
 * group advantage of rollout i. With normalize_by_length, each rollout's
 * step sum is divided by its step count.
 *
 * Stored log-probabilities are revalidated against params_old; evaluating
 * at params == params_old therefore gives every ratio as exactly 1.
 * Throws MismatchedParams on bookkeeping that params_old cannot explain.
 */
double clipped_objective(const PolicyParams& params, const PolicyParams& params_old,
                         const std::vector<RolloutGroup>& groups, double clip_epsilon,
                         bool normalize_by_length = false);

/// Exact gradient of clipped_objective with respect to params. Clipped-out
/// steps contribute nothing; zero-advantage groups contribute exactly zero.
WeightMatrix objective_gradient(const PolicyParams& params, const PolicyParams& params_old,
                                const std::vector<RolloutGroup>& groups, double clip_epsilon,
                                bool normalize_by_length = false);

/**
 * Max relative error between objective_gradient and a central finite
 * difference of clipped_objective, over all weight components. Components
 * whose perturbation could cross a clip kink are excluded; throws
 * std::runtime_error if that excludes everything.
 */
double finite_difference_check(const PolicyParams& params, const PolicyParams& params_old,
                               const std::vector<RolloutGroup>& groups, double clip_epsilon,
                               bool normalize_by_length, double step);

// ============================================================================
// Training loop
// ============================================================================

struct TrainerConfig {
  int group_size = 8;
  double clip_epsilon = 0.2;
  double learning_rate = 0.05;
  int iterations = 500;
  int papers_per_iteration = 16;
  /// Per-trajectory length normalization; off by default on purpose (kept
  /// only as an ablation switch).
  bool normalize_by_length = false;
  std::uint64_t seed = 0;
};

/// group_size >= 2 (a single rollout has no group baseline), clip_epsilon
/// in (0, 1), learning_rate >= 0 (zero is allowed and must leave the
/// parameters untouched), iterations >= 0, papers_per_iteration >= 1.
void validate(const TrainerConfig& config);

struct TrainStats {
  int iteration = 0;
  double mean_return = 0.0;
  double mean_tokens = 0.0;
  double skip_rate = 0.0;
  int degenerate_groups = 0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainStats> history;
};

/// Cycles the papers in order, papers_per_iteration groups per iteration,
/// one ascent step per iteration. Stats describe the rollouts the step was
/// computed from. Throws NonFiniteUpdate if the parameters leave the finite
/// range.
TrainResult train(const TrainerConfig& config, const std::vector<TestPaper>& papers,
                  Budget budget, const InstanceModel& model, const PolicyParams& init);

/// Header "iteration,mean_return,mean_tokens,skip_rate,degenerate_groups".
void write_history_csv(std::ostream& out, const std::vector<TrainStats>& history);

}  // namespace oskp
