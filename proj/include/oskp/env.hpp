#pragma once

/**
 * Episode simulator.
 *
 * An episode walks one paper in order under a shared token budget. Each
 * attempted problem consumes a sampled token cost plus a fixed level-tag
 * overhead, may overflow into the next band, and succeeds with a
 * probability set by the problem's latent difficulty and the band actually
 * reached. Skips cost a small fixed amount. Spending is capped at the
 * remaining budget: a step that would overshoot is truncated, pays out the
 * remainder, and cannot be correct.
 *
 * All randomness is drawn from streams keyed by (run seed, paper id,
 * problem id, purpose), so a problem's cost and correctness draws do not
 * depend on the order problems are faced in, on the budget, or on what the
 * policy chose elsewhere. Counterfactual comparisons across budgets and
 * orderings stay coupled draw for draw.
 */

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "oskp/domain.hpp"
#include "oskp/papers.hpp"
#include "oskp/policy.hpp"

namespace oskp {

// ============================================================================
// Instance model
// ============================================================================

/// Inclusive token range.
struct CostRange {
  TokenCount lo = 0;
  TokenCount hi = 0;
};

/// Statistical model of how simulated problems respond to effort.
struct InstanceModel {
  /// success_prob[difficulty][band reached]; nonincreasing in difficulty at
  /// every level.
  std::array<std::array<double, kNumAttemptLevels>, kNumSources> success_prob;
  /// cost_ranges[difficulty][declared band]; sampled cost of an attempt,
  /// before the tag overhead. Each range must intersect its declared band.
  std::array<std::array<CostRange, kNumAttemptLevels>, kNumSources> cost_ranges;
  /// Chance an attempt's cost is drawn one band above the declared one.
  double overflow_prob = 0.15;
  /// Tokens burned by an explicit skip (the refusal marker).
  TokenCount skip_cost = 8;
  /// Fixed overhead of emitting the level tag; counts against the budget
  /// and into the realized band.
  TokenCount tag_cost = 12;
  BandTable bands;
  /// Noise on the per-problem difficulty signal shown to policies.
  double signal_noise_sigma = 0.1;
  /// Denominator of the remaining-budget-fraction feature.
  TokenCount obs_budget_reference = 2048;

  static InstanceModel defaults();
};

void validate(const InstanceModel& model);

/// Reads a JSON object with any subset of the model's keys; unspecified
/// fields keep their defaults. Throws std::invalid_argument on bad input.
InstanceModel model_from_json(const std::string& text);
InstanceModel load_model(const std::string& path);

// ============================================================================
// Episodes
// ============================================================================

/// step() was called after the paper ran out of problems.
struct EpisodeFinished : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EpisodeState {
  const TestPaper* paper = nullptr;
  Budget budget;
  TokenCount remaining = 0;
  std::size_t next_index = 0;
  std::uint64_t run_seed = 0;
};

EpisodeState make_episode(const TestPaper& paper, Budget budget, std::uint64_t run_seed);

/// Advances one problem. See the file comment for the spending rules.
StepOutcome step(EpisodeState& state, const Action& action, const InstanceModel& model);

/// Difficulty signals for every problem of the paper, in paper order.
/// Deterministic in (seed, paper id, problem id); independent of position.
std::vector<double> problem_signals(const TestPaper& paper, const InstanceModel& model,
                                    std::uint64_t run_seed);

/// Observation for the problem at `index`, given precomputed signals.
Observation make_observation(const EpisodeState& state, const std::vector<double>& signals,
                             std::size_t index, const InstanceModel& model);

struct EpisodeRecord {
  Trajectory trajectory;
  std::vector<Observation> observations;
  /// Log-probability of each chosen action under the acting policy.
  std::vector<double> logprobs;
};

/// Runs a full episode, recording what a learner needs.
EpisodeRecord run_episode_recorded(const Policy& policy, const TestPaper& paper, Budget budget,
                                   const InstanceModel& model, std::uint64_t run_seed);

/// Runs a full episode, keeping only the trajectory.
Trajectory run_episode(const Policy& policy, const TestPaper& paper, Budget budget,
                       const InstanceModel& model, std::uint64_t run_seed);

}  // namespace oskp
