#include "oskp/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "oskp/csv.hpp"
#include "oskp/rng.hpp"

namespace oskp {
namespace {

// Stored log-probabilities must be reproducible bit for bit; the tolerance
// only absorbs cross-translation-unit FP contraction differences.
constexpr double kLogprobTolerance = 1e-9;

void validate_group(const RolloutGroup& group) {
  if (group.rollouts.empty()) {
    throw MismatchedParams("MismatchedParams: empty rollout group");
  }
  if (group.returns.size() != group.rollouts.size()) {
    throw MismatchedParams("MismatchedParams: returns and rollouts disagree in size");
  }
  for (const EpisodeRecord& rollout : group.rollouts) {
    const std::size_t steps = rollout.trajectory.steps.size();
    if (rollout.observations.size() != steps || rollout.logprobs.size() != steps) {
      throw MismatchedParams(
          "MismatchedParams: rollout lacks an observation or log-probability per step");
    }
  }
  for (std::size_t i = 0; i < group.returns.size(); ++i) {
    if (group.returns[i] != group.rollouts[i].trajectory.return_value) {
      throw MismatchedParams("MismatchedParams: stored return disagrees with its trajectory");
    }
  }
}

double checked_old_logprob(const PolicyParams& params_old, const EpisodeRecord& rollout,
                           std::size_t t) {
  const double recomputed = action_logprob(params_old, rollout.observations[t],
                                           rollout.trajectory.steps[t].action);
  if (std::abs(recomputed - rollout.logprobs[t]) > kLogprobTolerance) {
    throw MismatchedParams(
        "MismatchedParams: stored log-probability not reproduced by params_old");
  }
  return recomputed;
}

/// Walks every (group, rollout, step) with its advantage and weight.
template <typename Visit>
void for_each_step(const std::vector<RolloutGroup>& groups, bool normalize_by_length,
                   Visit&& visit) {
  for (const RolloutGroup& group : groups) {
    validate_group(group);
    const std::vector<double> advantages = group_advantages(group.returns);
    const double group_scale = 1.0 / static_cast<double>(group.rollouts.size());
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      const EpisodeRecord& rollout = group.rollouts[i];
      const std::size_t steps = rollout.trajectory.steps.size();
      double weight = group_scale;
      if (normalize_by_length && steps > 0) weight /= static_cast<double>(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        visit(rollout, t, advantages[i], weight);
      }
    }
  }
}

}  // namespace

RolloutGroup collect_group(const PolicyParams& params_old, const TestPaper& paper,
                           Budget budget, const InstanceModel& model, int group_size,
                           std::uint64_t seed) {
  if (group_size < 1) throw std::invalid_argument("collect_group: group_size must be >= 1");
  const SoftmaxPolicy policy(params_old);
  RolloutGroup group;
  group.paper_id = paper.paper_id;
  group.rollouts.reserve(static_cast<std::size_t>(group_size));
  group.returns.reserve(static_cast<std::size_t>(group_size));
  for (int g = 0; g < group_size; ++g) {
    EpisodeRecord record =
        run_episode_recorded(policy, paper, budget, model, rng::derive(seed, "rollout", g));
    group.returns.push_back(record.trajectory.return_value);
    group.rollouts.push_back(std::move(record));
  }
  return group;
}

std::vector<double> group_advantages(const std::vector<double>& returns) {
  if (returns.empty()) throw std::invalid_argument("group_advantages: empty group");
  const double n = static_cast<double>(returns.size());
  double sum = 0.0;
  for (double r : returns) sum += r;
  std::vector<double> advantages;
  advantages.reserve(returns.size());
  for (double r : returns) advantages.push_back((n * r - sum) / n);
  return advantages;
}

std::vector<double> group_advantages(const std::vector<int>& returns) {
  std::vector<double> as_double(returns.begin(), returns.end());
  return group_advantages(as_double);
}

double clipped_objective(const PolicyParams& params, const PolicyParams& params_old,
                         const std::vector<RolloutGroup>& groups, double clip_epsilon,
                         bool normalize_by_length) {
  if (groups.empty()) throw std::invalid_argument("clipped_objective: no groups");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("clipped_objective: clip_epsilon outside (0, 1)");
  }
  double total = 0.0;
  for_each_step(groups, normalize_by_length,
                [&](const EpisodeRecord& rollout, std::size_t t, double advantage,
                    double weight) {
                  const double lp_old = checked_old_logprob(params_old, rollout, t);
                  const double lp_new = action_logprob(params, rollout.observations[t],
                                                       rollout.trajectory.steps[t].action);
                  const double ratio = std::exp(lp_new - lp_old);
                  const double clipped =
                      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
                  total += weight * std::min(ratio * advantage, clipped * advantage);
                });
  return total / static_cast<double>(groups.size());
}

WeightMatrix objective_gradient(const PolicyParams& params, const PolicyParams& params_old,
                                const std::vector<RolloutGroup>& groups, double clip_epsilon,
                                bool normalize_by_length) {
  if (groups.empty()) throw std::invalid_argument("objective_gradient: no groups");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("objective_gradient: clip_epsilon outside (0, 1)");
  }
  WeightMatrix gradient = WeightMatrix::Zero();
  for_each_step(
      groups, normalize_by_length,
      [&](const EpisodeRecord& rollout, std::size_t t, double advantage, double weight) {
        const double lp_old = checked_old_logprob(params_old, rollout, t);
        if (advantage == 0.0) return;
        const Observation& obs = rollout.observations[t];
        const Action& action = rollout.trajectory.steps[t].action;
        const double lp_new = action_logprob(params, obs, action);
        const double ratio = std::exp(lp_new - lp_old);
        // min(rA, clip(r)A) follows the unclipped branch only while the
        // ratio is on the non-saturating side of its kink.
        const bool active = advantage > 0.0 ? ratio <= 1.0 + clip_epsilon
                                            : ratio >= 1.0 - clip_epsilon;
        if (!active) return;
        const LogitVector logprobs = log_softmax(policy_logits(params, obs));
        LogitVector indicator = LogitVector::Zero();
        indicator[static_cast<int>(action.predicted_level)] = 1.0;
        const LogitVector score = indicator - logprobs.array().exp().matrix();
        gradient.noalias() +=
            (weight * ratio * advantage) * (score * features(obs).transpose());
      });
  return gradient / static_cast<double>(groups.size());
}

double finite_difference_check(const PolicyParams& params, const PolicyParams& params_old,
                               const std::vector<RolloutGroup>& groups, double clip_epsilon,
                               bool normalize_by_length, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be > 0");
  const WeightMatrix analytic =
      objective_gradient(params, params_old, groups, clip_epsilon, normalize_by_length);

  // A component is checkable only if no step's ratio can cross a clip kink
  // within the perturbation; crossing one makes the central difference
  // measure the wrong branch.
  WeightMatrix tainted = WeightMatrix::Zero();
  for_each_step(groups, normalize_by_length,
                [&](const EpisodeRecord& rollout, std::size_t t, double advantage, double) {
                  if (advantage == 0.0) return;
                  const Observation& obs = rollout.observations[t];
                  const Action& action = rollout.trajectory.steps[t].action;
                  const double lp_old = checked_old_logprob(params_old, rollout, t);
                  const double ratio =
                      std::exp(action_logprob(params, obs, action) - lp_old);
                  const double boundary_distance = std::min(
                      std::abs(ratio - (1.0 - clip_epsilon)), std::abs(ratio - (1.0 + clip_epsilon)));
                  const LogitVector logprobs = log_softmax(policy_logits(params, obs));
                  LogitVector indicator = LogitVector::Zero();
                  indicator[static_cast<int>(action.predicted_level)] = 1.0;
                  const WeightMatrix sensitivity =
                      ratio * ((indicator - logprobs.array().exp().matrix()) *
                               features(obs).transpose());
                  for (int k = 0; k < kNumLevels; ++k) {
                    for (int j = 0; j < kNumFeatures; ++j) {
                      const double travel = 4.0 * step * std::max(1.0, std::abs(sensitivity(k, j)));
                      if (boundary_distance <= travel) tainted(k, j) = 1.0;
                    }
                  }
                });

  double worst = 0.0;
  int evaluated = 0;
  for (int k = 0; k < kNumLevels; ++k) {
    for (int j = 0; j < kNumFeatures; ++j) {
      if (tainted(k, j) != 0.0) continue;
      PolicyParams plus = params;
      PolicyParams minus = params;
      plus.weights(k, j) += step;
      minus.weights(k, j) -= step;
      const double numeric =
          (clipped_objective(plus, params_old, groups, clip_epsilon, normalize_by_length) -
           clipped_objective(minus, params_old, groups, clip_epsilon, normalize_by_length)) /
          (2.0 * step);
      const double error =
          std::abs(analytic(k, j) - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, error);
      ++evaluated;
    }
  }
  if (evaluated == 0) {
    throw std::runtime_error("finite_difference_check: every component sits near a clip kink");
  }
  return worst;
}

void validate(const TrainerConfig& config) {
  if (config.group_size < 2) {
    throw std::invalid_argument("TrainerConfig: group_size must be >= 2");
  }
  if (!(config.clip_epsilon > 0.0 && config.clip_epsilon < 1.0)) {
    throw std::invalid_argument("TrainerConfig: clip_epsilon outside (0, 1)");
  }
  if (!(config.learning_rate >= 0.0)) {
    throw std::invalid_argument("TrainerConfig: negative learning_rate");
  }
  if (config.iterations < 0) throw std::invalid_argument("TrainerConfig: negative iterations");
  if (config.papers_per_iteration < 1) {
    throw std::invalid_argument("TrainerConfig: papers_per_iteration must be >= 1");
  }
}

TrainResult train(const TrainerConfig& config, const std::vector<TestPaper>& papers,
                  Budget budget, const InstanceModel& model, const PolicyParams& init) {
  validate(config);
  validate(budget);
  validate(model);
  if (papers.empty()) throw std::invalid_argument("train: no papers");

  TrainResult result;
  result.params = init;
  result.history.reserve(static_cast<std::size_t>(config.iterations));
  std::size_t cursor = 0;
  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    const PolicyParams params_old = result.params;
    std::vector<RolloutGroup> groups;
    groups.reserve(static_cast<std::size_t>(config.papers_per_iteration));
    for (int j = 0; j < config.papers_per_iteration; ++j) {
      const TestPaper& paper = papers[cursor % papers.size()];
      ++cursor;
      groups.push_back(collect_group(params_old, paper, budget, model, config.group_size,
                                     rng::derive(config.seed, "train", iteration, j)));
    }

    const WeightMatrix gradient =
        objective_gradient(result.params, params_old, groups, config.clip_epsilon,
                           config.normalize_by_length);
    result.params.weights += config.learning_rate * gradient;
    if (!result.params.weights.allFinite()) {
      throw NonFiniteUpdate("NonFiniteUpdate: parameters left the finite range at iteration " +
                            std::to_string(iteration));
    }

    TrainStats stats;
    stats.iteration = iteration;
    std::size_t rollouts = 0;
    std::size_t steps = 0;
    std::size_t skips = 0;
    double return_sum = 0.0;
    double token_sum = 0.0;
    for (const RolloutGroup& group : groups) {
      bool degenerate = true;
      for (const EpisodeRecord& rollout : group.rollouts) {
        ++rollouts;
        return_sum += rollout.trajectory.return_value;
        token_sum += static_cast<double>(rollout.trajectory.total_tokens);
        for (const TrajectoryStep& trajectory_step : rollout.trajectory.steps) {
          ++steps;
          if (!trajectory_step.action.attempt) ++skips;
        }
      }
      for (int r : group.returns) {
        if (r != group.returns.front()) degenerate = false;
      }
      if (degenerate) ++stats.degenerate_groups;
    }
    stats.mean_return = return_sum / static_cast<double>(rollouts);
    stats.mean_tokens = token_sum / static_cast<double>(rollouts);
    stats.skip_rate = steps == 0 ? 0.0 : static_cast<double>(skips) / static_cast<double>(steps);
    result.history.push_back(stats);
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<TrainStats>& history) {
  out << "iteration,mean_return,mean_tokens,skip_rate,degenerate_groups\n";
  for (const TrainStats& stats : history) {
    out << stats.iteration << ',' << csv_number(stats.mean_return) << ','
        << csv_number(stats.mean_tokens) << ',' << csv_number(stats.skip_rate) << ','
        << stats.degenerate_groups << '\n';
  }
}

}  // namespace oskp
