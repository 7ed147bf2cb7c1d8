#pragma once

/**
 * Level-selection policies.
 *
 * The trainable policy is a linear softmax over a five-feature observation;
 * sampling and log-probability evaluation share one code path so that a
 * probability recomputed later for the same parameters is bitwise identical
 * to the one stored at sampling time. Fixed-level, threshold-skip, and
 * precomputed-plan baselines share the Policy interface.
 */

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oskp/domain.hpp"
#include "oskp/rng.hpp"

namespace oskp {

// ============================================================================
// Observations and features
// ============================================================================

/// What the policy sees before deciding on one problem. Signals are noisy
/// difficulty estimates in [0, 1] (higher = harder); the whole rest of the
/// paper is visible through signals_ahead.
struct Observation {
  double difficulty_signal = 0.0;
  /// Remaining tokens over a fixed reference amount, clamped to [0, 1].
  /// Normalizing by a shared reference (not the episode's own limit) keeps
  /// the feature comparable across different global budgets.
  double remaining_budget_fraction = 0.0;
  /// Counts the current problem, so it is >= 1 when acting.
  int problems_remaining = 0;
  std::vector<double> signals_ahead;
};

inline constexpr int kNumFeatures = 5;

using FeatureVector = Eigen::Matrix<double, kNumFeatures, 1>;
using WeightMatrix = Eigen::Matrix<double, kNumLevels, kNumFeatures>;
using LogitVector = Eigen::Matrix<double, kNumLevels, 1>;

/// (bias, difficulty signal, remaining budget fraction, problems remaining,
///  mean of signals ahead; 0 when none remain).
FeatureVector features(const Observation& obs);

// ============================================================================
// Softmax policy
// ============================================================================

/// Row k holds the weights of level k (Level0..Level3Skip).
struct PolicyParams {
  WeightMatrix weights = WeightMatrix::Zero();
};

/// A logit came out NaN or infinite (diverged parameters or corrupt input).
struct NonFiniteLogit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// weights * features(obs). Throws NonFiniteLogit if any entry is not finite.
LogitVector policy_logits(const PolicyParams& params, const Observation& obs);

/// Numerically stable; shifting all logits by a constant leaves it unchanged.
LogitVector log_softmax(const LogitVector& logits);

/// Samples a level from the softmax and returns its log-probability. The
/// categorical draw walks the cumulative distribution in level order, with
/// the skip level last: with a shared uniform draw, raising the skip
/// probability can only turn attempt samples into skips, never the reverse.
std::pair<Action, double> sample_action(const PolicyParams& params, const Observation& obs,
                                        rng::Stream& stream);

/// Log-probability of an action under the parameters. Same code path as
/// sample_action, so recomputing under identical parameters reproduces the
/// stored value exactly.
double action_logprob(const PolicyParams& params, const Observation& obs,
                      const Action& action);

// ============================================================================
// Policy interface and baselines
// ============================================================================

class Policy {
 public:
  virtual ~Policy() = default;
  /// Returns the action and its log-probability (0 for deterministic policies).
  virtual std::pair<Action, double> act(const Observation& obs, rng::Stream& stream) const = 0;
};

class SoftmaxPolicy final : public Policy {
 public:
  explicit SoftmaxPolicy(PolicyParams params) : params_(std::move(params)) {}
  std::pair<Action, double> act(const Observation& obs, rng::Stream& stream) const override;
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
};

/// Always declares the same attempt level. Rejects Level3Skip: a policy
/// that skips everything scores zero by construction and exists only as a
/// degenerate case, not a baseline.
class FixedLevelPolicy final : public Policy {
 public:
  explicit FixedLevelPolicy(EffortLevel level);
  std::pair<Action, double> act(const Observation& obs, rng::Stream& stream) const override;

 private:
  EffortLevel level_;
};

/// Skips when the difficulty signal exceeds tau, otherwise attempts Level1.
class ThresholdSkipPolicy final : public Policy {
 public:
  explicit ThresholdSkipPolicy(double tau);
  std::pair<Action, double> act(const Observation& obs, rng::Stream& stream) const override;

 private:
  double tau_;
};

/// Plays back a fixed per-position plan (the predict-then-pack baseline
/// plans a whole paper up front, then executes). Position is recovered from
/// problems_remaining, so the plan length must match the paper length.
class PlannedPolicy final : public Policy {
 public:
  explicit PlannedPolicy(std::vector<Action> plan) : plan_(std::move(plan)) {}
  std::pair<Action, double> act(const Observation& obs, rng::Stream& stream) const override;

 private:
  std::vector<Action> plan_;
};

// ============================================================================
// Parameter serialization
// ============================================================================

/// {"weights": [[...5 doubles...] x4]}, rows in level order.
std::string params_to_json(const PolicyParams& params);
PolicyParams params_from_json(const std::string& text);
PolicyParams load_params(const std::string& path);
void save_params(const PolicyParams& params, const std::string& path);

}  // namespace oskp
