#pragma once

/**
 * Core value types and reward arithmetic.
 *
 * A test paper is a fixed-order list of problems; the solver walks it once
 * under a shared token budget, declaring an effort level (or a skip) per
 * problem. A step earns reward 1 only when the answer is correct, the
 * problem was actually attempted, and the tokens spent land in the band
 * that was declared. Everything else in the project is built on the types
 * and predicates defined here.
 */

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace oskp {

using TokenCount = std::int64_t;

// ============================================================================
// Effort levels and token bands
// ============================================================================

/// Declared effort for one problem. Level0..Level2 are attempts of
/// increasing token appetite; Level3Skip is an explicit refusal.
enum class EffortLevel : int { Level0 = 0, Level1 = 1, Level2 = 2, Level3Skip = 3 };

inline constexpr int kNumLevels = 4;
inline constexpr int kNumAttemptLevels = 3;

constexpr bool is_attempt(EffortLevel level) { return level != EffortLevel::Level3Skip; }

const char* to_string(EffortLevel level);

/// Token thresholds separating the attempt bands:
/// Level0 = [0, boundaries[0]), Level1 = [boundaries[0], boundaries[1]],
/// Level2 = (boundaries[1], inf). Defaults give [0,256), [256,512], (512,inf).
struct BandTable {
  std::array<TokenCount, 2> boundaries{256, 512};
};

/// Throws std::invalid_argument unless 0 < boundaries[0] <= boundaries[1].
void validate(const BandTable& bands);

/// Band that a token count falls into. Total, never returns Level3Skip.
EffortLevel level_of_tokens(TokenCount tokens, const BandTable& bands);

// ============================================================================
// Problems and budgets
// ============================================================================

struct Budget {
  TokenCount limit = 0;
};

/// Throws std::invalid_argument on a negative limit.
void validate(const Budget& budget);

/// Which difficulty pool a problem was drawn from.
enum class Source : int { Easy = 0, Med = 1, Hard = 2 };

inline constexpr int kNumSources = 3;

const char* to_string(Source source);
Source source_from_string(const std::string& text);

struct ProblemSpec {
  std::string id;
  Source source = Source::Easy;
  /// Latent difficulty the simulator scores against. Tracks `source` for
  /// generated papers; easy variants relabel it without touching `source`.
  Source difficulty = Source::Easy;
};

// ============================================================================
// Actions, outcomes, trajectories
// ============================================================================

struct Action {
  EffortLevel predicted_level = EffortLevel::Level0;
  bool attempt = true;
};

/// The only sanctioned way to build an Action: `attempt` is derived, not chosen.
constexpr Action make_action(EffortLevel level) {
  return Action{level, is_attempt(level)};
}

struct StepOutcome {
  TokenCount tokens_used = 0;
  bool correct = false;
  bool truncated = false;
  /// Band of tokens_used, tag included; what the reward check compares against.
  EffortLevel realized_level = EffortLevel::Level0;
  int reward = 0;
};

struct TrajectoryStep {
  Action action;
  StepOutcome outcome;
};

struct Trajectory {
  std::string paper_id;
  Budget budget;
  std::vector<TrajectoryStep> steps;
  TokenCount total_tokens = 0;
  int return_value = 0;
};

/// Reward for one step: 1 iff correct, attempted, and the spent tokens fall
/// in the declared band. A skip can never score, and neither can an attempt
/// that lands outside its declared band (over- or under-shooting).
int step_reward(bool correct, EffortLevel predicted_level, TokenCount tokens_used,
                const BandTable& bands);

int trajectory_return(const std::vector<TrajectoryStep>& steps);

/// Assembles a trajectory and recomputes the totals from the steps.
/// Throws std::invalid_argument on negative token counts, rewards outside
/// {0, 1}, a reward of 1 on a skipped or incorrect step, or steps that
/// overspend the budget.
Trajectory make_trajectory(std::string paper_id, Budget budget,
                           std::vector<TrajectoryStep> steps);

}  // namespace oskp
