#include "oskp/domain.hpp"

namespace oskp {

const char* to_string(EffortLevel level) {
  switch (level) {
    case EffortLevel::Level0: return "level0";
    case EffortLevel::Level1: return "level1";
    case EffortLevel::Level2: return "level2";
    case EffortLevel::Level3Skip: return "skip";
  }
  throw std::invalid_argument("unknown EffortLevel");
}

void validate(const BandTable& bands) {
  if (bands.boundaries[0] <= 0 || bands.boundaries[0] > bands.boundaries[1]) {
    throw std::invalid_argument("BandTable: need 0 < boundaries[0] <= boundaries[1]");
  }
}

EffortLevel level_of_tokens(TokenCount tokens, const BandTable& bands) {
  if (tokens < 0) throw std::invalid_argument("level_of_tokens: negative token count");
  if (tokens < bands.boundaries[0]) return EffortLevel::Level0;
  if (tokens <= bands.boundaries[1]) return EffortLevel::Level1;
  return EffortLevel::Level2;
}

void validate(const Budget& budget) {
  if (budget.limit < 0) throw std::invalid_argument("Budget: negative limit");
}

const char* to_string(Source source) {
  switch (source) {
    case Source::Easy: return "easy";
    case Source::Med: return "med";
    case Source::Hard: return "hard";
  }
  throw std::invalid_argument("unknown Source");
}

Source source_from_string(const std::string& text) {
  if (text == "easy") return Source::Easy;
  if (text == "med") return Source::Med;
  if (text == "hard") return Source::Hard;
  throw std::invalid_argument("unknown source name: '" + text + "'");
}

int step_reward(bool correct, EffortLevel predicted_level, TokenCount tokens_used,
                const BandTable& bands) {
  if (!correct) return 0;
  if (!is_attempt(predicted_level)) return 0;
  return level_of_tokens(tokens_used, bands) == predicted_level ? 1 : 0;
}

int trajectory_return(const std::vector<TrajectoryStep>& steps) {
  int total = 0;
  for (const TrajectoryStep& step : steps) total += step.outcome.reward;
  return total;
}

Trajectory make_trajectory(std::string paper_id, Budget budget,
                           std::vector<TrajectoryStep> steps) {
  validate(budget);
  Trajectory trajectory;
  trajectory.paper_id = std::move(paper_id);
  trajectory.budget = budget;
  trajectory.total_tokens = 0;
  for (const TrajectoryStep& step : steps) {
    if (step.outcome.tokens_used < 0) {
      throw std::invalid_argument("make_trajectory: negative tokens_used");
    }
    if (step.outcome.reward != 0 && step.outcome.reward != 1) {
      throw std::invalid_argument("make_trajectory: reward outside {0, 1}");
    }
    if (step.outcome.reward == 1 &&
        (!step.outcome.correct || !step.action.attempt)) {
      throw std::invalid_argument("make_trajectory: reward 1 without a correct attempt");
    }
    trajectory.total_tokens += step.outcome.tokens_used;
  }
  if (trajectory.total_tokens > budget.limit) {
    throw std::invalid_argument("make_trajectory: steps overspend the budget");
  }
  trajectory.return_value = trajectory_return(steps);
  trajectory.steps = std::move(steps);
  return trajectory;
}

}  // namespace oskp
