#include "oskp/env.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oskp/rng.hpp"

namespace oskp {
namespace {

using nlohmann::json;

double signal_base(Source difficulty) {
  switch (difficulty) {
    case Source::Easy: return 0.0;
    case Source::Med: return 0.5;
    case Source::Hard: return 1.0;
  }
  throw std::invalid_argument("unknown Source");
}

std::array<double, kNumAttemptLevels> parse_prob_row(const json& row, const char* key) {
  if (!row.is_array() || row.size() != static_cast<std::size_t>(kNumAttemptLevels)) {
    throw std::invalid_argument(std::string("success_prob.") + key +
                                " needs one probability per attempt level");
  }
  std::array<double, kNumAttemptLevels> out{};
  for (int l = 0; l < kNumAttemptLevels; ++l) {
    const json& cell = row[static_cast<std::size_t>(l)];
    if (!cell.is_number()) {
      throw std::invalid_argument(std::string("success_prob.") + key + " must hold numbers");
    }
    out[static_cast<std::size_t>(l)] = cell.get<double>();
  }
  return out;
}

CostRange parse_cost_range(const json& entry, const std::string& what) {
  if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
      !entry[1].is_number_integer()) {
    throw std::invalid_argument(what + " must be a [lo, hi] integer pair");
  }
  return CostRange{entry[0].get<TokenCount>(), entry[1].get<TokenCount>()};
}

TokenCount parse_token_count(const json& value, const char* key) {
  if (!value.is_number_integer()) {
    throw std::invalid_argument(std::string(key) + " must be an integer");
  }
  return value.get<TokenCount>();
}

}  // namespace

InstanceModel InstanceModel::defaults() {
  InstanceModel model;
  model.success_prob = {{
      {0.85, 0.90, 0.92},  // easy
      {0.30, 0.65, 0.75},  // med
      {0.02, 0.10, 0.35},  // hard
  }};
  const std::array<CostRange, kNumAttemptLevels> bands_cost{
      CostRange{40, 255}, CostRange{256, 512}, CostRange{513, 900}};
  for (int d = 0; d < kNumSources; ++d) {
    for (int l = 0; l < kNumAttemptLevels; ++l) {
      model.cost_ranges[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)] =
          bands_cost[static_cast<std::size_t>(l)];
    }
  }
  return model;
}

void validate(const InstanceModel& model) {
  validate(model.bands);
  for (int d = 0; d < kNumSources; ++d) {
    for (int l = 0; l < kNumAttemptLevels; ++l) {
      double p = model.success_prob[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("InstanceModel: success probability outside [0, 1]");
      }
      if (d > 0) {
        double easier =
            model.success_prob[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(l)];
        if (p > easier) {
          throw std::invalid_argument(
              "InstanceModel: success probability must not increase with difficulty");
        }
      }
      const CostRange& range =
          model.cost_ranges[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)];
      if (range.lo < 0 || range.lo > range.hi) {
        throw std::invalid_argument("InstanceModel: cost range needs 0 <= lo <= hi");
      }
      // A level whose costs can never land in its own band would make every
      // non-overflowing attempt at it unscorable.
      const TokenCount band_lo =
          l == 0 ? 0 : (l == 1 ? model.bands.boundaries[0] : model.bands.boundaries[1] + 1);
      const bool bounded_above = l < kNumAttemptLevels - 1;
      const TokenCount band_hi =
          l == 0 ? model.bands.boundaries[0] - 1 : model.bands.boundaries[1];
      if (range.hi < band_lo || (bounded_above && range.lo > band_hi)) {
        throw std::invalid_argument("InstanceModel: cost range for level " + std::to_string(l) +
                                    " does not intersect its band");
      }
    }
  }
  if (!(model.overflow_prob >= 0.0 && model.overflow_prob <= 1.0)) {
    throw std::invalid_argument("InstanceModel: overflow_prob outside [0, 1]");
  }
  if (model.skip_cost < 0) throw std::invalid_argument("InstanceModel: negative skip_cost");
  if (model.tag_cost < 0) throw std::invalid_argument("InstanceModel: negative tag_cost");
  if (!(model.signal_noise_sigma >= 0.0)) {
    throw std::invalid_argument("InstanceModel: negative signal_noise_sigma");
  }
  if (model.obs_budget_reference < 1) {
    throw std::invalid_argument("InstanceModel: obs_budget_reference must be >= 1");
  }
}

InstanceModel model_from_json(const std::string& text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("model is not valid JSON: ") + e.what());
  }
  if (!parsed.is_object()) throw std::invalid_argument("model must be a JSON object");

  InstanceModel model = InstanceModel::defaults();
  for (const auto& [key, value] : parsed.items()) {
    if (key == "success_prob") {
      if (!value.is_object()) {
        throw std::invalid_argument("success_prob must map source names to rows");
      }
      for (const auto& [source_key, row] : value.items()) {
        Source source = source_from_string(source_key);
        model.success_prob[static_cast<std::size_t>(source)] =
            parse_prob_row(row, source_key.c_str());
      }
    } else if (key == "cost_ranges") {
      if (value.is_array()) {
        if (value.size() != static_cast<std::size_t>(kNumAttemptLevels)) {
          throw std::invalid_argument("cost_ranges needs one [lo, hi] pair per attempt level");
        }
        for (int l = 0; l < kNumAttemptLevels; ++l) {
          CostRange range = parse_cost_range(value[static_cast<std::size_t>(l)],
                                             "cost_ranges[" + std::to_string(l) + "]");
          for (int d = 0; d < kNumSources; ++d) {
            model.cost_ranges[static_cast<std::size_t>(d)][static_cast<std::size_t>(l)] = range;
          }
        }
      } else if (value.is_object()) {
        for (const auto& [source_key, rows] : value.items()) {
          Source source = source_from_string(source_key);
          if (!rows.is_array() || rows.size() != static_cast<std::size_t>(kNumAttemptLevels)) {
            throw std::invalid_argument("cost_ranges." + source_key +
                                        " needs one [lo, hi] pair per attempt level");
          }
          for (int l = 0; l < kNumAttemptLevels; ++l) {
            model.cost_ranges[static_cast<std::size_t>(source)][static_cast<std::size_t>(l)] =
                parse_cost_range(rows[static_cast<std::size_t>(l)],
                                 "cost_ranges." + source_key + "[" + std::to_string(l) + "]");
          }
        }
      } else {
        throw std::invalid_argument("cost_ranges must be an array or an object by source");
      }
    } else if (key == "overflow_prob") {
      if (!value.is_number()) throw std::invalid_argument("overflow_prob must be a number");
      model.overflow_prob = value.get<double>();
    } else if (key == "skip_cost") {
      model.skip_cost = parse_token_count(value, "skip_cost");
    } else if (key == "tag_cost") {
      model.tag_cost = parse_token_count(value, "tag_cost");
    } else if (key == "bands") {
      if (!value.is_array() || value.size() != 2 || !value[0].is_number_integer() ||
          !value[1].is_number_integer()) {
        throw std::invalid_argument("bands must be a [b0, b1] integer pair");
      }
      model.bands.boundaries = {value[0].get<TokenCount>(), value[1].get<TokenCount>()};
    } else if (key == "signal_noise_sigma") {
      if (!value.is_number()) throw std::invalid_argument("signal_noise_sigma must be a number");
      model.signal_noise_sigma = value.get<double>();
    } else if (key == "obs_budget_reference") {
      model.obs_budget_reference = parse_token_count(value, "obs_budget_reference");
    } else {
      throw std::invalid_argument("unknown model key: '" + key + "'");
    }
  }
  validate(model);
  return model;
}

InstanceModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

EpisodeState make_episode(const TestPaper& paper, Budget budget, std::uint64_t run_seed) {
  validate(budget);
  if (paper.problems.empty()) {
    throw std::invalid_argument("make_episode: paper has no problems");
  }
  EpisodeState state;
  state.paper = &paper;
  state.budget = budget;
  state.remaining = budget.limit;
  state.next_index = 0;
  state.run_seed = run_seed;
  return state;
}

StepOutcome step(EpisodeState& state, const Action& action, const InstanceModel& model) {
  if (state.paper == nullptr) throw std::invalid_argument("step: uninitialized episode");
  if (state.next_index >= state.paper->problems.size()) {
    throw EpisodeFinished("EpisodeFinished: paper '" + state.paper->paper_id +
                          "' has no problems left");
  }
  const ProblemSpec& problem = state.paper->problems[state.next_index];
  rng::Stream draw =
      rng::stream(state.run_seed, "outcome", state.paper->paper_id, problem.id);

  StepOutcome outcome;
  if (!action.attempt) {
    const TokenCount want = model.skip_cost + model.tag_cost;
    outcome.tokens_used = std::min(want, state.remaining);
    outcome.truncated = want > state.remaining;
    outcome.correct = false;
  } else {
    const auto difficulty = static_cast<std::size_t>(problem.difficulty);
    int band = static_cast<int>(action.predicted_level);
    // The overflow draw is consumed even at the top band, so the stream
    // position does not depend on which level was declared.
    const bool overflow = draw.bernoulli(model.overflow_prob);
    if (overflow) band = std::min(band + 1, kNumAttemptLevels - 1);
    const CostRange& range = model.cost_ranges[difficulty][static_cast<std::size_t>(band)];
    const TokenCount cost = draw.uniform_int(range.lo, range.hi);
    const TokenCount total = cost + model.tag_cost;
    if (total > state.remaining) {
      outcome.tokens_used = state.remaining;
      outcome.truncated = true;
      outcome.correct = false;
    } else {
      outcome.tokens_used = total;
      outcome.truncated = false;
      // Success depends on the band the reasoning itself reached, tag excluded.
      const auto reached = static_cast<std::size_t>(level_of_tokens(cost, model.bands));
      outcome.correct = draw.bernoulli(model.success_prob[difficulty][reached]);
    }
  }
  outcome.realized_level = level_of_tokens(outcome.tokens_used, model.bands);
  outcome.reward =
      step_reward(outcome.correct, action.predicted_level, outcome.tokens_used, model.bands);
  state.remaining -= outcome.tokens_used;
  ++state.next_index;
  return outcome;
}

std::vector<double> problem_signals(const TestPaper& paper, const InstanceModel& model,
                                    std::uint64_t run_seed) {
  std::vector<double> signals;
  signals.reserve(paper.problems.size());
  for (const ProblemSpec& problem : paper.problems) {
    rng::Stream stream = rng::stream(run_seed, "signal", paper.paper_id, problem.id);
    signals.push_back(stream.truncated_normal(signal_base(problem.difficulty),
                                              model.signal_noise_sigma, 0.0, 1.0));
  }
  return signals;
}

Observation make_observation(const EpisodeState& state, const std::vector<double>& signals,
                             std::size_t index, const InstanceModel& model) {
  if (state.paper == nullptr) throw std::invalid_argument("make_observation: uninitialized episode");
  const std::size_t n = state.paper->problems.size();
  if (signals.size() != n) {
    throw std::invalid_argument("make_observation: signals size disagrees with the paper");
  }
  if (index >= n) throw std::invalid_argument("make_observation: index past the paper");
  Observation obs;
  obs.difficulty_signal = signals[index];
  const double fraction = static_cast<double>(state.remaining) /
                          static_cast<double>(model.obs_budget_reference);
  obs.remaining_budget_fraction = std::clamp(fraction, 0.0, 1.0);
  obs.problems_remaining = static_cast<int>(n - index);
  obs.signals_ahead.assign(signals.begin() + static_cast<std::ptrdiff_t>(index) + 1,
                           signals.end());
  return obs;
}

EpisodeRecord run_episode_recorded(const Policy& policy, const TestPaper& paper, Budget budget,
                                   const InstanceModel& model, std::uint64_t run_seed) {
  validate(model);
  const std::vector<double> signals = problem_signals(paper, model, run_seed);
  rng::Stream policy_stream = rng::stream(run_seed, "policy", paper.paper_id);
  EpisodeState state = make_episode(paper, budget, run_seed);

  EpisodeRecord record;
  std::vector<TrajectoryStep> steps;
  const std::size_t n = paper.problems.size();
  steps.reserve(n);
  record.observations.reserve(n);
  record.logprobs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Observation obs = make_observation(state, signals, i, model);
    auto [action, logprob] = policy.act(obs, policy_stream);
    StepOutcome outcome = step(state, action, model);
    steps.push_back(TrajectoryStep{action, outcome});
    record.observations.push_back(std::move(obs));
    record.logprobs.push_back(logprob);
  }
  record.trajectory = make_trajectory(paper.paper_id, budget, std::move(steps));
  return record;
}

Trajectory run_episode(const Policy& policy, const TestPaper& paper, Budget budget,
                       const InstanceModel& model, std::uint64_t run_seed) {
  return run_episode_recorded(policy, paper, budget, model, run_seed).trajectory;
}

}  // namespace oskp
