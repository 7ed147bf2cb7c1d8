#include "oskp/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace oskp {
namespace {

using nlohmann::json;

void validate_observation(const Observation& obs) {
  if (obs.problems_remaining < 1) {
    throw std::invalid_argument("Observation: problems_remaining must be >= 1 when acting");
  }
  if (obs.signals_ahead.size() != static_cast<std::size_t>(obs.problems_remaining - 1)) {
    throw std::invalid_argument("Observation: signals_ahead size disagrees with problems_remaining");
  }
}

}  // namespace

FeatureVector features(const Observation& obs) {
  validate_observation(obs);
  double ahead_mean = 0.0;
  if (!obs.signals_ahead.empty()) {
    double sum = 0.0;
    for (double s : obs.signals_ahead) sum += s;
    ahead_mean = sum / static_cast<double>(obs.signals_ahead.size());
  }
  FeatureVector f;
  f << 1.0, obs.difficulty_signal, obs.remaining_budget_fraction,
      static_cast<double>(obs.problems_remaining), ahead_mean;
  return f;
}

LogitVector policy_logits(const PolicyParams& params, const Observation& obs) {
  LogitVector logits = params.weights * features(obs);
  if (!logits.allFinite()) {
    throw NonFiniteLogit("NonFiniteLogit: policy logits are not finite");
  }
  return logits;
}

LogitVector log_softmax(const LogitVector& logits) {
  const double shift = logits.maxCoeff();
  LogitVector shifted = logits.array() - shift;
  const double log_norm = std::log(shifted.array().exp().sum());
  return shifted.array() - log_norm;
}

std::pair<Action, double> sample_action(const PolicyParams& params, const Observation& obs,
                                        rng::Stream& stream) {
  const LogitVector logprobs = log_softmax(policy_logits(params, obs));
  const double u = stream.next_double();
  double cumulative = 0.0;
  int picked = kNumLevels - 1;  // skip owns the final segment of the cumulative
  for (int k = 0; k + 1 < kNumLevels; ++k) {
    cumulative += std::exp(logprobs[k]);
    if (u < cumulative) {
      picked = k;
      break;
    }
  }
  return {make_action(static_cast<EffortLevel>(picked)), logprobs[picked]};
}

double action_logprob(const PolicyParams& params, const Observation& obs,
                      const Action& action) {
  const LogitVector logprobs = log_softmax(policy_logits(params, obs));
  return logprobs[static_cast<int>(action.predicted_level)];
}

std::pair<Action, double> SoftmaxPolicy::act(const Observation& obs,
                                             rng::Stream& stream) const {
  return sample_action(params_, obs, stream);
}

FixedLevelPolicy::FixedLevelPolicy(EffortLevel level) : level_(level) {
  if (!is_attempt(level)) {
    throw std::invalid_argument("FixedLevelPolicy: level must be an attempt level");
  }
}

std::pair<Action, double> FixedLevelPolicy::act(const Observation& obs,
                                                rng::Stream& stream) const {
  validate_observation(obs);
  (void)stream;
  return {make_action(level_), 0.0};
}

ThresholdSkipPolicy::ThresholdSkipPolicy(double tau) : tau_(tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("ThresholdSkipPolicy: tau must lie in [0, 1]");
  }
}

std::pair<Action, double> ThresholdSkipPolicy::act(const Observation& obs,
                                                   rng::Stream& stream) const {
  validate_observation(obs);
  (void)stream;
  EffortLevel level =
      obs.difficulty_signal > tau_ ? EffortLevel::Level3Skip : EffortLevel::Level1;
  return {make_action(level), 0.0};
}

std::pair<Action, double> PlannedPolicy::act(const Observation& obs,
                                             rng::Stream& stream) const {
  validate_observation(obs);
  (void)stream;
  if (static_cast<std::size_t>(obs.problems_remaining) > plan_.size()) {
    throw std::invalid_argument("PlannedPolicy: plan shorter than the paper");
  }
  const std::size_t position = plan_.size() - static_cast<std::size_t>(obs.problems_remaining);
  return {plan_[position], 0.0};
}

std::string params_to_json(const PolicyParams& params) {
  json rows = json::array();
  for (int k = 0; k < kNumLevels; ++k) {
    json row = json::array();
    for (int j = 0; j < kNumFeatures; ++j) row.push_back(params.weights(k, j));
    rows.push_back(std::move(row));
  }
  return json{{"weights", std::move(rows)}}.dump();
}

PolicyParams params_from_json(const std::string& text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("params are not valid JSON: ") + e.what());
  }
  if (!parsed.is_object() || !parsed.contains("weights") || !parsed["weights"].is_array() ||
      parsed["weights"].size() != static_cast<std::size_t>(kNumLevels)) {
    throw std::invalid_argument("params need a 'weights' array with one row per level");
  }
  PolicyParams params;
  for (int k = 0; k < kNumLevels; ++k) {
    const json& row = parsed["weights"][static_cast<std::size_t>(k)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(kNumFeatures)) {
      throw std::invalid_argument("each weights row needs one entry per feature");
    }
    for (int j = 0; j < kNumFeatures; ++j) {
      const json& cell = row[static_cast<std::size_t>(j)];
      if (!cell.is_number()) throw std::invalid_argument("weights must be numbers");
      params.weights(k, j) = cell.get<double>();
    }
  }
  if (!params.weights.allFinite()) {
    throw std::invalid_argument("weights must be finite");
  }
  return params;
}

PolicyParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open params file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return params_from_json(buffer.str());
}

void save_params(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write params file: " + path);
  out << params_to_json(params) << '\n';
}

}  // namespace oskp
