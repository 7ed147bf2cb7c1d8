#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <limits>

#include "oskp/policy.hpp"
#include "oskp/rng.hpp"

using namespace oskp;

namespace {

Observation simple_obs() {
  Observation obs;
  obs.difficulty_signal = 0.5;
  obs.remaining_budget_fraction = 0.25;
  obs.problems_remaining = 3;
  obs.signals_ahead = {0.2, 0.8};
  return obs;
}

Observation lone_obs() {
  Observation obs;
  obs.problems_remaining = 1;
  return obs;
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("the feature basis is bias, signal, fraction, remaining, lookahead mean") {
  const FeatureVector f = features(simple_obs());
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 0.5);
  CHECK(f[2] == 0.25);
  CHECK(f[3] == 3.0);
  CHECK(f[4] == 0.5);

  const FeatureVector last = features(lone_obs());
  CHECK(last[3] == 1.0);
  CHECK(last[4] == 0.0);
}

TEST_CASE("observations with inconsistent bookkeeping are rejected") {
  Observation obs = simple_obs();
  SUBCASE("no problems left to act on") {
    obs.problems_remaining = 0;
    obs.signals_ahead.clear();
    CHECK_THROWS_AS(features(obs), std::invalid_argument);
  }
  SUBCASE("lookahead disagrees with the count") {
    obs.signals_ahead.push_back(0.1);
    CHECK_THROWS_AS(features(obs), std::invalid_argument);
  }
}

TEST_CASE("log_softmax of zero logits is uniform") {
  const LogitVector logprobs = log_softmax(LogitVector::Zero());
  for (int k = 0; k < kNumLevels; ++k) {
    CHECK(logprobs[k] == doctest::Approx(-std::log(4.0)).epsilon(1e-15));
  }
}

TEST_CASE("shifting every logit by a constant changes nothing, literally") {
  // Dyadic inputs keep the arithmetic exact, so equality is bitwise.
  LogitVector logits;
  logits << 0.5, -0.25, 1.0, 0.0;
  LogitVector shifted = logits;
  shifted.array() += 2.0;
  const LogitVector a = log_softmax(logits);
  const LogitVector b = log_softmax(shifted);
  for (int k = 0; k < kNumLevels; ++k) CHECK(a[k] == b[k]);
}

TEST_CASE("log_softmax survives extreme logits") {
  LogitVector logits;
  logits << 1000.0, 0.0, -1000.0, 500.0;
  const LogitVector logprobs = log_softmax(logits);
  for (int k = 0; k < kNumLevels; ++k) REQUIRE(std::isfinite(logprobs[k]));
  double total = 0.0;
  for (int k = 0; k < kNumLevels; ++k) total += std::exp(logprobs[k]);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("non-finite weights surface as NonFiniteLogit") {
  PolicyParams params;
  params.weights(2, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(policy_logits(params, simple_obs()), NonFiniteLogit);
}

TEST_CASE("zero weights sample all levels near-uniformly") {
  const PolicyParams params;
  rng::Stream stream(99);
  std::array<int, kNumLevels> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto [action, logprob] = sample_action(params, simple_obs(), stream);
    ++counts[static_cast<std::size_t>(action.predicted_level)];
    CHECK(logprob == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  }
  for (int count : counts) {
    CHECK(static_cast<double>(count) / n == doctest::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("sampled log-probabilities recompute bitwise under the same parameters") {
  rng::Stream param_stream(7);
  for (int round = 0; round < 100; ++round) {
    PolicyParams params;
    for (int k = 0; k < kNumLevels; ++k) {
      for (int j = 0; j < kNumFeatures; ++j) params.weights(k, j) = param_stream.normal();
    }
    rng::Stream stream(round);
    const auto [action, logprob] = sample_action(params, simple_obs(), stream);
    CHECK(action_logprob(params, simple_obs(), action) == logprob);
  }
}

TEST_CASE("strong weights steer sampling where they point") {
  PolicyParams params;
  params.weights(static_cast<int>(EffortLevel::Level2), 0) = 50.0;
  rng::Stream stream(5);
  for (int i = 0; i < 50; ++i) {
    CHECK(sample_action(params, simple_obs(), stream).first.predicted_level ==
          EffortLevel::Level2);
  }
}

TEST_CASE("fixed-level baselines never waver") {
  const FixedLevelPolicy policy(EffortLevel::Level2);
  rng::Stream stream(1);
  const auto [action, logprob] = policy.act(simple_obs(), stream);
  CHECK(action.predicted_level == EffortLevel::Level2);
  CHECK(action.attempt);
  CHECK(logprob == 0.0);
  CHECK_THROWS_AS(FixedLevelPolicy(EffortLevel::Level3Skip), std::invalid_argument);
}

TEST_CASE("threshold baselines skip past their tau") {
  const ThresholdSkipPolicy policy(0.5);
  rng::Stream stream(1);
  Observation obs = simple_obs();

  obs.difficulty_signal = 0.8;
  CHECK(policy.act(obs, stream).first.predicted_level == EffortLevel::Level3Skip);
  obs.difficulty_signal = 0.2;
  CHECK(policy.act(obs, stream).first.predicted_level == EffortLevel::Level1);
  // The boundary itself still gets attempted.
  obs.difficulty_signal = 0.5;
  CHECK(policy.act(obs, stream).first.attempt);

  CHECK_THROWS_AS(ThresholdSkipPolicy(1.5), std::invalid_argument);
  CHECK_THROWS_AS(ThresholdSkipPolicy(-0.1), std::invalid_argument);
}

TEST_CASE("planned policies play their script by position") {
  const PlannedPolicy policy({make_action(EffortLevel::Level0),
                              make_action(EffortLevel::Level3Skip),
                              make_action(EffortLevel::Level2)});
  rng::Stream stream(1);
  Observation obs;
  obs.problems_remaining = 3;
  obs.signals_ahead = {0.1, 0.2};
  CHECK(policy.act(obs, stream).first.predicted_level == EffortLevel::Level0);
  obs.problems_remaining = 2;
  obs.signals_ahead = {0.1};
  CHECK(policy.act(obs, stream).first.predicted_level == EffortLevel::Level3Skip);
  obs.problems_remaining = 1;
  obs.signals_ahead = {};
  CHECK(policy.act(obs, stream).first.predicted_level == EffortLevel::Level2);

  obs.problems_remaining = 4;
  obs.signals_ahead = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(policy.act(obs, stream), std::invalid_argument);
}

TEST_CASE("parameters round-trip through JSON exactly") {
  PolicyParams params;
  rng::Stream stream(31);
  for (int k = 0; k < kNumLevels; ++k) {
    for (int j = 0; j < kNumFeatures; ++j) params.weights(k, j) = stream.normal() * 3.7;
  }
  const PolicyParams reread = params_from_json(params_to_json(params));
  for (int k = 0; k < kNumLevels; ++k) {
    for (int j = 0; j < kNumFeatures; ++j) CHECK(reread.weights(k, j) == params.weights(k, j));
  }

  const std::string path =
      (std::filesystem::temp_directory_path() / "oskp_params_roundtrip.json").string();
  save_params(params, path);
  const PolicyParams from_file = load_params(path);
  CHECK(from_file.weights == params.weights);
  std::filesystem::remove(path);
}

TEST_CASE("malformed parameter files are refused") {
  CHECK_THROWS_AS(params_from_json("nope"), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json(R"({"weights": [[1,2,3,4,5]]})"), std::invalid_argument);
  CHECK_THROWS_AS(params_from_json(R"({"weights": "flat"})"), std::invalid_argument);
  CHECK_THROWS_AS(
      params_from_json(
          R"({"weights": [[1,2,3,4],[0,0,0,0],[0,0,0,0],[0,0,0,0]]})"),
      std::invalid_argument);
  CHECK_THROWS_AS(load_params("/nonexistent/params.json"), std::runtime_error);
}

}  // TEST_SUITE
