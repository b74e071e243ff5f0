#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualplan/encoder.hpp"
#include "dualplan/errors.hpp"
#include "dualplan/policy_model.hpp"

#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace dualplan;
namespace fs = std::filesystem;

namespace {

/// Params with a dead trunk so head biases become the raw outputs.
PolicyParams bias_only_params(int actions, std::vector<double> policy_bias,
                              std::vector<double> q_bias) {
  PolicyParams p = PolicyParams::init(3, 2, actions, 0, 1);
  for (auto& w : p.trunk_w.a) w = 0.0;
  for (auto& b : p.trunk_b) b = 0.0;
  for (auto& w : p.policy_w.a) w = 0.0;
  for (auto& w : p.q_w.a) w = 0.0;
  p.policy_b = std::move(policy_bias);
  p.q_b = std::move(q_bias);
  return p;
}

const std::vector<double> kFeatures3{0.2, -0.4, 0.9};

}  // namespace

TEST_CASE("zero weights give the uniform distribution") {
  const auto p = bias_only_params(4, {0, 0, 0, 0}, {0, 0, 0, 0});
  const auto dist = policy_forward(p, kFeatures3);
  for (const double v : dist.probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("hand softmax: logits [ln 2, 0] -> [2/3, 1/3]") {
  const auto p = bias_only_params(2, {std::log(2.0), 0.0}, {0, 0});
  const auto dist = policy_forward(p, kFeatures3);
  CHECK(dist.probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(dist.probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax is invariant under a shared logit offset") {
  auto p = bias_only_params(3, {0.3, -0.7, 1.1}, {0, 0, 0});
  const auto base = policy_forward(p, kFeatures3);
  for (auto& b : p.policy_b) b += 12.34;
  const auto shifted = policy_forward(p, kFeatures3);
  for (size_t i = 0; i < base.probs.size(); ++i) {
    CHECK(shifted.probs[i] == doctest::Approx(base.probs[i]).epsilon(1e-12));
  }
}

TEST_CASE("argmax survives any positive affine transform of the logits") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> logit(-2.0, 2.0);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  std::uniform_real_distribution<double> offset(-10.0, 10.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> logits{logit(rng), logit(rng), logit(rng), logit(rng)};
    auto p = bias_only_params(4, logits, {0, 0, 0, 0});
    const auto base = policy_forward(p, kFeatures3);
    const auto argmax = [](const ActionDistribution& d) {
      int best = 0;
      for (int i = 1; i < d.size(); ++i) {
        if (d.probs[static_cast<size_t>(i)] > d.probs[static_cast<size_t>(best)]) best = i;
      }
      return best;
    };
    const double a = scale(rng);
    const double c = offset(rng);
    for (auto& b : p.policy_b) b = a * b + c;
    CHECK(argmax(policy_forward(p, kFeatures3)) == argmax(base));
  }
}

TEST_CASE("probabilities are strictly positive and normalized") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto model = testutil::random_small_model(rng, 2 + static_cast<int>(rng() % 4));
    const auto state = testutil::tiny_state("state " + std::to_string(rep));
    StrategyCatalog dummy;
    const auto dist = model.distribution(state, dummy);
    double sum = 0.0;
    for (const double v : dist.probs) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("q_forward: zero weights give zero values") {
  const auto p = bias_only_params(3, {0, 0, 0}, {0, 0, 0});
  for (const double v : q_forward(p, kFeatures3).values) CHECK(v == 0.0);
}

TEST_CASE("q_forward: one-hidden-unit net matches hand arithmetic") {
  // h = tanh(0.5 * 0.8 + 0.1), q = 2.0 * h - 0.25
  PolicyParams p = PolicyParams::init(1, 1, 1, 0, 1);
  p.trunk_w(0, 0) = 0.5;
  p.trunk_b[0] = 0.1;
  p.policy_w(0, 0) = 0.0;
  p.q_w(0, 0) = 2.0;
  p.q_b[0] = -0.25;
  const std::vector<double> x{0.8};
  const double expected = 2.0 * std::tanh(0.5 * 0.8 + 0.1) - 0.25;
  CHECK(q_forward(p, x).values[0] == doctest::Approx(expected).epsilon(1e-12));

  // Linear head: doubling the head weights doubles the weight contribution.
  PolicyParams doubled = p;
  doubled.q_w(0, 0) *= 2.0;
  doubled.q_b[0] *= 2.0;
  CHECK(q_forward(doubled, x).values[0] ==
        doctest::Approx(2.0 * expected).epsilon(1e-12));
}

TEST_CASE("dimension mismatches throw") {
  const auto p = bias_only_params(2, {0, 0}, {0, 0});
  CHECK_THROWS_AS(policy_forward(p, std::vector<double>{1.0}), DimensionMismatch);
  CHECK_THROWS_AS(q_forward(p, std::vector<double>(7, 0.0)), DimensionMismatch);
}

TEST_CASE("top2_gap") {
  CHECK(top2_gap({{0.6, 0.3, 0.1}}) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(top2_gap({{0.25, 0.25, 0.25, 0.25}}) == doctest::Approx(0.0));
  CHECK(top2_gap({{0.98, 0.01, 0.01}}) == doctest::Approx(0.97).epsilon(1e-12));
  CHECK_THROWS_AS(top2_gap({{1.0}}), TooFewActions);
}

TEST_CASE("forward passes are pure") {
  std::mt19937_64 rng(5);
  auto model = testutil::random_small_model(rng, 3);
  const auto state = testutil::tiny_state("purity");
  StrategyCatalog dummy;
  const auto d1 = model.distribution(state, dummy);
  const auto q1 = model.q_values(state, dummy);
  for (int i = 0; i < 5; ++i) {
    CHECK(model.distribution(state, dummy).probs == d1.probs);
    CHECK(model.q_values(state, dummy).values == q1.values);
  }
}

TEST_CASE("zero upstream gradient gives a zero parameter gradient") {
  std::mt19937_64 rng(9);
  auto model = testutil::random_small_model(rng, 3);
  StrategyCatalog dummy;
  const auto features = model.encoder->encode(testutil::tiny_state(), dummy);
  const auto acts = forward_pass(model.params, features);
  auto grad = ParamGrad::zeros_like(model.params);
  backward(model.params, acts, std::vector<double>(3, 0.0), std::vector<double>(3, 0.0),
           grad);
  CHECK(grad.max_abs() == 0.0);
}

TEST_CASE("log-softmax gradient identity: onehot - probs") {
  std::mt19937_64 rng(13);
  auto model = testutil::random_small_model(rng, 4);
  StrategyCatalog dummy;
  const auto features = model.encoder->encode(testutil::tiny_state(), dummy);
  const auto acts = forward_pass(model.params, features);
  // The policy-head bias gradient equals the upstream logit gradient; feed
  // d(log pi(a))/dlogits and read it back.
  const int a = 2;
  std::vector<double> up(4, 0.0);
  for (int i = 0; i < 4; ++i) {
    up[static_cast<size_t>(i)] = (i == a ? 1.0 : 0.0) - acts.probs[static_cast<size_t>(i)];
  }
  auto grad = ParamGrad::zeros_like(model.params);
  backward(model.params, acts, up, std::vector<double>(4, 0.0), grad);
  for (int i = 0; i < 4; ++i) {
    CHECK(grad.policy_b[static_cast<size_t>(i)] ==
          doctest::Approx(up[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("backward matches central finite differences on 100 random instances") {
  std::mt19937_64 rng(17);
  StrategyCatalog dummy;
  for (int rep = 0; rep < 100; ++rep) {
    const int actions = 2 + static_cast<int>(rng() % 4);  // A <= 5
    auto model = testutil::random_small_model(rng, actions);
    const auto state = testutil::tiny_state("fd " + std::to_string(rep));
    const auto features = model.encoder->encode(state, dummy);

    // Random linear functional of both heads: L = <u, logits> + <w, q>.
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::vector<double> u(static_cast<size_t>(actions));
    std::vector<double> w(static_cast<size_t>(actions));
    for (auto& v : u) v = coeff(rng);
    for (auto& v : w) v = coeff(rng);

    const auto acts = forward_pass(model.params, features);
    auto grad = ParamGrad::zeros_like(model.params);
    backward(model.params, acts, u, w, grad);

    const auto numeric = testutil::finite_difference_gradient(
        model.params,
        [&](const PolicyParams& p) {
          const auto a = forward_pass(p, features);
          double loss = 0.0;
          for (size_t i = 0; i < u.size(); ++i) {
            loss += u[i] * a.policy_logits[i] + w[i] * a.q_values[i];
          }
          return loss;
        },
        1e-5);
    CHECK(testutil::max_relative_error(grad.flatten(), numeric) < 1e-4);
  }
}

TEST_CASE("default featurizer: deterministic, turn-sensitive") {
  const auto task = testutil::two_phase_task();
  TurnFeaturizer featurizer(task.catalog.size(), task.max_turns);
  const auto state = testutil::tiny_state("we are in phase0 now");
  CHECK(featurizer.encode(state, task.catalog) == featurizer.encode(state, task.catalog));

  Utterance sys;
  sys.text = "right";
  sys.strategy = 1;
  Utterance usr;
  usr.text = "we are in phase1 now";
  const auto next = state.advanced(sys, usr);
  CHECK(featurizer.encode(next, task.catalog) != featurizer.encode(state, task.catalog));
  CHECK(static_cast<int>(featurizer.encode(state, task.catalog).size()) == featurizer.dim());
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  std::mt19937_64 rng(21);
  auto model = testutil::random_small_model(rng, 3);
  const fs::path path = fs::temp_directory_path() / "dualplan_ckpt_test.json";
  save_checkpoint(model.params, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded == model.params);
  fs::remove(path);
}

TEST_CASE("corrupt checkpoints fail loudly") {
  const fs::path path = fs::temp_directory_path() / "dualplan_ckpt_bad.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseFailure);
  {
    std::ofstream out(path);
    out << R"({"format":"dualplan-checkpoint","version":99})";
  }
  CHECK_THROWS_AS(load_checkpoint(path), VersionMismatch);
  fs::remove(path);
}

TEST_CASE("checkpoints from a different layout are rejected for the task") {
  const auto task = testutil::two_phase_task();
  auto model = make_policy_model(task, 8, 1);

  PolicyModel wrong_actions = model;
  wrong_actions.params = PolicyParams::init(model.encoder->dim(), 8, 5,
                                            model.encoder->config_hash(), 1);
  CHECK_THROWS_AS(wrong_actions.check_compatible(task.catalog), DimensionMismatch);

  PolicyModel wrong_hash = model;
  wrong_hash.params.featurizer_hash ^= 0xdead;
  CHECK_THROWS_AS(wrong_hash.check_compatible(task.catalog), VersionMismatch);

  model.check_compatible(task.catalog);  // the matching layout passes
}

TEST_CASE("sgd_step with zero learning rate leaves params bit-identical") {
  std::mt19937_64 rng(31);
  auto model = testutil::random_small_model(rng, 3);
  const auto before = model.params;
  auto grad = ParamGrad::zeros_like(model.params);
  StrategyCatalog dummy;
  const auto features = model.encoder->encode(testutil::tiny_state(), dummy);
  const auto acts = forward_pass(model.params, features);
  backward(model.params, acts, std::vector<double>{1.0, -2.0, 0.5},
           std::vector<double>{0.1, 0.2, 0.3}, grad);
  sgd_step(model.params, grad, 0.0);
  CHECK(model.params == before);
}
