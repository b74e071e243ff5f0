#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualplan/errors.hpp"
#include "dualplan/mcts.hpp"
#include "dualplan/scripted_env.hpp"

#include "test_util.hpp"

#include <random>

using namespace dualplan;
using testutil::StubBackend;

namespace {

/// One-turn world: each action lands in a fixed verdict band.
ScriptedSimSpec one_step_spec(std::vector<double> effects) {
  ScriptedSimSpec spec;
  spec.num_actions = static_cast<int>(effects.size());
  spec.max_turns = 1;
  spec.initial_score = 0.0;
  spec.effects = {std::move(effects)};
  spec.band_edges = {0.0, 1.0};
  spec.band_verdicts = {"feel worse", "feel better", "solved"};
  return spec;
}

TaskSpec task_with_actions(int n, int max_turns) {
  TaskSpec task;
  task.id = TaskId::Custom;
  task.catalog.task = TaskId::Custom;
  for (int i = 0; i < n; ++i) {
    task.catalog.strategies.push_back(
        {i, "Act" + std::to_string(i), "Please act " + std::to_string(i) + "."});
  }
  task.reward_map = RewardMap::builtin(TaskId::ESConv);
  task.max_turns = max_turns;
  task.gamma = 0.999;
  task.critic_samples = 10;
  return task;
}

PolicyModel zero_policy(const TaskSpec& task, int hidden = 4) {
  PolicyModel model = make_policy_model(task, hidden, 1);
  model.params.for_each_param([](double& v) { v = 0.0; });
  return model;
}

}  // namespace

TEST_CASE("puct_score: worked example and degenerate cases") {
  CHECK(puct_score(0.5, 0.25, 3, 9, 1.0) == doctest::Approx(0.6875).epsilon(1e-12));
  CHECK(puct_score(0.37, 0.9, 5, 100, 0.0) == doctest::Approx(0.37));
  CHECK(puct_score(0.42, 0.5, 0, 0, 2.5) == doctest::Approx(0.42));  // sqrt(0) = 0
}

TEST_CASE("puct_score matches an independent evaluation on random tuples") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double q = 2.0 * u(rng) - 1.0;
    const double p = u(rng);
    const int n_sa = static_cast<int>(rng() % 50);
    const int n_total = n_sa + static_cast<int>(rng() % 200);
    const double c = 3.0 * u(rng);
    const double expected = q + c * p * std::sqrt(static_cast<double>(n_total)) / (1 + n_sa);
    CHECK(puct_score(q, p, n_sa, n_total, c) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("select_action: priors, counts, and ties") {
  SearchNode node;
  node.realized = true;
  node.expanded = true;

  node.prior = {0.9, 0.1};
  node.q = {0.5, 0.5};
  node.visits = {1, 1};
  CHECK(select_action(node, 1.0) == 0);  // prior dominates at equal Q

  node.prior = {0.5, 0.5};
  node.visits = {5, 1};
  CHECK(select_action(node, 1.0) == 1);  // smaller denominator wins

  node.visits = {3, 3};
  CHECK(select_action(node, 1.0) == 0);  // exact tie -> lowest id
}

TEST_CASE("expand_node: uniform prior from a zero policy, q0 fill, no env calls") {
  const auto task = task_with_actions(3, 2);
  const auto model = zero_policy(task);
  CallCounter counter;

  SearchNode node;
  node.history = testutil::tiny_state();
  node.realized = true;
  expand_node(node, model, task.catalog, 0.25);

  CHECK(node.expanded);
  for (const double p : node.prior) CHECK(p == doctest::Approx(1.0 / 3.0));
  for (const double q : node.q) CHECK(q == 0.25);
  for (const int n : node.visits) CHECK(n == 0);
  CHECK(counter.snapshot().total_units() == 0);

  SearchNode bare;
  CHECK_THROWS_AS(expand_node(bare, model, task.catalog, 0.0), SimulationAborted);
}

TEST_CASE("evaluate_leaf: critic mean, cached after the first call") {
  auto task = testutil::two_phase_task();
  CallCounter counter;
  auto backend = std::make_shared<StubBackend>();
  int calls = 0;
  backend->on_critic = [&calls](const DialogueState&, int k) {
    ++calls;
    return k % 2 == 0 ? "feel better" : "solved";
  };
  EnvSession session(backend, task, &counter);

  SearchNode node;
  node.history = testutil::tiny_state();
  node.realized = true;
  CHECK(evaluate_leaf(node, session) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(calls == task.critic_samples);
  CHECK(counter.snapshot().acting.critic_units == 1);
  CHECK(evaluate_leaf(node, session) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(calls == task.critic_samples);  // cached, no extra samples

  // l = 1: the value is the single mapped score.
  auto task1 = task;
  task1.critic_samples = 1;
  EnvSession single(backend, task1, &counter);
  SearchNode other;
  other.history = testutil::tiny_state("another");
  other.realized = true;
  CHECK(evaluate_leaf(other, single) == doctest::Approx(0.1));
}

TEST_CASE("backpropagate: incremental mean") {
  SearchNode node;
  node.realized = true;
  node.expanded = true;
  node.prior = {0.5, 0.5};
  node.visits = {0, 0};
  node.q = {0.33, 0.33};  // q0 must not leak into the mean

  std::pair<SearchNode*, int> edge{&node, 0};
  backpropagate(std::vector{edge}, 0.8);
  CHECK(node.visits[0] == 1);
  CHECK(node.q[0] == doctest::Approx(0.8).epsilon(1e-12));

  backpropagate(std::vector{edge}, 0.4);
  CHECK(node.visits[0] == 2);
  CHECK(node.q[0] == doctest::Approx(0.6).epsilon(1e-12));

  backpropagate(std::vector{edge}, 0.6);
  CHECK(node.q[0] == doctest::Approx(0.6).epsilon(1e-12));  // v == Q leaves Q put
  CHECK(node.visits[0] == 3);
}

TEST_CASE("running-mean property over random backups, any q0") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    SearchNode node;
    node.realized = true;
    node.expanded = true;
    node.prior = {1.0};
    node.visits = {0};
    node.q = {u(rng) * 10.0};
    const int k = 1 + static_cast<int>(rng() % 100);
    double sum = 0.0;
    const std::pair<SearchNode*, int> edge{&node, 0};
    for (int i = 0; i < k; ++i) {
      const double v = u(rng);
      sum += v;
      backpropagate(std::vector{edge}, v);
    }
    CHECK(node.visits[0] == k);
    CHECK(node.q[0] == doctest::Approx(sum / k).epsilon(1e-9));
  }
}

TEST_CASE("plan: dominant action wins over 100 noisy worlds") {
  auto spec = one_step_spec({2.0, 0.5, -1.0});
  spec.noise = 0.3;
  const auto task = task_with_actions(3, 1);
  const auto model = zero_policy(task);

  const auto oracle =
      testutil::enumerate_sequences(spec, task.reward_map, task.gamma);
  REQUIRE(oracle.optimal_by_leaf == 0);

  int matches = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto world = spec;
    world.seed = seed;
    CallCounter counter;
    EnvSession session(std::make_shared<ScriptedBackend>(world, task.catalog), task,
                       &counter);
    MctsConfig cfg;
    cfg.n_simulations = 50;
    cfg.c_p = 1.0;
    const auto out = mcts_plan(scripted_initial_state(world), model, session, cfg);
    if (out.action == oracle.optimal_by_leaf) ++matches;
  }
  CHECK(matches >= 95);
}

TEST_CASE("plan with a single simulation returns the one visited root action") {
  const auto spec = one_step_spec({1.0, 2.0});
  const auto task = task_with_actions(2, 1);
  const auto model = zero_policy(task);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  MctsConfig cfg;
  cfg.n_simulations = 1;
  const auto out = mcts_plan(scripted_initial_state(spec), model, session, cfg);
  CHECK(out.completed_simulations == 1);
  int visited = 0;
  for (const int n : out.root_visits) visited += n;
  CHECK(visited == 1);
  CHECK(out.root_visits[static_cast<size_t>(out.action)] == 1);
}

TEST_CASE("plan under exact symmetry: near-even visits, tie returns action 0") {
  const auto spec = one_step_spec({0.5, 0.5});  // identical values and priors
  const auto task = task_with_actions(2, 1);
  const auto model = zero_policy(task);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  MctsConfig cfg;
  cfg.n_simulations = 20;
  const auto out = mcts_plan(scripted_initial_state(spec), model, session, cfg);
  CHECK(out.action == 0);
  CHECK(std::abs(out.root_visits[0] - out.root_visits[1]) <= cfg.n_simulations / 2 + 1);
}

TEST_CASE("root visit counts sum to the number of completed simulations") {
  const auto spec = testutil::two_phase_spec();
  const auto task = testutil::two_phase_task();
  const auto model = zero_policy(task);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  MctsConfig cfg;
  cfg.n_simulations = 37;
  const auto out = mcts_plan(scripted_initial_state(spec), model, session, cfg);
  int total = 0;
  for (const int n : out.root_visits) total += n;
  CHECK(total == 37);
  CHECK(out.completed_simulations == 37);
}

TEST_CASE("env call caps and prefix caching") {
  const auto spec = testutil::two_phase_spec();  // A=2, T=4
  const auto task = testutil::two_phase_task();
  const auto model = zero_policy(task);
  CallCounter counter;
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, &counter);

  MctsConfig cfg;
  cfg.n_simulations = 40;
  cfg.max_depth = 2;  // at most 6 distinct prefixes
  mcts_plan(scripted_initial_state(spec), model, session, cfg);

  const auto snap = counter.snapshot();
  CHECK(snap.acting.units() == 0);  // everything in the simulation phase
  CHECK(snap.mcts.units() <= 3 * cfg.n_simulations);
  CHECK(snap.mcts.system == snap.mcts.user);
  CHECK(snap.mcts.system <= 6);  // one realization per distinct prefix
  CHECK(snap.mcts.system < cfg.n_simulations);  // caching strictly saves calls
}

TEST_CASE("c_p = 0 greedily exploits the first-discovered positive edge") {
  const auto spec = one_step_spec({0.5, 2.0});  // action 1 is better but undiscovered
  const auto task = task_with_actions(2, 1);
  const auto model = zero_policy(task);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  MctsConfig cfg;
  cfg.n_simulations = 10;
  cfg.c_p = 0.0;
  cfg.q0 = 0.0;
  const auto out = mcts_plan(scripted_initial_state(spec), model, session, cfg);
  // Ties at q0 resolve to action 0; its value 0.1 beats q0, so with no
  // exploration term every later simulation repeats it.
  CHECK(out.action == 0);
  CHECK(out.root_visits[0] == 10);
  CHECK(out.root_visits[1] == 0);
}

TEST_CASE("plan is deterministic for a deterministic environment") {
  auto spec = testutil::two_phase_spec();
  spec.noise = 0.2;
  spec.seed = 1234;
  const auto task = testutil::two_phase_task();
  const auto model = zero_policy(task);
  auto run = [&] {
    EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
    MctsConfig cfg;
    cfg.n_simulations = 25;
    return mcts_plan(scripted_initial_state(spec), model, session, cfg);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.action == b.action);
  CHECK(a.root_visits == b.root_visits);
  CHECK(a.root_q == b.root_q);
  CHECK(a.next_state == b.next_state);
}

TEST_CASE("aborted simulations are discarded; statistics stay consistent") {
  const auto task = testutil::two_phase_task();
  const auto model = zero_policy(task);
  auto backend = std::make_shared<StubBackend>();
  int critic_calls = 0;
  backend->on_critic = [&critic_calls](const DialogueState&, int) -> std::string {
    ++critic_calls;
    if (critic_calls > 25) throw StepFailed("critic transport down");
    return "feel better";
  };
  CallCounter counter;
  EnvSession session(backend, task, &counter);
  MctsConfig cfg;
  cfg.n_simulations = 12;
  const auto out = mcts_plan(testutil::tiny_state(), model, session, cfg);
  CHECK(out.aborted_simulations > 0);
  CHECK(out.completed_simulations + out.aborted_simulations == 12);
  int total = 0;
  for (const int n : out.root_visits) total += n;
  CHECK(total == out.completed_simulations);
}

TEST_CASE("plan throws only when every simulation fails") {
  const auto task = testutil::two_phase_task();
  const auto model = zero_policy(task);
  auto backend = std::make_shared<StubBackend>();
  backend->on_critic = [](const DialogueState&, int) -> std::string {
    throw StepFailed("critic down");
  };
  EnvSession session(backend, task, nullptr);
  MctsConfig cfg;
  cfg.n_simulations = 5;
  CHECK_THROWS_AS(mcts_plan(testutil::tiny_state(), model, session, cfg),
                  SimulationAborted);
}

TEST_CASE("optional trace records one entry per completed simulation") {
  const auto spec = testutil::two_phase_spec();
  const auto task = testutil::two_phase_task();
  const auto model = zero_policy(task);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  MctsConfig cfg;
  cfg.n_simulations = 8;
  cfg.collect_trace = true;
  const auto out = mcts_plan(scripted_initial_state(spec), model, session, cfg);
  REQUIRE(out.trace.has_value());
  CHECK((*out.trace)["simulations"].size() == 8);
  CHECK((*out.trace)["root"]["visits"].size() == 2);
}
