#include "dualplan/episode.hpp"
#include "dualplan/eval.hpp"
#include "dualplan/gate.hpp"
#include "dualplan/mcts.hpp"
#include "dualplan/policy_model.hpp"
#include "dualplan/reward.hpp"
#include "dualplan/scripted_env.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

using namespace dualplan;

namespace {

TaskSpec bench_task() { return TaskSpec::builtin(TaskId::ESConv); }

DialogueState bench_state(const TaskSpec& task, int turns) {
  const auto spec = ScriptedSimSpec::builtin(task.id);
  ScriptedBackend backend(spec, task.catalog);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  DialogueState state = scripted_initial_state(spec);
  for (int i = 0; i < turns; ++i) {
    state = session.step(state, task.catalog.at(i % task.catalog.size())).next_state;
  }
  return state;
}

void BM_Featurize(benchmark::State& bench) {
  const auto task = bench_task();
  TurnFeaturizer featurizer(task.catalog.size(), task.max_turns);
  const auto state = bench_state(task, 4);
  for (auto _ : bench) {
    benchmark::DoNotOptimize(featurizer.encode(state, task.catalog));
  }
}
BENCHMARK(BM_Featurize);

void BM_PolicyForward(benchmark::State& bench) {
  const auto task = bench_task();
  const auto model = make_policy_model(task, 64, 1);
  const auto features = model.encoder->encode(bench_state(task, 4), task.catalog);
  for (auto _ : bench) {
    benchmark::DoNotOptimize(policy_forward(model.params, features));
  }
}
BENCHMARK(BM_PolicyForward);

void BM_PolicyBackward(benchmark::State& bench) {
  const auto task = bench_task();
  const auto model = make_policy_model(task, 64, 1);
  const auto features = model.encoder->encode(bench_state(task, 4), task.catalog);
  const auto acts = forward_pass(model.params, features);
  std::vector<double> d_logits(acts.probs.size(), 0.1);
  std::vector<double> d_q(acts.q_values.size(), -0.2);
  for (auto _ : bench) {
    auto grad = ParamGrad::zeros_like(model.params);
    backward(model.params, acts, d_logits, d_q, grad);
    benchmark::DoNotOptimize(grad);
  }
}
BENCHMARK(BM_PolicyBackward);

void BM_RewardMapping(benchmark::State& bench) {
  const auto map = RewardMap::builtin(TaskId::ESConv);
  const std::vector<std::string> verdicts = {
      "Yes, the Patient's issue has been solved.", "No, but the Patient feels better.",
      "No, the Patient feels the same.",           "No, but the Patient feels better.",
      "Yes, the Patient's issue has been solved.", "No, the Patient feels worse.",
      "No, but the Patient feels better.",         "No, the Patient feels the same.",
      "Yes, the Patient's issue has been solved.", "No, but the Patient feels better."};
  for (auto _ : bench) {
    benchmark::DoNotOptimize(map_verdicts_to_reward(verdicts, map));
  }
}
BENCHMARK(BM_RewardMapping);

void BM_GateDecide(benchmark::State& bench) {
  GateState gate(0.5, 7, 10);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto _ : bench) {
    const double delta = u(rng);
    ActionDistribution dist{{(1.0 + delta) / 2.0, (1.0 - delta) / 2.0}};
    benchmark::DoNotOptimize(gate_decide(gate, dist));
  }
}
BENCHMARK(BM_GateDecide);

void BM_MctsPlan(benchmark::State& bench) {
  const auto task = bench_task();
  const auto spec = ScriptedSimSpec::builtin(task.id);
  const auto model = make_policy_model(task, 64, 1);
  const auto root = scripted_initial_state(spec);
  MctsConfig cfg;
  cfg.n_simulations = static_cast<int>(bench.range(0));
  for (auto _ : bench) {
    EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
    benchmark::DoNotOptimize(mcts_plan(root, model, session, cfg));
  }
}
BENCHMARK(BM_MctsPlan)->Arg(10)->Arg(50);

void BM_EpisodeJsonRoundTrip(benchmark::State& bench) {
  const auto task = bench_task();
  const auto spec = ScriptedSimSpec::builtin(task.id);
  EnvSession session(std::make_shared<ScriptedBackend>(spec, task.catalog), task, nullptr);
  Episode episode;
  episode.task = task.id;
  DialogueState state = scripted_initial_state(spec);
  for (int i = 0; i < 4; ++i) {
    auto t = session.step(state, task.catalog.at(i % task.catalog.size()));
    state = t.next_state;
    episode.transitions.push_back(std::move(t));
  }
  episode.turns = 4;
  for (auto _ : bench) {
    std::stringstream buffer;
    append_episode_jsonl(buffer, episode);
    benchmark::DoNotOptimize(read_episodes_jsonl(buffer));
  }
}
BENCHMARK(BM_EpisodeJsonRoundTrip);

}  // namespace

BENCHMARK_MAIN();
