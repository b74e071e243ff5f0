#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualplan/episode.hpp"
#include "dualplan/errors.hpp"
#include "dualplan/reward.hpp"
#include "dualplan/strategy.hpp"
#include "dualplan/task.hpp"

#include "test_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <sstream>

using namespace dualplan;

namespace {

std::vector<std::string> repeat(const std::string& v, int n) {
  return std::vector<std::string>(static_cast<size_t>(n), v);
}

}  // namespace

TEST_CASE("builtin catalogs have the pinned action sets") {
  const auto esconv = StrategyCatalog::builtin(TaskId::ESConv);
  CHECK(esconv.size() == 8);
  CHECK(esconv.at(0).name == "Question");
  CHECK(esconv.at(0).instruction ==
        "Please ask the Patient to elaborate on the situation they just described.");
  CHECK(esconv.at(7).instruction == "Please chat with the Patient.");
  esconv.validate();

  const auto cima = StrategyCatalog::builtin(TaskId::CIMA);
  CHECK(cima.size() == 5);
  CHECK(cima.at(0).name == "Hint");
  cima.validate();

  const auto cb = StrategyCatalog::builtin(TaskId::CraigslistBargain);
  CHECK(cb.size() == 11);
  CHECK(cb.at(9).name == "Agree with the proposal");
  CHECK(cb.at(9).instruction == "Please agree with the proposed price.");
  cb.validate();

  for (const auto& catalog : {esconv, cima, cb}) {
    for (int i = 0; i < catalog.size(); ++i) {
      CHECK(catalog.at(i).id == i);
      CHECK(!catalog.at(i).instruction.empty());
    }
  }
}

TEST_CASE("catalog validation rejects broken catalogs") {
  auto catalog = StrategyCatalog::builtin(TaskId::ESConv);
  catalog.strategies.pop_back();
  CHECK_THROWS_AS(catalog.validate(), ConfigError);

  auto gap = StrategyCatalog::builtin(TaskId::CIMA);
  gap.strategies[2].id = 7;
  CHECK_THROWS_AS(gap.validate(), ConfigError);
}

TEST_CASE("reward maps carry the pinned scores") {
  const auto esconv = RewardMap::builtin(TaskId::ESConv);
  REQUIRE(esconv.verdicts.size() == 4);
  CHECK(esconv.verdicts[0].verdict == "feel worse");
  CHECK(esconv.verdicts[0].score == -1.0);
  CHECK(esconv.verdicts[1].score == -0.5);
  CHECK(esconv.verdicts[2].score == 0.1);
  CHECK(esconv.verdicts[3].score == 1.0);

  const auto cima = RewardMap::builtin(TaskId::CIMA);
  REQUIRE(cima.verdicts.size() == 4);
  CHECK(cima.verdicts[0].score == -1.0);
  CHECK(cima.verdicts[1].score == -0.5);
  CHECK(cima.verdicts[2].score == 0.5);
  CHECK(cima.verdicts[3].score == 1.0);
}

TEST_CASE("map_verdicts_to_reward: mean arithmetic") {
  const auto esconv = RewardMap::builtin(TaskId::ESConv);
  CHECK(map_verdicts_to_reward(repeat("solved", 10), esconv) == doctest::Approx(1.0));

  std::vector<std::string> mixed = repeat("feel better", 5);
  const auto solved = repeat("solved", 5);
  mixed.insert(mixed.end(), solved.begin(), solved.end());
  CHECK(map_verdicts_to_reward(mixed, esconv) == doctest::Approx(0.55).epsilon(1e-12));

  const auto cima = RewardMap::builtin(TaskId::CIMA);
  CHECK(map_verdicts_to_reward(repeat("no answer", 10), cima) == doctest::Approx(-0.5));
}

TEST_CASE("verdict matching is case-insensitive containment on the first sentence") {
  const auto esconv = RewardMap::builtin(TaskId::ESConv);
  CHECK(map_verdicts_to_reward(repeat("Yes, the Patient's issue has been SOLVED.", 1),
                               esconv) == doctest::Approx(1.0));
  CHECK(map_verdicts_to_reward(repeat("No, but the Patient feels better.", 1), esconv) ==
        doctest::Approx(0.1));
  CHECK(map_verdicts_to_reward(
            repeat("No, the Patient feels worse. Later sentences do not count: solved.", 1),
            esconv) == doctest::Approx(-1.0));

  const auto cima = RewardMap::builtin(TaskId::CIMA);
  CHECK(map_verdicts_to_reward(repeat("No, the Student made an incorrect translation.", 1),
                               cima) == doctest::Approx(-1.0));
  CHECK(map_verdicts_to_reward(repeat("No, the Student did not try to translate.", 1),
                               cima) == doctest::Approx(-0.5));
  CHECK(map_verdicts_to_reward(
            repeat("No, the Student only correctly translated a part of \"x\"", 1), cima) ==
        doctest::Approx(0.5));
  CHECK(map_verdicts_to_reward(
            repeat("Yes, the Student correctly translated the whole sentence of \"x\"", 1),
            cima) == doctest::Approx(1.0));
  // Nested keys resolve to the most specific entry.
  CHECK(map_verdicts_to_reward(repeat("partially correct", 1), cima) == doctest::Approx(0.5));
  CHECK(map_verdicts_to_reward(repeat("correct", 1), cima) == doctest::Approx(1.0));
  CHECK(map_verdicts_to_reward(repeat("incorrect answer", 1), cima) == doctest::Approx(-1.0));
}

TEST_CASE("unrecognized or ambiguous verdicts throw") {
  const auto esconv = RewardMap::builtin(TaskId::ESConv);
  CHECK_THROWS_AS(map_verdicts_to_reward(repeat("the patient seems unsure", 1), esconv),
                  UnrecognizedVerdict);

  RewardMap ambiguous;
  ambiguous.verdicts = {{"good result", 1.0, {}}, {"bad result", -1.0, {}}};
  CHECK_THROWS_AS(
      map_verdicts_to_reward(repeat("good result and bad result", 1), ambiguous),
      UnrecognizedVerdict);
}

TEST_CASE("reward is invariant under verdict permutation") {
  const auto esconv = RewardMap::builtin(TaskId::ESConv);
  std::vector<std::string> verdicts = {"solved",        "feel worse", "feel better",
                                       "feel the same", "solved",     "feel better",
                                       "feel the same", "feel worse", "solved",
                                       "feel better"};
  const double reference = map_verdicts_to_reward(verdicts, esconv);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(verdicts.begin(), verdicts.end(), rng);
    CHECK(map_verdicts_to_reward(verdicts, esconv) ==
          doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("cumulative_return: hand-evaluated discounted sums") {
  using testutil::make_episode;
  CHECK(cumulative_return(make_episode({1.0}), 1, 0.42) == doctest::Approx(1.0));

  const auto episode = make_episode({0.5, 1.0});
  CHECK(cumulative_return(episode, 1, 0.999) == doctest::Approx(1.499).epsilon(1e-12));
  CHECK(cumulative_return(episode, 2, 0.999) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cumulative_return(episode, 3, 0.999), IndexOutOfRange);
  CHECK_THROWS_AS(cumulative_return(episode, 0, 0.999), IndexOutOfRange);
}

TEST_CASE("cumulative_return satisfies the Bellman recursion") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> reward(-1.0, 1.0);
  std::uniform_real_distribution<double> gammas(0.5, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int len = 1 + static_cast<int>(rng() % 8);
    std::vector<double> rewards;
    for (int i = 0; i < len; ++i) rewards.push_back(reward(rng));
    const auto episode = testutil::make_episode(rewards);
    const double gamma = gammas(rng);
    for (int t = 1; t < len; ++t) {
      const double lhs = cumulative_return(episode, t, gamma);
      const double rhs = rewards[static_cast<size_t>(t - 1)] +
                         gamma * cumulative_return(episode, t + 1, gamma);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
    CHECK(cumulative_return(episode, len, gamma) ==
          doctest::Approx(rewards.back()).epsilon(1e-12));
  }
}

TEST_CASE("is_success threshold is inclusive") {
  RewardMap map;
  map.verdicts = {{"solved", 1.0, {}}};
  map.success_score = 1.0;
  CHECK(is_success(1.0, map));
  CHECK(!is_success(0.55, map));
  map.success_score = 0.9;
  CHECK(is_success(0.95, map));
}

TEST_CASE("episode jsonl round-trips bit-identically") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> reward(-1.0, 1.0);
  std::vector<Episode> episodes;
  for (int i = 0; i < 10; ++i) {
    const int len = 1 + static_cast<int>(rng() % 5);
    std::vector<double> rewards;
    for (int k = 0; k < len; ++k) rewards.push_back(reward(rng));
    Episode e = testutil::make_episode(rewards, TaskId::ESConv);
    e.stage = "eval";
    e.success = (i % 2) == 0;
    if (i % 3 == 0) e.deal_price = reward(rng) * 100.0;
    episodes.push_back(std::move(e));
  }

  std::stringstream stream;
  for (const auto& e : episodes) append_episode_jsonl(stream, e);
  const auto loaded = read_episodes_jsonl(stream);
  REQUIRE(loaded.size() == episodes.size());
  for (size_t i = 0; i < episodes.size(); ++i) {
    CHECK(loaded[i] == episodes[i]);  // exact equality, including reward bits
  }
}

TEST_CASE("dialogue state bookkeeping") {
  auto state = testutil::tiny_state("I need help");
  state.validate();
  Utterance sys;
  sys.text = "tell me more";
  sys.strategy = 3;
  Utterance usr;
  usr.text = "well...";
  const auto next = state.advanced(sys, usr);
  next.validate();
  CHECK(next.turn == state.turn + 1);
  CHECK(next.history.size() == state.history.size() + 2);
  CHECK(next.system_strategies() == std::vector<int>{3});
  CHECK(next.last_user()->text == "well...");
  CHECK(next.last_system()->text == "tell me more");

  DialogueState broken = next;
  broken.history.push_back(broken.history.back());
  CHECK_THROWS_AS(broken.validate(), ConfigError);
}

TEST_CASE("task specs: builtin defaults") {
  const auto esconv = TaskSpec::builtin(TaskId::ESConv);
  CHECK(esconv.max_turns == 8);
  CHECK(esconv.gamma == doctest::Approx(0.999));
  CHECK(esconv.critic_samples == 10);
  const auto cb = TaskSpec::builtin(TaskId::CraigslistBargain);
  CHECK(cb.max_turns == 5);
  CHECK(TaskSpec::builtin(TaskId::CIMA).max_turns == 8);
}

TEST_CASE("task spec json round-trip preserves catalog and map") {
  const auto spec = TaskSpec::builtin(TaskId::CIMA);
  const auto parsed = TaskSpec::from_json(spec.to_json());
  CHECK(parsed.catalog.strategies == spec.catalog.strategies);
  CHECK(parsed.reward_map == spec.reward_map);
  CHECK(parsed.max_turns == spec.max_turns);
  CHECK(parsed.gamma == spec.gamma);
}
