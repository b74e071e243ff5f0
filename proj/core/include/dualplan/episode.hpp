#pragma once

#include "dualplan/dialogue.hpp"
#include "dualplan/strategy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dualplan {

/// Which planner picked the action of a transition.
enum class PlannerTag { Policy, Mcts, Human };

std::string to_string(PlannerTag tag);
PlannerTag planner_tag_from_string(const std::string& name);

struct Transition {
  DialogueState state;
  int action = 0;
  double reward = 0.0;
  DialogueState next_state;
  bool done = false;
  std::vector<std::string> verdicts;
  PlannerTag planner = PlannerTag::Policy;

  bool operator==(const Transition&) const = default;
};

struct Episode {
  TaskId task = TaskId::Custom;
  std::vector<Transition> transitions;
  bool success = false;
  int turns = 0;
  std::optional<double> deal_price;
  /// Free-form provenance tag: "pretrain", "selfplay", "eval", "chat".
  std::string stage;

  bool operator==(const Episode&) const = default;
};

/// Discounted return from 1-based turn `t` to the episode's realized end:
/// sum_{k=t} gamma^(k-t) * r_k. Throws IndexOutOfRange outside [1, turns].
double cumulative_return(const Episode& episode, int t, double gamma);

nlohmann::json to_json(const Episode& episode);
Episode episode_from_json(const nlohmann::json& j);

/// JSON-Lines persistence: one episode per line. Rewards round-trip
/// bit-identically (shortest round-trip double formatting).
void append_episode_jsonl(std::ostream& out, const Episode& episode);
std::vector<Episode> read_episodes_jsonl(std::istream& in);
std::vector<Episode> read_episodes_jsonl_file(const std::string& path);
void write_episodes_jsonl_file(const std::string& path,
                               const std::vector<Episode>& episodes);

nlohmann::json to_json(const DialogueState& state);
DialogueState dialogue_state_from_json(const nlohmann::json& j);

}  // namespace dualplan
