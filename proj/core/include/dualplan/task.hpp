#pragma once

#include "dualplan/reward.hpp"
#include "dualplan/strategy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace dualplan {

/// Everything that defines one dialogue task: the action catalog, the
/// critic score map, the turn cap T, the discount, and the critic sample
/// count l used for each state evaluation.
struct TaskSpec {
  TaskId id = TaskId::Custom;
  StrategyCatalog catalog;
  RewardMap reward_map;
  int max_turns = 8;
  double gamma = 0.999;
  int critic_samples = 10;

  void validate() const;

  /// Built-in defaults: T = 8 for ESConv/CIMA, 5 for CB; gamma 0.999; l 10.
  static TaskSpec builtin(TaskId id);

  static TaskSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  static TaskSpec load_file(const std::string& path);
};

}  // namespace dualplan
