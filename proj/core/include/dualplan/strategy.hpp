#pragma once

#include <string>
#include <vector>

namespace dualplan {

enum class TaskId { ESConv, CIMA, CraigslistBargain, Custom };

std::string to_string(TaskId id);
TaskId task_id_from_string(const std::string& name);

/// One discrete dialogue action: a catalog index, a human-readable label,
/// and the natural-language instruction injected into the system prompt.
struct Strategy {
  int id = 0;
  std::string name;
  std::string instruction;

  bool operator==(const Strategy&) const = default;
};

/// The ordered action set of a task. Ids are contiguous 0..size()-1.
struct StrategyCatalog {
  TaskId task = TaskId::Custom;
  std::vector<Strategy> strategies;

  int size() const { return static_cast<int>(strategies.size()); }
  const Strategy& at(int id) const;
  const Strategy* find_by_instruction(const std::string& instruction) const;
  const Strategy* find_by_name(const std::string& name) const;

  /// Throws ConfigError on non-contiguous ids, empty instructions, or a
  /// built-in task with the wrong action count (ESConv 8, CIMA 5, CB 11).
  void validate() const;

  static StrategyCatalog builtin(TaskId task);
};

}  // namespace dualplan
