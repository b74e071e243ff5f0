#pragma once

#include "dualplan/strategy.hpp"

#include <span>
#include <string>
#include <vector>

namespace dualplan {

/// Maps critic verdict phrases to scalar scores. Matching is by
/// case-insensitive key-phrase containment on the verdict's first sentence;
/// each entry may carry alias phrases so the full templated critic replies
/// ("No, but the Patient feels better.") resolve to the canonical key.
struct RewardMap {
  struct Entry {
    std::string verdict;
    double score = 0.0;
    std::vector<std::string> aliases;

    bool operator==(const Entry&) const = default;
  };

  std::vector<Entry> verdicts;
  /// A per-turn reward at or above this marks the goal as reached.
  double success_score = 1.0;

  bool operator==(const RewardMap&) const = default;

  static RewardMap builtin(TaskId task);
};

/// Index of the unique entry matching `verdict`, resolving nested keys
/// ("partially correct" vs "correct") to the most specific one.
/// Throws UnrecognizedVerdict on zero or genuinely ambiguous matches.
int match_verdict(const std::string& verdict, const RewardMap& map);

/// Arithmetic mean of the mapped scores of all verdicts.
double map_verdicts_to_reward(std::span<const std::string> verdicts,
                              const RewardMap& map);

inline bool is_success(double reward, const RewardMap& map) {
  return reward >= map.success_score;
}

}  // namespace dualplan
