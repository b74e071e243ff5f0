#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dualplan {

enum class Speaker { System, User };

/// Static case metadata seeding one dialogue: the counseling situation, the
/// tutoring exercise, or the bargaining listing. Unused fields stay empty.
struct CaseBackground {
  std::string situation;
  std::string emotion_type;
  std::string problem_type;
  std::string exercise;
  std::string item_name;
  std::string item_description;
  double listed_price = 0.0;
  double buyer_target_price = 0.0;

  bool operator==(const CaseBackground&) const = default;
};

struct Utterance {
  Speaker speaker = Speaker::User;
  std::string text;
  int turn_index = 0;
  /// Catalog id of the strategy that produced a system utterance, when known.
  std::optional<int> strategy;

  bool operator==(const Utterance&) const = default;
};

/// The MDP state: case background plus the ordered utterance history.
/// `turn` counts completed strategy-driven system/user exchange pairs;
/// opener utterances (the case's scripted start) do not count.
struct DialogueState {
  CaseBackground background;
  std::vector<Utterance> history;
  int turn = 0;

  bool operator==(const DialogueState&) const = default;

  const Utterance* last_user() const;
  const Utterance* last_system() const;

  /// System strategy ids in utterance order, for states built through step().
  std::vector<int> system_strategies() const;

  /// Value-semantics successor: appends one system/user exchange and bumps
  /// the turn counter.
  DialogueState advanced(Utterance system_utt, Utterance user_utt) const;

  /// Throws ConfigError if speakers do not alternate or turn_index regresses.
  void validate() const;
};

}  // namespace dualplan
