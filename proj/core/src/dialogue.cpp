#include "dualplan/dialogue.hpp"

#include "dualplan/errors.hpp"

namespace dualplan {

const Utterance* DialogueState::last_user() const {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->speaker == Speaker::User) return &*it;
  }
  return nullptr;
}

const Utterance* DialogueState::last_system() const {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->speaker == Speaker::System) return &*it;
  }
  return nullptr;
}

std::vector<int> DialogueState::system_strategies() const {
  std::vector<int> out;
  for (const auto& u : history) {
    if (u.speaker == Speaker::System && u.strategy.has_value()) {
      out.push_back(*u.strategy);
    }
  }
  return out;
}

DialogueState DialogueState::advanced(Utterance system_utt, Utterance user_utt) const {
  DialogueState next = *this;
  const int idx = static_cast<int>(next.history.size());
  system_utt.speaker = Speaker::System;
  system_utt.turn_index = idx;
  user_utt.speaker = Speaker::User;
  user_utt.turn_index = idx + 1;
  next.history.push_back(std::move(system_utt));
  next.history.push_back(std::move(user_utt));
  next.turn += 1;
  return next;
}

void DialogueState::validate() const {
  int prev_index = -1;
  for (size_t i = 0; i < history.size(); ++i) {
    const auto& u = history[i];
    if (u.text.empty()) throw ConfigError("utterance text must be non-empty");
    if (u.turn_index <= prev_index) {
      throw ConfigError("utterance turn_index must be strictly increasing");
    }
    prev_index = u.turn_index;
    if (i > 0 && history[i - 1].speaker == u.speaker) {
      throw ConfigError("history must alternate speakers");
    }
  }
}

}  // namespace dualplan
