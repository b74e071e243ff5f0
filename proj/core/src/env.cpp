#include "dualplan/env.hpp"

#include "dualplan/errors.hpp"
#include "dualplan/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dualplan {

PhaseCounts& PhaseCounts::operator+=(const PhaseCounts& o) {
  system += o.system;
  user += o.user;
  critic_units += o.critic_units;
  critic_samples += o.critic_samples;
  return *this;
}

PhaseCounts CallCounterSnapshot::total() const {
  PhaseCounts t;
  t += acting;
  t += mcts;
  t += training;
  return t;
}

void CallCounter::reset() {
  for (auto& phase : counts_) {
    for (auto& c : phase) c.store(0, std::memory_order_relaxed);
  }
}

CallCounterSnapshot CallCounter::snapshot() const {
  CallCounterSnapshot s;
  auto read = [this](Phase phase) {
    PhaseCounts c;
    c.system = cell(phase, 0).load(std::memory_order_relaxed);
    c.user = cell(phase, 1).load(std::memory_order_relaxed);
    c.critic_units = cell(phase, 2).load(std::memory_order_relaxed);
    c.critic_samples = cell(phase, 3).load(std::memory_order_relaxed);
    return c;
  };
  s.acting = read(Phase::Acting);
  s.mcts = read(Phase::MctsSimulation);
  s.training = read(Phase::Training);
  return s;
}

std::optional<double> extract_deal(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.find("not reached a deal") != std::string::npos) return std::nullopt;
  const auto pos = lower.find("reached a deal");
  if (pos == std::string::npos) {
    throw ParseFailure("deal answer matches neither template: " + text);
  }
  // Price follows the phrase; tolerate "$" and thousands separators.
  std::string digits;
  bool seen_digit = false;
  for (size_t i = pos; i < lower.size(); ++i) {
    const char c = lower[i];
    if (std::isdigit(static_cast<unsigned char>(c)) || (seen_digit && c == '.')) {
      if (c == '.' && (i + 1 >= lower.size() ||
                       !std::isdigit(static_cast<unsigned char>(lower[i + 1])))) {
        break;  // sentence-final period
      }
      digits.push_back(c);
      seen_digit = true;
    } else if (seen_digit && c != ',') {
      break;
    }
  }
  if (digits.empty()) {
    throw ParseFailure("deal reported but no price found: " + text);
  }
  return std::stod(digits);
}

double compute_sl(std::optional<double> deal_price, double listed, double buyer_target) {
  if (!(listed > buyer_target) || !(buyer_target > 0.0)) {
    throw InvalidPrices("need listed > buyer_target > 0");
  }
  if (!deal_price.has_value()) return 0.0;
  const double sl = (listed - *deal_price) / (listed - buyer_target);
  return std::clamp(sl, 0.0, 1.5);
}

bool deal_based_task(const TaskSpec& task, const CaseBackground& background) {
  return task.id == TaskId::CraigslistBargain ||
         (background.listed_price > 0.0 && background.buyer_target_price > 0.0);
}

std::optional<double> transition_deal(const Transition& t, const TaskSpec& task) {
  if (!deal_based_task(task, t.state.background)) return std::nullopt;
  int deals = 0;
  std::optional<double> price;
  for (const auto& v : t.verdicts) {
    const auto p = extract_deal(v);
    if (p.has_value()) {
      ++deals;
      if (!price.has_value()) price = p;
    }
  }
  if (2 * deals > static_cast<int>(t.verdicts.size())) return price;
  return std::nullopt;
}

bool transition_success(const Transition& t, const TaskSpec& task) {
  if (deal_based_task(task, t.state.background)) {
    return transition_deal(t, task).has_value();
  }
  return t.reward >= task.reward_map.success_score;
}

EnvSession::EnvSession(std::shared_ptr<RoleBackend> backend, const TaskSpec& task,
                       CallCounter* counter)
    : backend_(std::move(backend)),
      task_(std::make_shared<const TaskSpec>(task)),
      counter_(counter) {
  if (!backend_) throw ConfigError("env session needs a backend");
}

Utterance EnvSession::system_respond(const DialogueState& state, const Strategy& strategy) {
  const std::string text = backend_->system_respond(state, strategy.instruction);
  if (counter_) counter_->count_system(phase_);
  Utterance u;
  u.speaker = Speaker::System;
  u.text = text;
  u.turn_index = static_cast<int>(state.history.size());
  u.strategy = strategy.id;
  return u;
}

Utterance EnvSession::user_respond(const DialogueState& state) {
  const std::string text = backend_->user_respond(state);
  if (counter_) counter_->count_user(phase_);
  Utterance u;
  u.speaker = Speaker::User;
  u.text = text;
  u.turn_index = static_cast<int>(state.history.size());
  return u;
}

Evaluation EnvSession::evaluate(const DialogueState& state) {
  Evaluation eval;
  const int l = task_->critic_samples;
  eval.verdicts.reserve(static_cast<size_t>(l));
  for (int i = 0; i < l; ++i) {
    eval.verdicts.push_back(backend_->critic_judge(state, i));
  }
  if (counter_) counter_->count_critic(phase_, l);

  const auto& bg = state.background;
  if (deal_based_task(*task_, bg)) {
    // Majority of samples must report a deal; the price is the first one.
    int deals = 0;
    std::optional<double> price;
    for (const auto& v : eval.verdicts) {
      const auto p = extract_deal(v);
      if (p.has_value()) {
        ++deals;
        if (!price.has_value()) price = p;
      }
    }
    if (2 * deals > l) {
      eval.deal_price = price;
      eval.success = true;
      eval.reward = std::clamp(
          compute_sl(price, bg.listed_price, bg.buyer_target_price), -1.0, 1.0);
    } else {
      eval.success = false;
      eval.reward = 0.0;
    }
  } else {
    eval.reward = map_verdicts_to_reward(eval.verdicts, task_->reward_map);
    eval.success = is_success(eval.reward, task_->reward_map);
  }
  return eval;
}

Transition EnvSession::step(const DialogueState& state, const Strategy& strategy) {
  if (state.turn >= task_->max_turns) {
    throw StepFailed("step() on a terminal state (turn cap reached)");
  }
  const Utterance sys = system_respond(state, strategy);
  DialogueState with_sys = state;
  with_sys.history.push_back(sys);
  const Utterance usr = user_respond(with_sys);
  const DialogueState next = state.advanced(sys, usr);

  const Evaluation eval = evaluate(next);
  Transition t;
  t.state = state;
  t.action = strategy.id;
  t.reward = eval.reward;
  t.next_state = next;
  t.done = eval.success || next.turn >= task_->max_turns;
  t.verdicts = eval.verdicts;
  return t;
}

}  // namespace dualplan
