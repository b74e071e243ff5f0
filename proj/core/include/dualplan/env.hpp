#pragma once

#include "dualplan/deal.hpp"
#include "dualplan/dialogue.hpp"
#include "dualplan/episode.hpp"
#include "dualplan/task.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dualplan {

enum class Phase { Acting, MctsSimulation, Training };
enum class Role { System, User, Critic };

/// Per-role, per-phase LLM-call accounting. A "unit" is one call per role
/// per turn: the l critic samples of one evaluation count as a single
/// critic unit, with raw samples tracked separately.
struct PhaseCounts {
  long system = 0;
  long user = 0;
  long critic_units = 0;
  long critic_samples = 0;

  long units() const { return system + user + critic_units; }
  PhaseCounts& operator+=(const PhaseCounts& o);
};

struct CallCounterSnapshot {
  PhaseCounts acting;
  PhaseCounts mcts;
  PhaseCounts training;

  PhaseCounts total() const;
  long total_units() const { return total().units(); }
};

class CallCounter {
 public:
  void count_system(Phase phase) { cell(phase, 0).fetch_add(1, std::memory_order_relaxed); }
  void count_user(Phase phase) { cell(phase, 1).fetch_add(1, std::memory_order_relaxed); }
  void count_critic(Phase phase, int samples) {
    cell(phase, 2).fetch_add(1, std::memory_order_relaxed);
    cell(phase, 3).fetch_add(samples, std::memory_order_relaxed);
  }
  void reset();
  CallCounterSnapshot snapshot() const;

 private:
  std::atomic<long>& cell(Phase phase, int idx) {
    return counts_[static_cast<size_t>(phase)][static_cast<size_t>(idx)];
  }
  const std::atomic<long>& cell(Phase phase, int idx) const {
    return counts_[static_cast<size_t>(phase)][static_cast<size_t>(idx)];
  }
  std::array<std::array<std::atomic<long>, 4>, 3> counts_{};
};

/// The three simulated roles behind one dialogue session. `sample_index`
/// distinguishes the l critic draws of a single evaluation so deterministic
/// backends can decorrelate them.
class RoleBackend {
 public:
  virtual ~RoleBackend() = default;
  virtual std::string system_respond(const DialogueState& state,
                                     const std::string& instruction) = 0;
  virtual std::string user_respond(const DialogueState& state) = 0;
  virtual std::string critic_judge(const DialogueState& state, int sample_index) = 0;
};

/// One critic evaluation of a state: l sampled verdicts mapped and averaged.
struct Evaluation {
  double reward = 0.0;
  std::vector<std::string> verdicts;
  std::optional<double> deal_price;
  bool success = false;
};

/// Binds a backend to a task and a call counter for one episode. All
/// backend traffic flows through here so the accounting can never be
/// bypassed.
class EnvSession {
 public:
  EnvSession(std::shared_ptr<RoleBackend> backend, const TaskSpec& task,
             CallCounter* counter);

  const TaskSpec& task() const { return *task_; }
  Phase phase() const { return phase_; }
  void set_phase(Phase phase) { phase_ = phase; }

  /// One counted system-role call; the returned utterance carries the
  /// strategy id.
  Utterance system_respond(const DialogueState& state, const Strategy& strategy);
  /// One counted user-role call.
  Utterance user_respond(const DialogueState& state);
  /// l counted-as-one critic samples on `state`, mapped to a scalar reward.
  Evaluation evaluate(const DialogueState& state);

  /// Full acting step: system responds under the strategy's instruction,
  /// user replies, critic scores the new state. Exactly 3 call units.
  /// Throws StepFailed on a terminal input state, without backend calls.
  Transition step(const DialogueState& state, const Strategy& strategy);

 private:
  std::shared_ptr<RoleBackend> backend_;
  std::shared_ptr<const TaskSpec> task_;
  CallCounter* counter_;
  Phase phase_ = Phase::Acting;
};

/// Restores the session phase on scope exit.
class PhaseGuard {
 public:
  PhaseGuard(EnvSession& session, Phase phase)
      : session_(session), saved_(session.phase()) {
    session_.set_phase(phase);
  }
  ~PhaseGuard() { session_.set_phase(saved_); }
  PhaseGuard(const PhaseGuard&) = delete;
  PhaseGuard& operator=(const PhaseGuard&) = delete;

 private:
  EnvSession& session_;
  Phase saved_;
};

/// Whether the task judges goals by deal detection (bargaining) rather than
/// by the reward-map success threshold.
bool deal_based_task(const TaskSpec& task, const CaseBackground& background);

/// Success and deal price re-derived from a transition's stored verdicts,
/// matching what the environment computed when it produced the transition.
bool transition_success(const Transition& t, const TaskSpec& task);
std::optional<double> transition_deal(const Transition& t, const TaskSpec& task);

/// Provisioning for one evaluation or training case: the opener state and a
/// fresh backend session.
struct EpisodeContext {
  DialogueState initial_state;
  std::shared_ptr<RoleBackend> backend;
};

using CaseFactory = std::function<EpisodeContext(int case_index)>;

}  // namespace dualplan
