#pragma once

#include "dualplan/env.hpp"
#include "dualplan/episode.hpp"
#include "dualplan/mcts.hpp"
#include "dualplan/policy_model.hpp"
#include "dualplan/pretrain.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dualplan {

struct SelfPlayConfig {
  double lambda2 = 1.0;
  int epochs = 5;
  int episodes_per_epoch = 100;
  double learning_rate = 1e-6;
  double gamma = 0.999;
  MctsConfig mcts;
  /// Gradient step over the whole epoch buffer after this many episodes.
  int episodes_per_update = 1;
  uint64_t seed = 0;

  /// Built-in defaults: ESConv lambda2 1 / 5 epochs / lr 1e-6;
  /// CIMA lambda2 10 / 3 epochs / lr 1e-5; CB lambda2 1 / 3 epochs / lr 1e-6.
  static SelfPlayConfig defaults(TaskId task);
};

/// Transitions collected this epoch, with realized discounted returns
/// attached at episode completion. Only MCTS-chosen transitions may enter.
struct ReplayBuffer {
  std::vector<Transition> transitions;
  std::vector<double> returns;  // Qhat per transition

  void add_episode(const Episode& episode, double gamma);
  void clear();
  bool empty() const { return transitions.empty(); }
  size_t size() const { return transitions.size(); }
};

/// One self-play episode: every action is picked by the MCTS planner with
/// priors from the current policy; the chosen child's cached simulation is
/// consumed as the actual exchange, so an episode turn costs no extra
/// environment calls beyond its simulations.
Episode rollout_selfplay_episode(const DialogueState& initial_state,
                                 const PolicyModel& policy, EnvSession& env,
                                 const SelfPlayConfig& cfg);

/// Q loss sum_t (Qstar - Q(s_t,a_t))^2 with the bootstrapped target frozen;
/// terminal transitions use Qstar = R.
LossValue selfplay_q_loss(const PolicyModel& model, const ReplayBuffer& buffer,
                          const SelfPlayConfig& cfg, const StrategyCatalog& catalog);

/// Policy loss sum_t (Q(s_t,a_t) - Qhat_t) * log pi(a_t|s_t) with the
/// coefficient frozen; minimizing ascends log pi weighted by Qhat - Q.
LossValue selfplay_policy_loss(const PolicyModel& model, const ReplayBuffer& buffer,
                               const SelfPlayConfig& cfg, const StrategyCatalog& catalog);

/// Combined loss: policy + lambda2 * q, single backward sweep.
LossValue selfplay_loss(const PolicyModel& model, const ReplayBuffer& buffer,
                        const SelfPlayConfig& cfg, const StrategyCatalog& catalog);

struct SelfPlayEpochRecord {
  int epoch = 0;
  double mean_reward = 0.0;
  double success_rate = 0.0;
  double policy_loss = 0.0;
  double q_loss = 0.0;
  int episodes = 0;
};

struct SelfPlayReport {
  std::vector<SelfPlayEpochRecord> history;
  std::vector<Episode> episodes;  // all rollouts, stage-tagged "selfplay"
  PolicyParams best_params;       // highest epoch success rate
  double best_metric = -1.0;
  bool aborted = false;
};

void write_selfplay_csv(std::ostream& out, const std::vector<SelfPlayEpochRecord>& history);

/// Per epoch: roll out episodes via MCTS against fresh sessions from the
/// case factory, take a full-buffer gradient step every
/// `episodes_per_update` episodes, clear the buffer at epoch end.
SelfPlayReport run_selfplay_training(PolicyModel& model, const CaseFactory& cases,
                                     const TaskSpec& task, const SelfPlayConfig& cfg,
                                     CallCounter* counter = nullptr);

}  // namespace dualplan
