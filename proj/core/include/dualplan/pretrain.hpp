#pragma once

#include "dualplan/env.hpp"
#include "dualplan/episode.hpp"
#include "dualplan/policy_model.hpp"
#include "dualplan/task.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dualplan {

enum class PretrainVariant {
  /// Complete episodes with realized discounted returns as targets.
  FullReturn,
  /// Dialogue snippets with one-step bootstrapped Q targets.
  Bootstrapped,
};

struct PretrainConfig {
  double lambda1 = 10.0;
  double gamma = 0.999;
  int epochs = 5;
  int batch_size = 8;
  double learning_rate = 6e-6;
  PretrainVariant variant = PretrainVariant::FullReturn;
  /// Negates the bootstrapped policy-loss coefficient (see the printed
  /// formula's sign); off by default, the formula runs as written.
  bool flip_policy_coefficient = false;
  uint64_t seed = 0;

  /// Built-in defaults: ESConv lambda1 10 / 5 epochs / lr 6e-6 (FullReturn);
  /// CIMA lambda1 10 / 10 epochs / lr 1e-5 (Bootstrapped);
  /// CB lambda1 1 / 10 epochs / lr 6e-6.
  static PretrainConfig defaults(TaskId task);
};

/// One logged, unscored dialogue: the case background plus the annotated
/// strategy and both utterances per turn.
struct RawDialogue {
  struct Turn {
    int action = 0;
    std::string system_text;
    std::string user_text;
  };
  CaseBackground background;
  std::vector<Turn> turns;
};

/// Critic-scored training corpus. FullReturn keeps whole episodes;
/// Bootstrapped keeps independent transitions.
struct ScoredDataset {
  PretrainVariant variant = PretrainVariant::FullReturn;
  std::vector<Episode> episodes;        // FullReturn
  std::vector<Transition> transitions;  // Bootstrapped
  int skipped = 0;                      // records dropped due to critic failures

  size_t size() const {
    return variant == PretrainVariant::FullReturn ? episodes.size() : transitions.size();
  }
  bool empty() const { return size() == 0; }
};

/// Scores every turn of every raw dialogue with l critic samples and maps
/// the verdicts to rewards (training-phase calls). Records whose critic
/// evaluation fails are skipped and counted.
ScoredDataset score_dataset(std::span<const RawDialogue> raw, EnvSession& env,
                            PretrainVariant variant);

struct LossValue {
  double total = 0.0;
  double policy_term = 0.0;
  double q_term = 0.0;
  ParamGrad grad;
};

/// Full-return pretraining loss over a batch of complete episodes:
///   policy term  -sum_t Qhat(s_t,a_t) * log pi(a_t|s_t)
///   q term        sum_t (Q(s_t,a_t) - Qhat(s_t,a_t))^2
///   total         policy + lambda1 * q
LossValue pretrain_loss_full(const PolicyModel& model, std::span<const Episode> batch,
                             const PretrainConfig& cfg, const StrategyCatalog& catalog);

/// Bootstrapped pretraining loss over independent transitions; both the
/// one-step target R + gamma * max_a' Q(s',a') and the policy-loss
/// coefficient (Q(s,a) - target) are evaluated and frozen before gradients.
LossValue pretrain_loss_bootstrapped(const PolicyModel& model,
                                     std::span<const Transition> batch,
                                     const PretrainConfig& cfg,
                                     const StrategyCatalog& catalog);

struct EpochRecord {
  int epoch = 0;
  double policy_loss = 0.0;
  double q_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  PolicyParams best_params;
  double best_metric = 0.0;
  bool aborted = false;  // NaN divergence
};

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

/// Mean per-turn reward the greedy policy would collect on the held-out
/// episodes, teacher-forced: a turn contributes its logged reward when the
/// greedy action matches the logged action, zero otherwise.
double validation_metric(const PolicyModel& model, const ScoredDataset& validation,
                         const StrategyCatalog& catalog);

/// Minibatch SGD over the scored corpus; keeps the checkpoint that scored
/// best on the validation set. NaN losses abort with partial history.
TrainReport run_pretraining(PolicyModel& model, const ScoredDataset& dataset,
                            const PretrainConfig& cfg, const ScoredDataset& validation,
                            const StrategyCatalog& catalog);

}  // namespace dualplan
