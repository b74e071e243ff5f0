#include "dualplan/pretrain.hpp"

#include "dualplan/errors.hpp"
#include "dualplan/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace dualplan {

PretrainConfig PretrainConfig::defaults(TaskId task) {
  PretrainConfig cfg;
  switch (task) {
    case TaskId::ESConv:
      cfg.lambda1 = 10.0;
      cfg.epochs = 5;
      cfg.learning_rate = 6e-6;
      cfg.variant = PretrainVariant::FullReturn;
      break;
    case TaskId::CIMA:
      cfg.lambda1 = 10.0;
      cfg.epochs = 10;
      cfg.learning_rate = 1e-5;
      cfg.variant = PretrainVariant::Bootstrapped;
      break;
    case TaskId::CraigslistBargain:
      cfg.lambda1 = 1.0;
      cfg.epochs = 10;
      cfg.learning_rate = 6e-6;
      cfg.variant = PretrainVariant::FullReturn;
      break;
    case TaskId::Custom:
      break;
  }
  cfg.gamma = 0.999;
  cfg.batch_size = 8;
  return cfg;
}

ScoredDataset score_dataset(std::span<const RawDialogue> raw, EnvSession& env,
                            PretrainVariant variant) {
  PhaseGuard guard(env, Phase::Training);
  const auto& task = env.task();
  ScoredDataset out;
  out.variant = variant;

  for (const auto& dialogue : raw) {
    try {
      Episode episode;
      episode.task = task.id;
      episode.stage = "pretrain";
      DialogueState state;
      state.background = dialogue.background;
      if (!dialogue.background.situation.empty()) {
        Utterance opener;
        opener.speaker = Speaker::User;
        opener.text = dialogue.background.situation;
        opener.turn_index = 0;
        state.history.push_back(opener);
      }
      for (size_t i = 0; i < dialogue.turns.size(); ++i) {
        const auto& turn = dialogue.turns[i];
        Utterance sys;
        sys.speaker = Speaker::System;
        sys.text = turn.system_text;
        sys.strategy = turn.action;
        Utterance usr;
        usr.speaker = Speaker::User;
        usr.text = turn.user_text;
        const DialogueState next = state.advanced(sys, usr);

        const Evaluation eval = env.evaluate(next);
        Transition t;
        t.state = state;
        t.action = turn.action;
        t.reward = eval.reward;
        t.next_state = next;
        // A snippet ending is truncation, not termination: the bootstrap
        // target may still look through next_state.
        t.done = eval.success || next.turn >= task.max_turns;
        t.verdicts = eval.verdicts;
        episode.transitions.push_back(std::move(t));
        episode.success = eval.success;
        if (eval.deal_price.has_value()) episode.deal_price = eval.deal_price;
        state = next;
        if (eval.success) break;
      }
      episode.turns = static_cast<int>(episode.transitions.size());
      if (episode.transitions.empty()) continue;
      if (variant == PretrainVariant::FullReturn) {
        out.episodes.push_back(std::move(episode));
      } else {
        for (auto& t : episode.transitions) out.transitions.push_back(std::move(t));
      }
    } catch (const Error&) {
      ++out.skipped;
    }
  }
  return out;
}

namespace {

/// Shared per-transition contribution: runs the forward pass, adds the two
/// loss terms, and accumulates gradients. `q_target` and `policy_coeff` are
/// pre-computed constants (anything gradient-stopped happens at the caller).
void accumulate_terms(const PolicyModel& model, const StrategyCatalog& catalog,
                      const DialogueState& state, int action, double q_target,
                      double policy_coeff, double lambda, LossValue& loss) {
  const auto features = model.encoder->encode(state, catalog);
  const Activations acts = forward_pass(model.params, features);
  const auto a = static_cast<size_t>(action);

  const double log_pi = std::log(std::max(acts.probs[a], 1e-300));
  loss.policy_term += policy_coeff * log_pi;
  const double q_err = acts.q_values[a] - q_target;
  loss.q_term += q_err * q_err;

  // d(policy_term)/dlogits = coeff * (onehot - probs); q head gets
  // lambda * 2 * (Q - target) on the taken action.
  std::vector<double> d_logits(acts.probs.size(), 0.0);
  for (size_t i = 0; i < acts.probs.size(); ++i) {
    d_logits[i] = policy_coeff * ((i == a ? 1.0 : 0.0) - acts.probs[i]);
  }
  std::vector<double> d_q(acts.q_values.size(), 0.0);
  d_q[a] = lambda * 2.0 * q_err;
  backward(model.params, acts, d_logits, d_q, loss.grad);
}

double max_q(const PolicyModel& model, const StrategyCatalog& catalog,
             const DialogueState& state) {
  const auto qs = model.q_values(state, catalog);
  return *std::max_element(qs.values.begin(), qs.values.end());
}

}  // namespace

LossValue pretrain_loss_full(const PolicyModel& model, std::span<const Episode> batch,
                             const PretrainConfig& cfg, const StrategyCatalog& catalog) {
  LossValue loss;
  loss.grad = ParamGrad::zeros_like(model.params);
  for (const auto& episode : batch) {
    for (size_t i = 0; i < episode.transitions.size(); ++i) {
      const auto& t = episode.transitions[i];
      const double q_hat = cumulative_return(episode, static_cast<int>(i) + 1, cfg.gamma);
      // policy term: -Qhat * log pi  ->  coefficient -Qhat on log pi.
      accumulate_terms(model, catalog, t.state, t.action, q_hat, -q_hat, cfg.lambda1, loss);
    }
  }
  loss.total = loss.policy_term + cfg.lambda1 * loss.q_term;
  if (!std::isfinite(loss.total) || !loss.grad.finite()) {
    throw StepFailed("non-finite pretraining loss");
  }
  return loss;
}

LossValue pretrain_loss_bootstrapped(const PolicyModel& model,
                                     std::span<const Transition> batch,
                                     const PretrainConfig& cfg,
                                     const StrategyCatalog& catalog) {
  LossValue loss;
  loss.grad = ParamGrad::zeros_like(model.params);
  for (const auto& t : batch) {
    // Both the bootstrap target and the policy coefficient are frozen
    // evaluations: no gradient flows through the next state or the critic
    // estimate of the current action.
    const double q_star =
        t.done ? t.reward : t.reward + cfg.gamma * max_q(model, catalog, t.next_state);
    const auto qs = model.q_values(t.state, catalog);
    const double q_sa = qs.values[static_cast<size_t>(t.action)];
    double coeff = q_sa - q_star;
    if (cfg.flip_policy_coefficient) coeff = -coeff;
    accumulate_terms(model, catalog, t.state, t.action, q_star, coeff, cfg.lambda1, loss);
  }
  loss.total = loss.policy_term + cfg.lambda1 * loss.q_term;
  if (!std::isfinite(loss.total) || !loss.grad.finite()) {
    throw StepFailed("non-finite pretraining loss");
  }
  return loss;
}

double validation_metric(const PolicyModel& model, const ScoredDataset& validation,
                         const StrategyCatalog& catalog) {
  double reward_sum = 0.0;
  long turns = 0;
  auto credit = [&](const Transition& t) {
    if (model.greedy_action(t.state, catalog) == t.action) reward_sum += t.reward;
    ++turns;
  };
  for (const auto& e : validation.episodes) {
    for (const auto& t : e.transitions) credit(t);
  }
  for (const auto& t : validation.transitions) credit(t);
  return turns == 0 ? 0.0 : reward_sum / static_cast<double>(turns);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,policy_loss,q_loss,val_metric\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.policy_loss << ',' << r.q_loss << ',' << r.val_metric << '\n';
  }
}

TrainReport run_pretraining(PolicyModel& model, const ScoredDataset& dataset,
                            const PretrainConfig& cfg, const ScoredDataset& validation,
                            const StrategyCatalog& catalog) {
  if (dataset.empty()) throw ConfigError("pretraining needs a non-empty dataset");
  if (dataset.variant != cfg.variant) {
    throw ConfigError("dataset variant does not match the configured variant");
  }
  model.check_compatible(catalog);

  TrainReport report;
  report.best_params = model.params;
  report.best_metric = validation_metric(model, validation, catalog);

  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double policy_loss = 0.0;
    double q_loss = 0.0;
    const size_t batch_size =
        cfg.batch_size > 0 ? static_cast<size_t>(cfg.batch_size) : dataset.size();

    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t end = std::min(order.size(), start + batch_size);
      // Batches are accumulated in ascending dataset order, so the gradient
      // of a full batch is independent of the shuffle.
      std::vector<size_t> batch(order.begin() + static_cast<long>(start),
                                order.begin() + static_cast<long>(end));
      std::sort(batch.begin(), batch.end());

      LossValue loss;
      try {
        if (cfg.variant == PretrainVariant::FullReturn) {
          std::vector<Episode> episodes;
          episodes.reserve(batch.size());
          for (const size_t i : batch) episodes.push_back(dataset.episodes[i]);
          loss = pretrain_loss_full(model, episodes, cfg, catalog);
        } else {
          std::vector<Transition> transitions;
          transitions.reserve(batch.size());
          for (const size_t i : batch) transitions.push_back(dataset.transitions[i]);
          loss = pretrain_loss_bootstrapped(model, transitions, cfg, catalog);
        }
      } catch (const StepFailed&) {
        report.aborted = true;
        return report;
      }
      sgd_step(model.params, loss.grad, cfg.learning_rate);
      policy_loss += loss.policy_term;
      q_loss += loss.q_term;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.policy_loss = policy_loss;
    record.q_loss = q_loss;
    record.val_metric = validation_metric(model, validation, catalog);
    report.history.push_back(record);
    if (record.val_metric > report.best_metric) {
      report.best_metric = record.val_metric;
      report.best_params = model.params;
    }
  }
  // With no validation set the final params are the checkpoint.
  if (validation.empty()) report.best_params = model.params;
  return report;
}

}  // namespace dualplan
