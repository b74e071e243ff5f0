#include "dualplan/selfplay.hpp"

#include "dualplan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace dualplan {

SelfPlayConfig SelfPlayConfig::defaults(TaskId task) {
  SelfPlayConfig cfg;
  switch (task) {
    case TaskId::ESConv:
      cfg.lambda2 = 1.0;
      cfg.epochs = 5;
      cfg.learning_rate = 1e-6;
      break;
    case TaskId::CIMA:
      cfg.lambda2 = 10.0;
      cfg.epochs = 3;
      cfg.learning_rate = 1e-5;
      break;
    case TaskId::CraigslistBargain:
      cfg.lambda2 = 1.0;
      cfg.epochs = 3;
      cfg.learning_rate = 1e-6;
      break;
    case TaskId::Custom:
      break;
  }
  cfg.gamma = 0.999;
  cfg.episodes_per_epoch = 100;
  return cfg;
}

void ReplayBuffer::add_episode(const Episode& episode, double gamma) {
  for (size_t i = 0; i < episode.transitions.size(); ++i) {
    const auto& t = episode.transitions[i];
    if (t.planner != PlannerTag::Mcts) {
      throw ConfigError("self-play buffers accept only MCTS-chosen transitions");
    }
    transitions.push_back(t);
    returns.push_back(cumulative_return(episode, static_cast<int>(i) + 1, gamma));
  }
}

void ReplayBuffer::clear() {
  transitions.clear();
  returns.clear();
}

Episode rollout_selfplay_episode(const DialogueState& initial_state,
                                 const PolicyModel& policy, EnvSession& env,
                                 const SelfPlayConfig& cfg) {
  const auto& task = env.task();
  Episode episode;
  episode.task = task.id;
  episode.stage = "selfplay";

  DialogueState state = initial_state;
  while (state.turn < task.max_turns) {
    const PlanOutcome plan = mcts_plan(state, policy, env, cfg.mcts);
    Transition t;
    t.state = state;
    t.action = plan.action;
    t.reward = plan.reward;
    t.next_state = plan.next_state;
    t.done = plan.done;
    t.verdicts = plan.verdicts;
    t.planner = PlannerTag::Mcts;
    episode.transitions.push_back(std::move(t));
    episode.success = plan.success;
    if (plan.deal_price.has_value()) episode.deal_price = plan.deal_price;
    state = plan.next_state;
    if (plan.done) break;
  }
  episode.turns = static_cast<int>(episode.transitions.size());
  return episode;
}

namespace {

void check_finite(const LossValue& loss) {
  if (!std::isfinite(loss.total) || !loss.grad.finite()) {
    throw StepFailed("non-finite self-play loss");
  }
}

}  // namespace

LossValue selfplay_q_loss(const PolicyModel& model, const ReplayBuffer& buffer,
                          const SelfPlayConfig& cfg, const StrategyCatalog& catalog) {
  if (buffer.empty()) throw ConfigError("self-play loss needs a non-empty buffer");
  LossValue loss;
  loss.grad = ParamGrad::zeros_like(model.params);
  for (const auto& t : buffer.transitions) {
    double q_star = t.reward;
    if (!t.done) {
      const auto next_q = model.q_values(t.next_state, catalog);
      q_star += cfg.gamma * *std::max_element(next_q.values.begin(), next_q.values.end());
    }
    const auto features = model.encoder->encode(t.state, catalog);
    const Activations acts = forward_pass(model.params, features);
    const auto a = static_cast<size_t>(t.action);
    const double err = acts.q_values[a] - q_star;  // target frozen
    loss.q_term += err * err;

    std::vector<double> d_logits(acts.probs.size(), 0.0);
    std::vector<double> d_q(acts.q_values.size(), 0.0);
    d_q[a] = 2.0 * err;
    backward(model.params, acts, d_logits, d_q, loss.grad);
  }
  loss.total = loss.q_term;
  check_finite(loss);
  return loss;
}

LossValue selfplay_policy_loss(const PolicyModel& model, const ReplayBuffer& buffer,
                               const SelfPlayConfig& cfg, const StrategyCatalog& catalog) {
  if (buffer.empty()) throw ConfigError("self-play loss needs a non-empty buffer");
  (void)cfg;
  LossValue loss;
  loss.grad = ParamGrad::zeros_like(model.params);
  for (size_t i = 0; i < buffer.transitions.size(); ++i) {
    const auto& t = buffer.transitions[i];
    const double q_hat = buffer.returns[i];
    const auto features = model.encoder->encode(t.state, catalog);
    const Activations acts = forward_pass(model.params, features);
    const auto a = static_cast<size_t>(t.action);
    const double coeff = acts.q_values[a] - q_hat;  // frozen critic estimate
    loss.policy_term += coeff * std::log(std::max(acts.probs[a], 1e-300));

    std::vector<double> d_logits(acts.probs.size(), 0.0);
    for (size_t j = 0; j < acts.probs.size(); ++j) {
      d_logits[j] = coeff * ((j == a ? 1.0 : 0.0) - acts.probs[j]);
    }
    std::vector<double> d_q(acts.q_values.size(), 0.0);
    backward(model.params, acts, d_logits, d_q, loss.grad);
  }
  loss.total = loss.policy_term;
  check_finite(loss);
  return loss;
}

LossValue selfplay_loss(const PolicyModel& model, const ReplayBuffer& buffer,
                        const SelfPlayConfig& cfg, const StrategyCatalog& catalog) {
  LossValue policy = selfplay_policy_loss(model, buffer, cfg, catalog);
  const LossValue q = selfplay_q_loss(model, buffer, cfg, catalog);
  LossValue combined;
  combined.policy_term = policy.policy_term;
  combined.q_term = q.q_term;
  combined.total = policy.policy_term + cfg.lambda2 * q.q_term;
  combined.grad = std::move(policy.grad);
  ParamGrad q_grad = q.grad;
  q_grad.scale(cfg.lambda2);
  combined.grad.accumulate(q_grad);
  check_finite(combined);
  return combined;
}

void write_selfplay_csv(std::ostream& out,
                        const std::vector<SelfPlayEpochRecord>& history) {
  out << "epoch,mean_reward,success_rate,policy_loss,q_loss,episodes\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.mean_reward << ',' << r.success_rate << ','
        << r.policy_loss << ',' << r.q_loss << ',' << r.episodes << '\n';
  }
}

SelfPlayReport run_selfplay_training(PolicyModel& model, const CaseFactory& cases,
                                     const TaskSpec& task, const SelfPlayConfig& cfg,
                                     CallCounter* counter) {
  model.check_compatible(task.catalog);
  SelfPlayReport report;
  report.best_params = model.params;
  int case_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ReplayBuffer buffer;
    SelfPlayEpochRecord record;
    record.epoch = epoch;
    double reward_sum = 0.0;
    long reward_count = 0;
    int successes = 0;
    const int update_every = std::max(1, cfg.episodes_per_update);

    for (int e = 0; e < cfg.episodes_per_epoch; ++e) {
      const EpisodeContext ctx = cases(case_index++);
      EnvSession session(ctx.backend, task, counter);
      Episode episode;
      try {
        episode = rollout_selfplay_episode(ctx.initial_state, model, session, cfg);
      } catch (const Error&) {
        // Partial episodes carry no usable return; drop them.
        continue;
      }
      if (episode.transitions.empty()) continue;
      buffer.add_episode(episode, cfg.gamma);
      for (const auto& t : episode.transitions) {
        reward_sum += t.reward;
        ++reward_count;
      }
      if (episode.success) ++successes;
      record.episodes += 1;
      report.episodes.push_back(std::move(episode));

      if (record.episodes % update_every == 0) {
        LossValue loss;
        try {
          loss = selfplay_loss(model, buffer, cfg, task.catalog);
        } catch (const StepFailed&) {
          report.aborted = true;
          return report;
        }
        sgd_step(model.params, loss.grad, cfg.learning_rate);
        record.policy_loss = loss.policy_term;
        record.q_loss = loss.q_term;
      }
    }

    record.mean_reward = reward_count == 0 ? 0.0 : reward_sum / static_cast<double>(reward_count);
    record.success_rate =
        record.episodes == 0 ? 0.0 : static_cast<double>(successes) / record.episodes;
    report.history.push_back(record);
    if (record.success_rate > report.best_metric) {
      report.best_metric = record.success_rate;
      report.best_params = model.params;
    }
  }
  return report;
}

}  // namespace dualplan
