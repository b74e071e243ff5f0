#include "dualplan/mcts.hpp"

#include "dualplan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dualplan {

using nlohmann::json;

double puct_score(double q_sa, double prior_a, int n_sa, int n_s_total, double c_p) {
  return q_sa + c_p * prior_a * std::sqrt(static_cast<double>(n_s_total)) /
                    (1.0 + static_cast<double>(n_sa));
}

int SearchNode::total_visits() const {
  int total = 0;
  for (const int n : visits) total += n;
  return total;
}

int select_action(const SearchNode& node, double c_p) {
  if (!node.expanded) throw SimulationAborted("select on an unexpanded node");
  const int total = node.total_visits();
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < static_cast<int>(node.prior.size()); ++a) {
    const double score = puct_score(node.q[static_cast<size_t>(a)],
                                    node.prior[static_cast<size_t>(a)],
                                    node.visits[static_cast<size_t>(a)], total, c_p);
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

void expand_node(SearchNode& node, const PolicyModel& policy,
                 const StrategyCatalog& catalog, double q0) {
  if (!node.realized) throw SimulationAborted("expand on a node without a cached history");
  const auto dist = policy.distribution(node.history, catalog);
  const size_t n = dist.probs.size();
  node.prior = dist.probs;
  node.visits.assign(n, 0);
  node.q.assign(n, q0);
  node.children.resize(n);
  node.expanded = true;
}

double evaluate_leaf(SearchNode& node, EnvSession& env) {
  if (!node.realized) throw SimulationAborted("evaluate on a node without a cached history");
  if (!node.evaluated) {
    const Evaluation eval = env.evaluate(node.history);
    node.value = eval.reward;
    node.success = eval.success;
    node.verdicts = eval.verdicts;
    node.deal_price = eval.deal_price;
    node.evaluated = true;
  }
  return node.value;
}

void backpropagate(std::span<const std::pair<SearchNode*, int>> path, double v) {
  for (const auto& [node, action] : path) {
    const auto a = static_cast<size_t>(action);
    node->visits[a] += 1;
    node->q[a] += (v - node->q[a]) / static_cast<double>(node->visits[a]);
  }
}

namespace {

/// Generates the child's simulated exchange and evaluates it. The critic
/// verdict doubles as the terminal check: goal reached or cap hit.
void realize_child(SearchNode& parent, SearchNode& child, int action, int depth,
                   const MctsConfig& cfg, EnvSession& env) {
  const auto& task = env.task();
  try {
    const Utterance sys = env.system_respond(parent.history, task.catalog.at(action));
    DialogueState with_sys = parent.history;
    with_sys.history.push_back(sys);
    const Utterance usr = env.user_respond(with_sys);
    child.history = parent.history.advanced(sys, usr);
    child.realized = true;
    evaluate_leaf(child, env);
  } catch (...) {
    // A half-built node must not survive; the next visit regenerates it.
    child = SearchNode{};
    throw;
  }

  const int depth_cap = cfg.max_depth > 0
                            ? std::min(cfg.max_depth, task.max_turns)
                            : task.max_turns;
  child.terminal = child.success || child.history.turn >= task.max_turns || depth >= depth_cap;
}

}  // namespace

PlanOutcome mcts_plan(const DialogueState& root_state, const PolicyModel& policy,
                      EnvSession& env, const MctsConfig& cfg) {
  if (cfg.n_simulations < 1) throw ConfigError("n_simulations must be >= 1");
  if (cfg.c_p < 0.0) throw ConfigError("c_p must be non-negative");
  const auto& task = env.task();
  if (root_state.turn >= task.max_turns) {
    throw SimulationAborted("planning from a terminal state");
  }

  PhaseGuard guard(env, Phase::MctsSimulation);

  SearchNode root;
  root.history = root_state;
  root.realized = true;
  expand_node(root, policy, task.catalog, cfg.q0);

  json trace = json::array();
  int completed = 0;
  int aborted = 0;
  std::string last_error;

  for (int sim = 0; sim < cfg.n_simulations; ++sim) {
    std::vector<std::pair<SearchNode*, int>> path;
    try {
      SearchNode* node = &root;
      int depth = 0;
      double v = 0.0;
      for (;;) {
        if (node->terminal) {
          v = node->value;
          break;
        }
        if (!node->expanded) {
          expand_node(*node, policy, task.catalog, cfg.q0);
          v = evaluate_leaf(*node, env);  // cached at realization
          break;
        }
        const int action = select_action(*node, cfg.c_p);
        path.emplace_back(node, action);
        auto& slot = node->children[static_cast<size_t>(action)];
        if (!slot) slot = std::make_unique<SearchNode>();
        if (!slot->realized) {
          realize_child(*node, *slot, action, depth + 1, cfg, env);
        }
        node = slot.get();
        ++depth;
      }
      backpropagate(path, v);
      ++completed;
      if (cfg.collect_trace) {
        json actions = json::array();
        for (const auto& [n, a] : path) actions.push_back(a);
        trace.push_back({{"simulation", sim}, {"path", std::move(actions)}, {"value", v}});
      }
    } catch (const Error& e) {
      ++aborted;
      last_error = e.what();
    }
  }

  if (completed == 0) {
    throw SimulationAborted("all simulations failed: " + last_error);
  }

  int best = 0;
  for (int a = 1; a < static_cast<int>(root.visits.size()); ++a) {
    if (root.visits[static_cast<size_t>(a)] > root.visits[static_cast<size_t>(best)]) best = a;
  }

  PlanOutcome out;
  out.action = best;
  out.root_prior = root.prior;
  out.root_visits = root.visits;
  out.root_q = root.q;
  out.completed_simulations = completed;
  out.aborted_simulations = aborted;

  SearchNode* chosen = root.children[static_cast<size_t>(best)].get();
  if (chosen == nullptr || !chosen->realized) {
    // Can only happen when every simulation that visited `best` aborted
    // mid-realization; re-run the exchange directly.
    auto slot = std::make_unique<SearchNode>();
    realize_child(root, *slot, best, 1, cfg, env);
    root.children[static_cast<size_t>(best)] = std::move(slot);
    chosen = root.children[static_cast<size_t>(best)].get();
  }
  out.next_state = chosen->history;
  out.reward = chosen->value;
  out.success = chosen->success;
  out.done = chosen->success || chosen->history.turn >= task.max_turns;
  out.verdicts = chosen->verdicts;
  out.deal_price = chosen->deal_price;
  if (cfg.collect_trace) {
    out.trace = json{{"simulations", std::move(trace)},
                     {"root",
                      {{"prior", root.prior},
                       {"visits", root.visits},
                       {"q", root.q}}}};
  }
  return out;
}

}  // namespace dualplan
