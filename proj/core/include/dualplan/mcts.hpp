#pragma once

#include "dualplan/env.hpp"
#include "dualplan/policy_model.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dualplan {

struct MctsConfig {
  /// Simulations per planned action.
  int n_simulations = 10;
  /// PUCT exploration constant.
  double c_p = 1.0;
  /// Initial Q for freshly expanded actions.
  double q0 = 0.0;
  /// Simulation depth cap; <= 0 means "until the task turn cap".
  int max_depth = 0;
  /// Record a per-simulation search trace on the outcome.
  bool collect_trace = false;
};

/// PUCT selection score: Q + c_p * prior * sqrt(sum_b N(b)) / (1 + N(a)).
double puct_score(double q_sa, double prior_a, int n_sa, int n_s_total, double c_p);

/// One node of the open-loop search trie. A node is identified by the
/// action prefix that reaches it; the simulated dialogue for that prefix is
/// realized at most once and cached here.
struct SearchNode {
  DialogueState history;
  bool realized = false;

  // Filled by the critic evaluation of the realized history.
  bool evaluated = false;
  double value = 0.0;
  bool success = false;
  std::vector<std::string> verdicts;
  std::optional<double> deal_price;

  /// Terminal states (goal reached or turn/depth cap) are never expanded.
  bool terminal = false;

  bool expanded = false;
  std::vector<double> prior;
  std::vector<int> visits;
  std::vector<double> q;
  std::vector<std::unique_ptr<SearchNode>> children;

  int total_visits() const;
};

/// PUCT argmax over the node's actions; ties break to the lowest action id.
int select_action(const SearchNode& node, double c_p);

/// Initializes priors from the policy model and per-action statistics
/// (N = 0, Q = q0). Exactly one policy call, zero environment calls.
void expand_node(SearchNode& node, const PolicyModel& policy,
                 const StrategyCatalog& catalog, double q0);

/// Critic value of the node's cached history, computed once and cached.
double evaluate_leaf(SearchNode& node, EnvSession& env);

/// Incremental-mean backup along the traversed path: N += 1 first, then
/// Q += (v - Q) / N.
void backpropagate(std::span<const std::pair<SearchNode*, int>> path, double v);

/// Result of one planning call. Because the chosen root action's simulated
/// exchange is already cached in the tree, the caller can consume
/// next_state / reward / done directly instead of re-querying the
/// environment (keeping an MCTS-planned turn within 3 * n_simulations call
/// units).
struct PlanOutcome {
  int action = 0;
  DialogueState next_state;
  double reward = 0.0;
  bool success = false;
  bool done = false;
  std::vector<std::string> verdicts;
  std::optional<double> deal_price;

  std::vector<double> root_prior;
  std::vector<int> root_visits;
  std::vector<double> root_q;
  int completed_simulations = 0;
  int aborted_simulations = 0;
  std::optional<nlohmann::json> trace;
};

/// Runs cfg.n_simulations select/expand/evaluate/backpropagate iterations
/// from root_state and returns the root action with the highest visit count
/// (ties to the lowest id). Deterministic given a deterministic environment.
/// Throws SimulationAborted only if no simulation completed.
PlanOutcome mcts_plan(const DialogueState& root_state, const PolicyModel& policy,
                      EnvSession& env, const MctsConfig& cfg);

}  // namespace dualplan
