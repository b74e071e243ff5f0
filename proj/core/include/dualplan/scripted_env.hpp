#pragma once

#include "dualplan/env.hpp"
#include "dualplan/hashing.hpp"
#include "dualplan/task.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualplan {

/// A deterministic dialogue world driven by a hidden score. Each strategy
/// shifts the score by a phase-dependent amount; the critic reads the score
/// off a band table. Everything is a pure function of the action sequence,
/// so branching simulations replay identically and the optimal policy is
/// computable by exhaustive search over action sequences of length <= T.
///
/// The bargaining variant instead tracks a seller ask that concedes on
/// counter-offers; an agree action closes the deal at the current ask.
struct ScriptedSimSpec {
  int num_actions = 2;
  int max_turns = 4;
  double initial_score = 0.0;
  std::vector<std::vector<double>> effects;  // [phase][action] score deltas
  int phase_length = 1;
  std::vector<double> band_edges;            // ascending thresholds
  std::vector<std::string> band_verdicts;    // band_edges.size() + 1 entries
  double noise = 0.0;          // half-width of band-edge jitter per critic sample
  double case_jitter = 0.0;    // half-width of per-case initial-score jitter
  uint64_t seed = 0;

  bool bargain = false;
  double listed_price = 0.0;
  double buyer_target = 0.0;
  double seller_floor = 0.0;
  double concession = 0.0;
  int counter_action = -1;
  int agree_action = -1;

  int phase_count() const { return static_cast<int>(effects.size()); }
  int phase_of(int action_index) const;
  double hidden_score(std::span<const int> actions) const;
  /// Seller ask after the given buyer actions (bargain variant).
  double seller_ask(std::span<const int> actions) const;
  /// Band index of a score against the (optionally jittered) edges.
  int band_of(double score, uint64_t jitter_key) const;
  void validate() const;

  /// Demonstration worlds for the three built-in tasks.
  static ScriptedSimSpec builtin(TaskId task);
};

/// RoleBackend over a ScriptedSimSpec. Stateless across calls: every reply
/// is recomputed from the strategy ids recorded in the dialogue history,
/// which keeps branching MCTS simulations consistent.
class ScriptedBackend final : public RoleBackend {
 public:
  ScriptedBackend(ScriptedSimSpec spec, StrategyCatalog catalog);

  std::string system_respond(const DialogueState& state,
                             const std::string& instruction) override;
  std::string user_respond(const DialogueState& state) override;
  std::string critic_judge(const DialogueState& state, int sample_index) override;

  const ScriptedSimSpec& spec() const { return spec_; }

 private:
  ScriptedSimSpec spec_;
  StrategyCatalog catalog_;
};

/// Opener state for a scripted case (one user utterance announcing the
/// starting phase and band, or the bargaining price exchange).
DialogueState scripted_initial_state(const ScriptedSimSpec& spec);

/// Per-case variation of a base spec: jitters the initial score (and prices
/// for bargaining) deterministically from the case seed.
ScriptedSimSpec jitter_case(const ScriptedSimSpec& base, uint64_t case_seed);

/// CaseFactory producing independent scripted sessions per case.
CaseFactory scripted_case_factory(ScriptedSimSpec base, StrategyCatalog catalog,
                                  uint64_t run_seed);

}  // namespace dualplan
