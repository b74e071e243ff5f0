#pragma once

#include "dualplan/env.hpp"
#include "dualplan/episode.hpp"
#include "dualplan/errors.hpp"
#include "dualplan/gate.hpp"
#include "dualplan/mcts.hpp"
#include "dualplan/policy_model.hpp"
#include "dualplan/task.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dualplan {

enum class PlannerMode { System1, System2, Dual };

std::string to_string(PlannerMode mode);
PlannerMode planner_mode_from_string(const std::string& name);

struct RunConfig {
  TaskId task = TaskId::ESConv;
  PlannerMode mode = PlannerMode::System1;
  double mcts_ratio = 0.5;  // Dual target ratio
  MctsConfig mcts;
  std::string checkpoint;                      // empty = fresh params
  std::string backend = "scripted";            // scripted | llm | cassette
  int n_eval_cases = 50;
  uint64_t seed = 0;
  int workers = 1;
  int gate_min_samples = 10;
  bool shared_gate = false;  // default: independent gate per case
  UncertaintyMeasure gate_measure = UncertaintyMeasure::Top2Gap;
  int hidden_dim = 32;

  void validate() const;
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Hash of the canonical JSON dump; part of the reproducibility manifest.
  uint64_t config_hash() const;
};

struct GateTraceRow {
  int case_index = 0;
  int turn = 0;
  double delta = 0.0;
  double threshold = 0.0;
  bool warmup = false;
  PlannerChoice decision = PlannerChoice::PolicyLM;
};

struct CaseRecord {
  int case_index = 0;
  int turns = 0;
  bool success = false;
  std::optional<double> deal_price;
  double sl = 0.0;
  double final_reward = 0.0;
  int mcts_turns = 0;
  int policy_turns = 0;
  bool failed = false;
  std::string error;
};

nlohmann::json to_json(const CaseRecord& r);
CaseRecord case_record_from_json(const nlohmann::json& j);

struct MetricsReport {
  double at = 0.0;  // mean turns
  double sr = 0.0;  // success fraction
  double sl = 0.0;  // mean sale-to-list ratio (bargain tasks)
  int n_cases = 0;
  int n_failed = 0;
  double realized_mcts_ratio = 0.0;
  std::vector<CaseRecord> cases;
  CallCounterSnapshot cost;

  nlohmann::json to_json() const;
};

/// Aggregates AT/SR/SL and the realized MCTS ratio from per-case records
/// (failed cases count toward n_failed and are excluded).
MetricsReport aggregate_cases(std::vector<CaseRecord> cases);

struct EpisodeRun {
  Episode episode;
  CaseRecord record;
  std::vector<GateTraceRow> gate_trace;
  /// Per-turn MCTS search traces when cfg.mcts.collect_trace is on.
  std::vector<nlohmann::json> search_traces;
};

/// One evaluation episode under the configured planner. In Dual mode the
/// gate routes each turn; MCTS-planned turns consume the planner's cached
/// root exchange instead of stepping the environment again.
EpisodeRun run_episode(const RunConfig& cfg, const DialogueState& initial_state,
                       EnvSession& env, const PolicyModel& policy, GateState* gate,
                       int case_index);

struct EvalOutputs {
  MetricsReport report;
  std::vector<Episode> episodes;
  std::vector<GateTraceRow> gate_trace;
  std::vector<nlohmann::json> search_traces;
};

/// Runs n_eval_cases episodes (concurrently up to cfg.workers for
/// independent sessions) and aggregates the metrics. Per-case failures are
/// recorded and excluded from aggregates.
EvalOutputs run_eval(const RunConfig& cfg, const TaskSpec& task, const PolicyModel& policy,
                     const CaseFactory& cases, CallCounter& counter);

void write_cost_csv(std::ostream& out, const MetricsReport& report);
void write_gate_trace_csv(std::ostream& out, const std::vector<GateTraceRow>& rows);

/// Run manifest sufficient to replay a scripted-backend run bit-identically.
nlohmann::json make_manifest(const RunConfig& cfg, uint64_t checkpoint_hash);

/// Terminal chat probe: the planner picks strategies, the environment plays
/// the system role, and the human types the user turns on `in`. EOF ends
/// the session; the transcript persists as a stage-"chat" episode.
/// MCTS turns simulate against `planning` (the simulated user), never the
/// human; the human's actual reply then drives the acting step. System2 and
/// Dual modes therefore require a planning session.
Episode interactive_chat(const RunConfig& cfg, const TaskSpec& task,
                         const PolicyModel& policy, EnvSession& acting,
                         EnvSession* planning, const DialogueState& initial_state,
                         std::istream& in, std::ostream& out,
                         std::vector<GateTraceRow>* gate_trace = nullptr);

/// RoleBackend decorator replacing the user role with terminal input.
class HumanUserBackend final : public RoleBackend {
 public:
  HumanUserBackend(std::shared_ptr<RoleBackend> inner, std::istream& in, std::ostream& out);
  std::string system_respond(const DialogueState& state,
                             const std::string& instruction) override;
  std::string user_respond(const DialogueState& state) override;
  std::string critic_judge(const DialogueState& state, int sample_index) override;

 private:
  std::shared_ptr<RoleBackend> inner_;
  std::istream& in_;
  std::ostream& out_;
};

/// Raised by HumanUserBackend on EOF; callers end the episode gracefully.
struct SessionEnded : Error {
  using Error::Error;
};

}  // namespace dualplan
