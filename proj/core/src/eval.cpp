#include "dualplan/eval.hpp"

#include "dualplan/errors.hpp"
#include "dualplan/hashing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

namespace dualplan {

using nlohmann::json;

std::string to_string(PlannerMode mode) {
  switch (mode) {
    case PlannerMode::System1: return "system1";
    case PlannerMode::System2: return "system2";
    case PlannerMode::Dual: return "dual";
  }
  return "system1";
}

PlannerMode planner_mode_from_string(const std::string& name) {
  if (name == "system1") return PlannerMode::System1;
  if (name == "system2") return PlannerMode::System2;
  if (name == "dual") return PlannerMode::Dual;
  throw ConfigError("unknown planner mode: " + name);
}

void RunConfig::validate() const {
  if (mode == PlannerMode::Dual && (mcts_ratio < 0.0 || mcts_ratio > 1.0)) {
    throw ConfigError("dual mode needs a target MCTS ratio in [0, 1]");
  }
  if (n_eval_cases < 0) throw ConfigError("n_eval_cases must be non-negative");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (backend != "scripted" && backend != "llm" && backend != "cassette") {
    throw ConfigError("unknown backend: " + backend);
  }
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("task")) cfg.task = task_id_from_string(j["task"].get<std::string>());
  if (j.contains("mode")) cfg.mode = planner_mode_from_string(j["mode"].get<std::string>());
  cfg.mcts_ratio = j.value("mcts_ratio", cfg.mcts_ratio);
  if (j.contains("mcts")) {
    const auto& m = j["mcts"];
    cfg.mcts.n_simulations = m.value("n_simulations", cfg.mcts.n_simulations);
    cfg.mcts.c_p = m.value("c_p", cfg.mcts.c_p);
    cfg.mcts.q0 = m.value("q0", cfg.mcts.q0);
    cfg.mcts.max_depth = m.value("max_depth", cfg.mcts.max_depth);
  }
  cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
  cfg.backend = j.value("backend", cfg.backend);
  cfg.n_eval_cases = j.value("n_eval_cases", cfg.n_eval_cases);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.gate_min_samples = j.value("gate_min_samples", cfg.gate_min_samples);
  if (j.value("gate_measure", "top2_gap") == "neg_entropy") {
    cfg.gate_measure = UncertaintyMeasure::NegEntropy;
  }
  cfg.shared_gate = j.value("shared_gate", cfg.shared_gate);
  cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
  cfg.validate();
  return cfg;
}

json RunConfig::to_json() const {
  return json{{"task", ::dualplan::to_string(task)},
              {"mode", ::dualplan::to_string(mode)},
              {"mcts_ratio", mcts_ratio},
              {"mcts",
               {{"n_simulations", mcts.n_simulations},
                {"c_p", mcts.c_p},
                {"q0", mcts.q0},
                {"max_depth", mcts.max_depth}}},
              {"checkpoint", checkpoint},
              {"backend", backend},
              {"n_eval_cases", n_eval_cases},
              {"seed", seed},
              {"workers", workers},
              {"gate_min_samples", gate_min_samples},
              {"gate_measure",
               gate_measure == UncertaintyMeasure::NegEntropy ? "neg_entropy" : "top2_gap"},
              {"shared_gate", shared_gate},
              {"hidden_dim", hidden_dim}};
}

uint64_t RunConfig::config_hash() const { return fnv1a(to_json().dump()); }

json to_json(const CaseRecord& r) {
  json j{{"case_index", r.case_index}, {"turns", r.turns},
         {"success", r.success},       {"sl", r.sl},
         {"final_reward", r.final_reward},
         {"mcts_turns", r.mcts_turns}, {"policy_turns", r.policy_turns},
         {"failed", r.failed},         {"error", r.error}};
  j["deal_price"] = r.deal_price.has_value() ? json(*r.deal_price) : json(nullptr);
  return j;
}

CaseRecord case_record_from_json(const json& j) {
  CaseRecord r;
  r.case_index = j.at("case_index").get<int>();
  r.turns = j.at("turns").get<int>();
  r.success = j.at("success").get<bool>();
  if (j.contains("deal_price") && !j["deal_price"].is_null()) {
    r.deal_price = j["deal_price"].get<double>();
  }
  r.sl = j.at("sl").get<double>();
  r.final_reward = j.value("final_reward", 0.0);
  r.mcts_turns = j.at("mcts_turns").get<int>();
  r.policy_turns = j.at("policy_turns").get<int>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.value("error", "");
  return r;
}

json MetricsReport::to_json() const {
  json cases_json = json::array();
  for (const auto& c : cases) cases_json.push_back(::dualplan::to_json(c));
  auto phase = [](const PhaseCounts& p) {
    return json{{"system", p.system},
                {"user", p.user},
                {"critic_units", p.critic_units},
                {"critic_samples", p.critic_samples},
                {"units", p.units()}};
  };
  return json{{"at", at},
              {"sr", sr},
              {"sl", sl},
              {"n_cases", n_cases},
              {"n_failed", n_failed},
              {"realized_mcts_ratio", realized_mcts_ratio},
              {"cost",
               {{"acting", phase(cost.acting)},
                {"mcts", phase(cost.mcts)},
                {"training", phase(cost.training)},
                {"total_units", cost.total_units()}}},
              {"cases", std::move(cases_json)}};
}

MetricsReport aggregate_cases(std::vector<CaseRecord> cases) {
  MetricsReport report;
  report.cases = std::move(cases);
  long turns = 0;
  long successes = 0;
  double sl_sum = 0.0;
  long mcts_turns = 0;
  long policy_turns = 0;
  int ok_cases = 0;
  for (const auto& c : report.cases) {
    if (c.failed) {
      ++report.n_failed;
      continue;
    }
    ++ok_cases;
    turns += c.turns;
    successes += c.success ? 1 : 0;
    sl_sum += c.sl;
    mcts_turns += c.mcts_turns;
    policy_turns += c.policy_turns;
  }
  report.n_cases = ok_cases;
  if (ok_cases > 0) {
    report.at = static_cast<double>(turns) / ok_cases;
    report.sr = static_cast<double>(successes) / ok_cases;
    report.sl = sl_sum / ok_cases;
  }
  const long planned = mcts_turns + policy_turns;
  report.realized_mcts_ratio =
      planned == 0 ? 0.0 : static_cast<double>(mcts_turns) / static_cast<double>(planned);
  return report;
}

EpisodeRun run_episode(const RunConfig& cfg, const DialogueState& initial_state,
                       EnvSession& env, const PolicyModel& policy, GateState* gate,
                       int case_index) {
  const auto& task = env.task();
  EpisodeRun run;
  run.record.case_index = case_index;
  run.episode.task = task.id;
  run.episode.stage = "eval";

  DialogueState state = initial_state;
  while (state.turn < task.max_turns) {
    PlannerChoice choice = PlannerChoice::PolicyLM;
    if (cfg.mode == PlannerMode::System2) {
      choice = PlannerChoice::Mcts;
    } else if (cfg.mode == PlannerMode::Dual) {
      const auto dist = policy.distribution(state, task.catalog);
      const GateDecision decision = gate_decide(*gate, dist);
      choice = decision.choice;
      run.gate_trace.push_back({case_index, state.turn, decision.delta,
                                decision.threshold, decision.warmup, decision.choice});
    }

    Transition t;
    if (choice == PlannerChoice::Mcts) {
      PlanOutcome plan = mcts_plan(state, policy, env, cfg.mcts);
      t.state = state;
      t.action = plan.action;
      t.reward = plan.reward;
      t.next_state = plan.next_state;
      t.done = plan.done;
      t.verdicts = plan.verdicts;
      t.planner = PlannerTag::Mcts;
      if (plan.deal_price.has_value()) run.episode.deal_price = plan.deal_price;
      run.episode.success = plan.success;
      run.record.mcts_turns += 1;
      if (plan.trace.has_value()) {
        (*plan.trace)["case_index"] = case_index;
        (*plan.trace)["turn"] = state.turn;
        run.search_traces.push_back(std::move(*plan.trace));
      }
    } else {
      const int action = policy.greedy_action(state, task.catalog);
      t = env.step(state, task.catalog.at(action));
      t.planner = PlannerTag::Policy;
      run.episode.success = transition_success(t, task);
      if (const auto deal = transition_deal(t, task)) run.episode.deal_price = deal;
      run.record.policy_turns += 1;
    }
    run.record.final_reward = t.reward;
    state = t.next_state;
    const bool done = t.done;
    run.episode.transitions.push_back(std::move(t));
    if (done) break;
  }
  run.episode.turns = static_cast<int>(run.episode.transitions.size());
  run.record.turns = run.episode.turns;
  run.record.success = run.episode.success;
  run.record.deal_price = run.episode.deal_price;
  const auto& bg = initial_state.background;
  if (bg.listed_price > bg.buyer_target_price && bg.buyer_target_price > 0.0) {
    run.record.sl = compute_sl(run.episode.deal_price, bg.listed_price, bg.buyer_target_price);
  }
  return run;
}

EvalOutputs run_eval(const RunConfig& cfg, const TaskSpec& task, const PolicyModel& policy,
                     const CaseFactory& cases, CallCounter& counter) {
  cfg.validate();
  policy.check_compatible(task.catalog);

  EvalOutputs out;
  const int n = cfg.n_eval_cases;
  std::vector<EpisodeRun> runs(static_cast<size_t>(n));
  std::vector<char> ok(static_cast<size_t>(n), 0);

  GateState shared_gate(cfg.mcts_ratio, mix_seeds(cfg.seed, 0x6a7e), cfg.gate_min_samples,
                        cfg.gate_measure);
  std::mutex shared_gate_mutex;

  std::atomic<int> next_case{0};
  auto worker = [&] {
    for (;;) {
      const int i = next_case.fetch_add(1);
      if (i >= n) return;
      EpisodeRun run;
      run.record.case_index = i;
      try {
        const EpisodeContext ctx = cases(i);
        EnvSession session(ctx.backend, task, &counter);
        if (cfg.mode == PlannerMode::Dual && cfg.shared_gate) {
          // Serialized shared gate: decision order follows case completion.
          std::lock_guard<std::mutex> lock(shared_gate_mutex);
          run = run_episode(cfg, ctx.initial_state, session, policy, &shared_gate, i);
        } else {
          GateState gate(cfg.mcts_ratio, mix_seeds(cfg.seed, static_cast<uint64_t>(i)),
                         cfg.gate_min_samples, cfg.gate_measure);
          run = run_episode(cfg, ctx.initial_state, session, policy, &gate, i);
        }
        ok[static_cast<size_t>(i)] = 1;
      } catch (const Error& e) {
        run.record.failed = true;
        run.record.error = e.what();
      }
      runs[static_cast<size_t>(i)] = std::move(run);
    }
  };

  if (cfg.workers <= 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int nthreads = std::min(cfg.workers, n);
    pool.reserve(static_cast<size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<CaseRecord> records;
  records.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& run = runs[static_cast<size_t>(i)];
    records.push_back(run.record);
    if (ok[static_cast<size_t>(i)]) {
      out.episodes.push_back(std::move(run.episode));
      out.gate_trace.insert(out.gate_trace.end(), run.gate_trace.begin(),
                            run.gate_trace.end());
      for (auto& trace : run.search_traces) out.search_traces.push_back(std::move(trace));
    }
  }
  out.report = aggregate_cases(std::move(records));
  out.report.cost = counter.snapshot();
  return out;
}

void write_cost_csv(std::ostream& out, const MetricsReport& report) {
  out << "phase,system,user,critic_units,critic_samples,units\n";
  auto row = [&out](const char* name, const PhaseCounts& p) {
    out << name << ',' << p.system << ',' << p.user << ',' << p.critic_units << ','
        << p.critic_samples << ',' << p.units() << '\n';
  };
  row("acting", report.cost.acting);
  row("mcts", report.cost.mcts);
  row("training", report.cost.training);
  row("total", report.cost.total());
  if (report.n_cases > 0) {
    out << "units_per_case," << ",,,,"
        << static_cast<double>(report.cost.total_units()) / report.n_cases << '\n';
  }
}

void write_gate_trace_csv(std::ostream& out, const std::vector<GateTraceRow>& rows) {
  out << "case,turn,delta,threshold,warmup,decision\n";
  for (const auto& r : rows) {
    out << r.case_index << ',' << r.turn << ',' << r.delta << ',' << r.threshold << ','
        << (r.warmup ? 1 : 0) << ','
        << (r.decision == PlannerChoice::Mcts ? "mcts" : "policy") << '\n';
  }
}

json make_manifest(const RunConfig& cfg, uint64_t checkpoint_hash) {
  return json{{"seed", cfg.seed},
              {"config", cfg.to_json()},
              {"config_hash", cfg.config_hash()},
              {"checkpoint_hash", checkpoint_hash}};
}

HumanUserBackend::HumanUserBackend(std::shared_ptr<RoleBackend> inner, std::istream& in,
                                   std::ostream& out)
    : inner_(std::move(inner)), in_(in), out_(out) {}

std::string HumanUserBackend::system_respond(const DialogueState& state,
                                             const std::string& instruction) {
  return inner_->system_respond(state, instruction);
}

std::string HumanUserBackend::user_respond(const DialogueState& state) {
  if (const Utterance* sys = state.last_system()) {
    out_ << "system> " << sys->text << '\n';
  }
  out_ << "you> " << std::flush;
  std::string line;
  if (!std::getline(in_, line) || line == "/quit") {
    throw SessionEnded("end of interactive session");
  }
  if (line.empty()) line = "(silence)";
  return line;
}

std::string HumanUserBackend::critic_judge(const DialogueState& state, int sample_index) {
  return inner_->critic_judge(state, sample_index);
}

Episode interactive_chat(const RunConfig& cfg, const TaskSpec& task,
                         const PolicyModel& policy, EnvSession& acting,
                         EnvSession* planning, const DialogueState& initial_state,
                         std::istream& in, std::ostream& out,
                         std::vector<GateTraceRow>* gate_trace) {
  (void)in;  // the human backend owns the stream; kept for call-site clarity
  if (cfg.mode != PlannerMode::System1 && planning == nullptr) {
    throw ConfigError("system2/dual chat needs a planning session with a simulated user");
  }
  Episode episode;
  episode.task = task.id;
  episode.stage = "chat";
  GateState gate(cfg.mcts_ratio, mix_seeds(cfg.seed, 0xC4A7), cfg.gate_min_samples,
                 cfg.gate_measure);

  DialogueState state = initial_state;
  for (const auto& u : state.history) {
    out << (u.speaker == Speaker::System ? "system> " : "user> ") << u.text << '\n';
  }
  while (state.turn < task.max_turns) {
    PlannerChoice choice = cfg.mode == PlannerMode::System2 ? PlannerChoice::Mcts
                                                            : PlannerChoice::PolicyLM;
    if (cfg.mode == PlannerMode::Dual) {
      const auto dist = policy.distribution(state, task.catalog);
      const GateDecision decision = gate_decide(gate, dist);
      choice = decision.choice;
      if (gate_trace != nullptr) {
        gate_trace->push_back({0, state.turn, decision.delta, decision.threshold,
                               decision.warmup, decision.choice});
      }
    }
    Transition t;
    try {
      int action;
      if (choice == PlannerChoice::Mcts) {
        // Deliberate against the simulated user, then play the chosen
        // strategy against the real one.
        action = mcts_plan(state, policy, *planning, cfg.mcts).action;
      } else {
        action = policy.greedy_action(state, task.catalog);
      }
      out << "[strategy: " << task.catalog.at(action).name << "]\n";
      t = acting.step(state, task.catalog.at(action));
      t.planner = choice == PlannerChoice::Mcts ? PlannerTag::Mcts : PlannerTag::Policy;
      episode.success = transition_success(t, task);
      if (const auto deal = transition_deal(t, task)) episode.deal_price = deal;
    } catch (const SessionEnded&) {
      break;
    }
    state = t.next_state;
    const bool done = t.done;
    episode.transitions.push_back(std::move(t));
    if (done) break;
  }
  episode.turns = static_cast<int>(episode.transitions.size());
  out << "[session over: " << episode.turns << " turns, "
      << (episode.success ? "goal reached" : "goal not reached") << "]\n";
  return episode;
}

}  // namespace dualplan
