// Command-line front end: pretrain, selfplay, eval, chat, score-dataset.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure (partial
// outputs are left in the output directory).

#include "dualplan/episode.hpp"
#include "dualplan/errors.hpp"
#include "dualplan/eval.hpp"
#include "dualplan/llm_env.hpp"
#include "dualplan/policy_model.hpp"
#include "dualplan/pretrain.hpp"
#include "dualplan/prompt_pack.hpp"
#include "dualplan/scripted_env.hpp"
#include "dualplan/selfplay.hpp"
#include "dualplan/task.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dualplan;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string task_name = "esconv";
  std::string backend = "scripted";
  std::string mode = "system1";
  double mcts_ratio = 0.5;
  std::string out_dir = "out";
  uint64_t seed = 0;
  std::string checkpoint;
  std::string prompt_dir;
  std::string cassette_path;
  int hidden_dim = 32;
  int workers = 1;
  json config = json::object();
};

void add_global_options(CLI::App* cmd, GlobalOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_option("--task", opt.task_name, "Task: esconv | cima | cb | custom");
  cmd->add_option("--backend", opt.backend, "Backend: scripted | llm | cassette");
  cmd->add_option("--mode", opt.mode, "Planner: system1 | system2 | dual");
  cmd->add_option("--mcts-ratio", opt.mcts_ratio, "Target MCTS fraction in dual mode");
  cmd->add_option("--out-dir", opt.out_dir, "Output directory");
  cmd->add_option("--seed", opt.seed, "Run seed");
  cmd->add_option("--checkpoint", opt.checkpoint, "Policy checkpoint to load");
  cmd->add_option("--prompt-dir", opt.prompt_dir, "Prompt pack root directory");
  cmd->add_option("--cassette", opt.cassette_path, "Cassette fixture for replay backend");
  cmd->add_option("--hidden-dim", opt.hidden_dim, "Hidden width for fresh models");
  cmd->add_option("--workers", opt.workers, "Concurrent evaluation workers");
}

/// Loads the config file; file values only fill in flags the user did not
/// pass on the active subcommand.
void finalize_options(GlobalOptions& opt, const CLI::App* active) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path);
  if (!in) throw ConfigError("cannot open config: " + opt.config_path);
  try {
    opt.config = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config json: ") + e.what());
  }
  const auto unset = [active](const char* name) {
    return active->get_option(name)->count() == 0;
  };
  if (unset("--task")) opt.task_name = opt.config.value("task", opt.task_name);
  if (opt.config.contains("eval")) {
    const auto& e = opt.config["eval"];
    if (unset("--backend")) opt.backend = e.value("backend", opt.backend);
    if (unset("--mode")) opt.mode = e.value("mode", opt.mode);
    if (unset("--mcts-ratio")) opt.mcts_ratio = e.value("mcts_ratio", opt.mcts_ratio);
    if (unset("--seed")) opt.seed = e.value("seed", opt.seed);
    if (unset("--hidden-dim")) opt.hidden_dim = e.value("hidden_dim", opt.hidden_dim);
    if (unset("--workers")) opt.workers = e.value("workers", opt.workers);
  }
  if (opt.cassette_path.empty()) opt.cassette_path = opt.config.value("cassette", "");
  if (opt.prompt_dir.empty()) opt.prompt_dir = opt.config.value("prompt_dir", "");
}

TaskSpec resolve_task(const GlobalOptions& opt) {
  if (opt.config.contains("task_spec")) return TaskSpec::from_json(opt.config["task_spec"]);
  const TaskId id = task_id_from_string(opt.task_name);
  if (id == TaskId::Custom) {
    throw ConfigError("custom tasks need a task_spec section in the config");
  }
  return TaskSpec::builtin(id);
}

LlmConfig resolve_llm_config(const GlobalOptions& opt) {
  LlmConfig cfg;
  if (opt.config.contains("llm")) {
    const auto& l = opt.config["llm"];
    cfg.endpoint = l.value("endpoint", cfg.endpoint);
    cfg.completion_path = l.value("completion_path", cfg.completion_path);
    cfg.model = l.value("model", cfg.model);
    cfg.temperature = l.value("temperature", cfg.temperature);
    cfg.api_key = l.value("api_key", cfg.api_key);
    cfg.max_retries = l.value("max_retries", cfg.max_retries);
    cfg.backoff_base_ms = l.value("backoff_base_ms", cfg.backoff_base_ms);
    cfg.timeout_s = l.value("timeout_s", cfg.timeout_s);
    cfg.trace = l.value("trace", cfg.trace);
  }
  return cfg;
}

ScriptedSimSpec resolve_scripted_spec(const GlobalOptions& opt, const TaskSpec& task) {
  ScriptedSimSpec spec = ScriptedSimSpec::builtin(task.id);
  spec.seed = opt.seed;
  if (opt.config.contains("scripted")) {
    const auto& s = opt.config["scripted"];
    spec.noise = s.value("noise", spec.noise);
    spec.case_jitter = s.value("case_jitter", spec.case_jitter);
    spec.initial_score = s.value("initial_score", spec.initial_score);
  }
  return spec;
}

std::vector<CaseBackground> read_cases_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cases file: " + path);
  std::vector<CaseBackground> cases;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    CaseBackground bg;
    bg.situation = j.value("situation", "");
    bg.emotion_type = j.value("emotion_type", "");
    bg.problem_type = j.value("problem_type", "");
    bg.exercise = j.value("exercise", "");
    bg.item_name = j.value("item_name", "");
    bg.item_description = j.value("item_description", "");
    bg.listed_price = j.value("listed_price", 0.0);
    bg.buyer_target_price = j.value("buyer_target_price", 0.0);
    cases.push_back(std::move(bg));
  }
  return cases;
}

/// Case provisioning for the configured backend. LLM/cassette backends read
/// case backgrounds from a JSONL file; the scripted backend synthesizes
/// per-case worlds from the run seed.
CaseFactory make_case_factory(const GlobalOptions& opt, const TaskSpec& task,
                              const std::string& cases_path) {
  if (opt.backend == "scripted") {
    return scripted_case_factory(resolve_scripted_spec(opt, task), task.catalog, opt.seed);
  }
  const fs::path prompt_root =
      opt.prompt_dir.empty() ? PromptPack::default_dir() : fs::path(opt.prompt_dir);
  const PromptPack pack = PromptPack::load(prompt_root, task.id);
  const LlmConfig llm_cfg = resolve_llm_config(opt);

  std::shared_ptr<ChatTransport> transport;
  if (opt.backend == "cassette") {
    if (opt.cassette_path.empty()) throw ConfigError("cassette backend needs --cassette");
    transport = std::make_shared<CassetteTransport>(opt.cassette_path);
  }
  // Fail fast on missing credentials, before any episode starts.
  auto backend = make_llm_backend(pack, llm_cfg, transport);

  if (cases_path.empty()) throw ConfigError("llm/cassette backends need --cases");
  auto cases = std::make_shared<std::vector<CaseBackground>>(read_cases_file(cases_path));
  if (cases->empty()) throw ConfigError("cases file is empty: " + cases_path);
  const TaskId id = task.id;
  return [backend, cases, id](int case_index) {
    const auto& bg = (*cases)[static_cast<size_t>(case_index) % cases->size()];
    return EpisodeContext{llm_initial_state(id, bg), backend};
  };
}

PolicyModel load_or_init_model(const GlobalOptions& opt, const TaskSpec& task) {
  PolicyModel model = make_policy_model(task, opt.hidden_dim, opt.seed);
  if (!opt.checkpoint.empty()) {
    model.params = load_checkpoint(opt.checkpoint);
    model.check_compatible(task.catalog);
  }
  return model;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

uint64_t checkpoint_hash_or_zero(const std::string& path) {
  return path.empty() ? 0 : file_hash(path);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_eval(const GlobalOptions& opt, const std::string& cases_path, int n_cases) {
  const TaskSpec task = resolve_task(opt);
  RunConfig cfg;
  cfg.task = task.id;
  cfg.mode = planner_mode_from_string(opt.mode);
  cfg.mcts_ratio = opt.mcts_ratio;
  cfg.checkpoint = opt.checkpoint;
  cfg.backend = opt.backend;
  cfg.n_eval_cases = n_cases;
  cfg.seed = opt.seed;
  cfg.workers = opt.workers;
  cfg.hidden_dim = opt.hidden_dim;
  if (opt.config.contains("eval") && opt.config["eval"].contains("mcts")) {
    const auto& m = opt.config["eval"]["mcts"];
    cfg.mcts.n_simulations = m.value("n_simulations", cfg.mcts.n_simulations);
    cfg.mcts.c_p = m.value("c_p", cfg.mcts.c_p);
    cfg.mcts.q0 = m.value("q0", cfg.mcts.q0);
    cfg.mcts.max_depth = m.value("max_depth", cfg.mcts.max_depth);
    cfg.mcts.collect_trace = m.value("collect_trace", cfg.mcts.collect_trace);
  }
  cfg.validate();

  const PolicyModel model = load_or_init_model(opt, task);
  const CaseFactory cases = make_case_factory(opt, task, cases_path);
  CallCounter counter;

  fs::create_directories(opt.out_dir);
  write_text_file(fs::path(opt.out_dir) / "manifest.json",
                  make_manifest(cfg, checkpoint_hash_or_zero(opt.checkpoint)).dump(2) + "\n");

  const EvalOutputs outputs = run_eval(cfg, task, model, cases, counter);

  write_text_file(fs::path(opt.out_dir) / "metrics.json",
                  outputs.report.to_json().dump(2) + "\n");
  {
    std::ofstream recs(fs::path(opt.out_dir) / "cases.jsonl");
    for (const auto& c : outputs.report.cases) recs << to_json(c).dump() << '\n';
  }
  write_episodes_jsonl_file((fs::path(opt.out_dir) / "episodes.jsonl").string(),
                            outputs.episodes);
  {
    std::ofstream cost(fs::path(opt.out_dir) / "cost.csv");
    write_cost_csv(cost, outputs.report);
  }
  if (cfg.mode == PlannerMode::Dual) {
    std::ofstream gate(fs::path(opt.out_dir) / "gate_trace.csv");
    write_gate_trace_csv(gate, outputs.gate_trace);
  }
  if (cfg.mcts.collect_trace && !outputs.search_traces.empty()) {
    std::ofstream traces(fs::path(opt.out_dir) / "search_trace.jsonl");
    for (const auto& t : outputs.search_traces) traces << t.dump() << '\n';
  }

  std::cout << "cases: " << outputs.report.n_cases << " (" << outputs.report.n_failed
            << " failed)\n"
            << "AT: " << outputs.report.at << "\nSR: " << outputs.report.sr << '\n';
  if (task.id == TaskId::CraigslistBargain) std::cout << "SL: " << outputs.report.sl << '\n';
  if (cfg.mode == PlannerMode::Dual) {
    std::cout << "realized MCTS ratio: " << outputs.report.realized_mcts_ratio << '\n';
  }
  std::cout << "call units: " << outputs.report.cost.total_units() << '\n';
  return outputs.report.n_failed == 0 ? 0 : 2;
}

/// Synthesizes logged dialogues by stepping the scripted world with a
/// mostly-greedy behavior policy; stands in for human-annotated transcripts
/// at desk scale.
std::vector<RawDialogue> synthesize_raw_dialogues(const GlobalOptions& opt,
                                                  const TaskSpec& task, int count) {
  if (opt.backend != "scripted") {
    throw ConfigError("--synthesize requires the scripted backend");
  }
  const ScriptedSimSpec base = resolve_scripted_spec(opt, task);
  std::vector<RawDialogue> out;
  std::mt19937_64 rng(mix_seeds(opt.seed, 0xDA7A));
  for (int i = 0; i < count; ++i) {
    const auto spec = jitter_case(base, mix_seeds(opt.seed, static_cast<uint64_t>(i)));
    ScriptedBackend backend(spec, task.catalog);
    DialogueState state = scripted_initial_state(spec);
    RawDialogue raw;
    raw.background = state.background;
    std::uniform_int_distribution<int> random_action(0, task.catalog.size() - 1);
    std::bernoulli_distribution explore(0.35);
    for (int turn = 0; turn < task.max_turns; ++turn) {
      int action = random_action(rng);
      if (!spec.bargain && !explore(rng)) {
        // Greedy step against the known effect table.
        const auto actions = state.system_strategies();
        const auto& row = spec.effects[static_cast<size_t>(
            spec.phase_of(static_cast<int>(actions.size())))];
        action = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      }
      const auto& strategy = task.catalog.at(action);
      const std::string sys = backend.system_respond(state, strategy.instruction);
      Utterance sys_u;
      sys_u.speaker = Speaker::System;
      sys_u.text = sys;
      sys_u.strategy = action;
      DialogueState with_sys = state;
      with_sys.history.push_back(sys_u);
      const std::string usr = backend.user_respond(with_sys);
      Utterance usr_u;
      usr_u.speaker = Speaker::User;
      usr_u.text = usr;
      state = state.advanced(sys_u, usr_u);
      raw.turns.push_back({action, sys, usr});
      const std::string verdict = backend.critic_judge(state, 0);
      if (!spec.bargain &&
          map_verdicts_to_reward(std::vector<std::string>{verdict}, task.reward_map) >=
              task.reward_map.success_score) {
        break;
      }
      if (spec.bargain && extract_deal(verdict).has_value()) break;
    }
    out.push_back(std::move(raw));
  }
  return out;
}

int cmd_score_dataset(const GlobalOptions& opt, const std::string& input_path,
                      const std::string& output_path, int synthesize) {
  const TaskSpec task = resolve_task(opt);
  std::vector<RawDialogue> raw;
  if (synthesize > 0) {
    raw = synthesize_raw_dialogues(opt, task, synthesize);
  } else {
    std::ifstream in(input_path);
    if (!in) throw IoError("cannot open raw transcripts: " + input_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      RawDialogue d;
      const auto& bg = j.at("background");
      d.background.situation = bg.value("situation", "");
      d.background.emotion_type = bg.value("emotion_type", "");
      d.background.problem_type = bg.value("problem_type", "");
      d.background.exercise = bg.value("exercise", "");
      d.background.item_name = bg.value("item_name", "");
      d.background.item_description = bg.value("item_description", "");
      d.background.listed_price = bg.value("listed_price", 0.0);
      d.background.buyer_target_price = bg.value("buyer_target_price", 0.0);
      for (const auto& t : j.at("turns")) {
        d.turns.push_back({t.at("action").get<int>(), t.at("system_text").get<std::string>(),
                           t.at("user_text").get<std::string>()});
      }
      raw.push_back(std::move(d));
    }
  }

  const CaseFactory cases = make_case_factory(opt, task, "");
  CallCounter counter;
  // Scoring runs against the first case's backend session (the critic only).
  EnvSession session(cases(0).backend, task, &counter);
  const PretrainVariant variant = task.id == TaskId::CIMA ? PretrainVariant::Bootstrapped
                                                          : PretrainVariant::FullReturn;
  const ScoredDataset scored = score_dataset(raw, session, variant);

  fs::create_directories(fs::path(output_path).parent_path().empty()
                             ? "."
                             : fs::path(output_path).parent_path().string());
  std::vector<Episode> episodes = scored.episodes;
  if (variant == PretrainVariant::Bootstrapped) {
    // Persist snippet transitions as single-transition episodes.
    for (const auto& t : scored.transitions) {
      Episode e;
      e.task = task.id;
      e.stage = "pretrain";
      e.turns = 1;
      e.success = false;
      e.transitions = {t};
      episodes.push_back(std::move(e));
    }
  }
  write_episodes_jsonl_file(output_path, episodes);
  std::cout << "scored " << episodes.size() << " records (" << scored.skipped
            << " skipped), critic samples: " << counter.snapshot().training.critic_samples
            << '\n';
  return 0;
}

int cmd_pretrain(const GlobalOptions& opt, const std::string& data_path,
                 const std::string& val_path, int synthesize) {
  const TaskSpec task = resolve_task(opt);
  PretrainConfig cfg = PretrainConfig::defaults(task.id);
  cfg.gamma = task.gamma;
  cfg.seed = opt.seed;
  if (opt.config.contains("pretrain")) {
    const auto& p = opt.config["pretrain"];
    cfg.lambda1 = p.value("lambda1", cfg.lambda1);
    cfg.epochs = p.value("epochs", cfg.epochs);
    cfg.batch_size = p.value("batch_size", cfg.batch_size);
    cfg.learning_rate = p.value("learning_rate", cfg.learning_rate);
    if (p.contains("variant")) {
      cfg.variant = p["variant"] == "bootstrapped" ? PretrainVariant::Bootstrapped
                                                   : PretrainVariant::FullReturn;
    }
    cfg.flip_policy_coefficient = p.value("flip_policy_coefficient", false);
  }

  auto load_scored = [&](const std::string& path) {
    ScoredDataset ds;
    ds.variant = cfg.variant;
    if (path.empty()) return ds;
    for (auto& e : read_episodes_jsonl_file(path)) {
      if (cfg.variant == PretrainVariant::FullReturn) {
        ds.episodes.push_back(std::move(e));
      } else {
        for (auto& t : e.transitions) ds.transitions.push_back(std::move(t));
      }
    }
    return ds;
  };

  ScoredDataset dataset;
  if (synthesize > 0) {
    const auto raw = synthesize_raw_dialogues(opt, task, synthesize);
    const CaseFactory cases = make_case_factory(opt, task, "");
    CallCounter counter;
    EnvSession session(cases(0).backend, task, &counter);
    dataset = score_dataset(raw, session, cfg.variant);
  } else {
    dataset = load_scored(data_path);
  }
  ScoredDataset validation = load_scored(val_path);
  if (validation.empty()) {
    // Hold out a fifth of the data so best-on-validation checkpointing works.
    const size_t held = dataset.size() / 5;
    validation.variant = cfg.variant;
    for (size_t i = 0; i < held; ++i) {
      if (cfg.variant == PretrainVariant::FullReturn) {
        validation.episodes.push_back(std::move(dataset.episodes.back()));
        dataset.episodes.pop_back();
      } else {
        validation.transitions.push_back(std::move(dataset.transitions.back()));
        dataset.transitions.pop_back();
      }
    }
  }

  PolicyModel model = load_or_init_model(opt, task);
  const TrainReport report = run_pretraining(model, dataset, cfg, validation, task.catalog);

  fs::create_directories(opt.out_dir);
  write_text_file(fs::path(opt.out_dir) / "manifest.json",
                  json{{"command", "pretrain"},
                       {"seed", opt.seed},
                       {"config_hash", fnv1a(opt.config.dump())},
                       {"checkpoint_hash", checkpoint_hash_or_zero(opt.checkpoint)}}
                          .dump(2) +
                      "\n");
  {
    std::ofstream hist(fs::path(opt.out_dir) / "pretrain_history.csv");
    write_history_csv(hist, report.history);
  }
  PolicyModel best = model;
  best.params = report.best_params;
  save_checkpoint(best.params, fs::path(opt.out_dir) / "pretrain_best.ckpt.json");
  save_checkpoint(model.params, fs::path(opt.out_dir) / "pretrain_final.ckpt.json");
  std::cout << "epochs: " << report.history.size() << ", best val metric: "
            << report.best_metric << (report.aborted ? " (aborted on NaN)" : "") << '\n';
  return report.aborted ? 2 : 0;
}

int cmd_selfplay(const GlobalOptions& opt, const std::string& cases_path) {
  const TaskSpec task = resolve_task(opt);
  SelfPlayConfig cfg = SelfPlayConfig::defaults(task.id);
  cfg.gamma = task.gamma;
  cfg.seed = opt.seed;
  if (opt.config.contains("selfplay")) {
    const auto& s = opt.config["selfplay"];
    cfg.lambda2 = s.value("lambda2", cfg.lambda2);
    cfg.epochs = s.value("epochs", cfg.epochs);
    cfg.episodes_per_epoch = s.value("episodes_per_epoch", cfg.episodes_per_epoch);
    cfg.learning_rate = s.value("learning_rate", cfg.learning_rate);
    cfg.episodes_per_update = s.value("episodes_per_update", cfg.episodes_per_update);
    if (s.contains("mcts")) {
      const auto& m = s["mcts"];
      cfg.mcts.n_simulations = m.value("n_simulations", cfg.mcts.n_simulations);
      cfg.mcts.c_p = m.value("c_p", cfg.mcts.c_p);
      cfg.mcts.q0 = m.value("q0", cfg.mcts.q0);
      cfg.mcts.max_depth = m.value("max_depth", cfg.mcts.max_depth);
    }
  }

  PolicyModel model = load_or_init_model(opt, task);
  const CaseFactory cases = make_case_factory(opt, task, cases_path);
  CallCounter counter;
  const SelfPlayReport report = run_selfplay_training(model, cases, task, cfg, &counter);

  fs::create_directories(opt.out_dir);
  write_text_file(fs::path(opt.out_dir) / "manifest.json",
                  json{{"command", "selfplay"},
                       {"seed", opt.seed},
                       {"config_hash", fnv1a(opt.config.dump())},
                       {"checkpoint_hash", checkpoint_hash_or_zero(opt.checkpoint)}}
                          .dump(2) +
                      "\n");
  {
    std::ofstream hist(fs::path(opt.out_dir) / "selfplay_history.csv");
    write_selfplay_csv(hist, report.history);
  }
  write_episodes_jsonl_file((fs::path(opt.out_dir) / "selfplay_episodes.jsonl").string(),
                            report.episodes);
  save_checkpoint(model.params, fs::path(opt.out_dir) / "selfplay_final.ckpt.json");
  save_checkpoint(report.best_params, fs::path(opt.out_dir) / "selfplay_best.ckpt.json");
  std::cout << "epochs: " << report.history.size()
            << ", best epoch SR: " << report.best_metric
            << ", call units: " << counter.snapshot().total_units()
            << (report.aborted ? " (aborted on NaN)" : "") << '\n';
  return report.aborted ? 2 : 0;
}

int cmd_chat(const GlobalOptions& opt) {
  const TaskSpec task = resolve_task(opt);
  RunConfig cfg;
  cfg.task = task.id;
  cfg.mode = planner_mode_from_string(opt.mode);
  cfg.mcts_ratio = opt.mcts_ratio;
  cfg.seed = opt.seed;
  cfg.backend = opt.backend;
  cfg.hidden_dim = opt.hidden_dim;
  cfg.validate();

  const PolicyModel model = load_or_init_model(opt, task);
  const CaseFactory cases = make_case_factory(opt, task, "");
  const EpisodeContext ctx = cases(0);
  auto human = std::make_shared<HumanUserBackend>(ctx.backend, std::cin, std::cout);
  CallCounter counter;
  EnvSession acting(human, task, &counter);
  EnvSession planning(ctx.backend, task, &counter);  // simulated user for MCTS turns

  std::vector<GateTraceRow> gate_trace;
  const Episode episode = interactive_chat(cfg, task, model, acting, &planning,
                                           ctx.initial_state, std::cin, std::cout,
                                           cfg.mode == PlannerMode::Dual ? &gate_trace
                                                                         : nullptr);
  fs::create_directories(opt.out_dir);
  {
    std::ofstream log(fs::path(opt.out_dir) / "chat_episodes.jsonl", std::ios::app);
    append_episode_jsonl(log, episode);
  }
  if (cfg.mode == PlannerMode::Dual) {
    std::ofstream gate(fs::path(opt.out_dir) / "chat_gate_trace.csv");
    write_gate_trace_csv(gate, gate_trace);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-process dialogue planner: a fast learned policy and a slow "
               "MCTS planner coupled by an uncertainty gate"};
  app.require_subcommand(1);

  GlobalOptions opt;
  std::string cases_path;
  std::string data_path;
  std::string val_path;
  std::string raw_path;
  std::string scored_out = "scored.jsonl";
  int n_cases = 50;
  int synthesize = 0;

  auto* eval_cmd = app.add_subcommand("eval", "Run evaluation episodes and report AT/SR/SL");
  add_global_options(eval_cmd, opt);
  eval_cmd->add_option("--cases", cases_path, "JSONL case backgrounds (llm/cassette)");
  eval_cmd->add_option("--n-cases", n_cases, "Number of evaluation cases");

  auto* pretrain_cmd = app.add_subcommand("pretrain", "Offline pretraining from scored episodes");
  add_global_options(pretrain_cmd, opt);
  pretrain_cmd->add_option("--data", data_path, "Scored episodes JSONL");
  pretrain_cmd->add_option("--val", val_path, "Validation episodes JSONL");
  pretrain_cmd->add_option("--synthesize", synthesize,
                           "Generate N scripted dialogues instead of --data");

  auto* selfplay_cmd = app.add_subcommand("selfplay", "MCTS-guided self-play training");
  add_global_options(selfplay_cmd, opt);
  selfplay_cmd->add_option("--cases", cases_path, "JSONL case backgrounds (llm/cassette)");

  auto* chat_cmd = app.add_subcommand("chat", "Interactive session with you as the user");
  add_global_options(chat_cmd, opt);

  auto* score_cmd = app.add_subcommand("score-dataset", "Critic-score raw transcripts");
  add_global_options(score_cmd, opt);
  score_cmd->add_option("--input", raw_path, "Raw transcripts JSONL");
  score_cmd->add_option("--output", scored_out, "Scored episodes JSONL output");
  score_cmd->add_option("--synthesize", synthesize, "Generate N scripted dialogues instead");

  CLI11_PARSE(app, argc, argv);

  try {
    const CLI::App* active = app.get_subcommands().front();
    finalize_options(opt, active);
    if (eval_cmd->parsed()) return cmd_eval(opt, cases_path, n_cases);
    if (pretrain_cmd->parsed()) return cmd_pretrain(opt, data_path, val_path, synthesize);
    if (selfplay_cmd->parsed()) return cmd_selfplay(opt, cases_path);
    if (chat_cmd->parsed()) return cmd_chat(opt);
    if (score_cmd->parsed()) return cmd_score_dataset(opt, raw_path, scored_out, synthesize);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
