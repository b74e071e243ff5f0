#include "dualplan/scripted_env.hpp"

#include "dualplan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dualplan {

int ScriptedSimSpec::phase_of(int action_index) const {
  if (effects.empty()) return 0;
  const int span = std::max(phase_length, 1);
  return (action_index / span) % phase_count();
}

double ScriptedSimSpec::hidden_score(std::span<const int> actions) const {
  double score = initial_score;
  for (size_t i = 0; i < actions.size(); ++i) {
    const auto& row = effects[static_cast<size_t>(phase_of(static_cast<int>(i)))];
    const int a = actions[i];
    if (a < 0 || a >= static_cast<int>(row.size())) {
      throw IndexOutOfRange("scripted action id out of range");
    }
    score += row[static_cast<size_t>(a)];
  }
  return score;
}

double ScriptedSimSpec::seller_ask(std::span<const int> actions) const {
  double ask = listed_price;
  for (const int a : actions) {
    if (a == counter_action) ask = std::max(seller_floor, ask - concession);
  }
  return ask;
}

int ScriptedSimSpec::band_of(double score, uint64_t jitter_key) const {
  for (size_t i = 0; i < band_edges.size(); ++i) {
    double edge = band_edges[i];
    if (noise > 0.0) {
      const uint64_t key = mix_seeds(mix_seeds(seed, jitter_key), i + 1);
      edge += noise * (2.0 * uniform01_from_hash(key) - 1.0);
    }
    if (score < edge) return static_cast<int>(i);
  }
  return static_cast<int>(band_edges.size());
}

void ScriptedSimSpec::validate() const {
  if (num_actions <= 0 || max_turns <= 0) {
    throw ConfigError("scripted spec needs positive action count and turn cap");
  }
  if (bargain) {
    if (!(listed_price > buyer_target) || !(buyer_target > 0.0)) {
      throw ConfigError("bargain spec needs listed > buyer_target > 0");
    }
    if (agree_action < 0 || agree_action >= num_actions) {
      throw ConfigError("bargain spec needs a valid agree action");
    }
    return;
  }
  if (effects.empty()) throw ConfigError("scripted spec needs at least one phase");
  for (const auto& row : effects) {
    if (static_cast<int>(row.size()) != num_actions) {
      throw ConfigError("effect rows must cover every action");
    }
  }
  if (band_verdicts.size() != band_edges.size() + 1) {
    throw ConfigError("need one verdict per band (edges + 1)");
  }
}

ScriptedSimSpec ScriptedSimSpec::builtin(TaskId task) {
  ScriptedSimSpec s;
  switch (task) {
    case TaskId::ESConv:
      s.num_actions = 8;
      s.max_turns = 8;
      s.initial_score = 0.0;
      s.effects = {
          {0.5, 0.25, 0.25, 2.0, -0.5, 0.25, 0.0, -1.0},
          {0.25, 0.0, 0.25, -0.5, 2.0, 0.5, 0.0, -1.0},
      };
      s.phase_length = 1;
      s.band_edges = {0.0, 1.0, 4.0};
      s.band_verdicts = {"feel worse", "feel the same", "feel better", "solved"};
      s.case_jitter = 1.0;
      return s;
    case TaskId::CIMA:
      s.num_actions = 5;
      s.max_turns = 8;
      s.initial_score = 0.0;
      s.effects = {
          {2.0, 0.5, -0.5, 0.25, -1.0},
          {-0.5, 0.25, 2.0, 0.5, -1.0},
      };
      s.phase_length = 1;
      s.band_edges = {0.0, 1.0, 3.0};
      s.band_verdicts = {"incorrect answer", "no answer", "partially correct", "correct"};
      s.case_jitter = 0.75;
      return s;
    case TaskId::CraigslistBargain:
      s.num_actions = 11;
      s.max_turns = 5;
      s.bargain = true;
      s.listed_price = 20.0;
      s.buyer_target = 10.0;
      s.seller_floor = 12.0;
      s.concession = 2.0;
      s.counter_action = 4;  // "Propose a counter price"
      s.agree_action = 9;    // "Agree with the proposal"
      s.case_jitter = 0.2;
      return s;
    case TaskId::Custom:
      throw ConfigError("no builtin scripted world for custom tasks");
  }
  throw ConfigError("unknown task id");
}

namespace {

uint64_t actions_key(std::span<const int> actions) {
  std::string bytes;
  bytes.reserve(actions.size() * 2 + 2);
  for (const int a : actions) {
    bytes.push_back(static_cast<char>('a' + (a % 26)));
    bytes.push_back(static_cast<char>('0' + (a / 26)));
  }
  return fnv1a(bytes);
}

std::string format_price(double price) {
  std::ostringstream out;
  out << '$';
  if (std::fabs(price - std::round(price)) < 1e-9) {
    out << static_cast<long long>(std::llround(price));
  } else {
    out << price;
  }
  return out.str();
}

}  // namespace

ScriptedBackend::ScriptedBackend(ScriptedSimSpec spec, StrategyCatalog catalog)
    : spec_(std::move(spec)), catalog_(std::move(catalog)) {
  spec_.validate();
}

std::string ScriptedBackend::system_respond(const DialogueState& state,
                                            const std::string& instruction) {
  const Strategy* strategy = catalog_.find_by_instruction(instruction);
  if (strategy == nullptr) {
    throw StepFailed("instruction does not belong to the catalog: " + instruction);
  }
  if (spec_.bargain) {
    const auto actions = state.system_strategies();
    const double ask = spec_.seller_ask(actions);
    if (strategy->id == spec_.agree_action) {
      return "Okay, deal at " + format_price(ask) + ".";
    }
    if (strategy->id == spec_.counter_action) {
      const double proposal = std::max(spec_.buyer_target, ask - spec_.concession);
      return "Could you do " + format_price(proposal) + "?";
    }
    return "About the " + (state.background.item_name.empty()
                               ? std::string("item")
                               : state.background.item_name) +
           ": " + strategy->name + ".";
  }
  return "I hear you. (" + strategy->name + ")";
}

std::string ScriptedBackend::user_respond(const DialogueState& state) {
  const auto actions = state.system_strategies();
  if (spec_.bargain) {
    const double ask = spec_.seller_ask(actions);
    if (!actions.empty() && actions.back() == spec_.agree_action) {
      return "Great, it is a deal at " + format_price(ask) + ".";
    }
    return "I can offer it for " + format_price(ask) + ".";
  }
  const double score = spec_.hidden_score(actions);
  const int band = spec_.band_of(score, actions_key(actions));
  const int phase = spec_.phase_of(static_cast<int>(actions.size()));
  std::ostringstream out;
  out << "We are in phase" << phase << " and my state is band" << band << " now.";
  return out.str();
}

std::string ScriptedBackend::critic_judge(const DialogueState& state, int sample_index) {
  const auto actions = state.system_strategies();
  if (spec_.bargain) {
    if (!actions.empty() && actions.back() == spec_.agree_action) {
      const double ask = spec_.seller_ask(actions);
      return "They have reached a deal at " + format_price(ask) + ".";
    }
    return "They have not reached a deal.";
  }
  const double score = spec_.hidden_score(actions);
  const uint64_t key = mix_seeds(actions_key(actions), static_cast<uint64_t>(sample_index));
  const int band = spec_.band_of(score, key);
  return spec_.band_verdicts[static_cast<size_t>(band)];
}

DialogueState scripted_initial_state(const ScriptedSimSpec& spec) {
  DialogueState state;
  if (spec.bargain) {
    state.background.item_name = "item";
    state.background.item_description = "a scripted listing";
    state.background.listed_price = spec.listed_price;
    state.background.buyer_target_price = spec.buyer_target;
    Utterance sys;
    sys.speaker = Speaker::System;
    sys.text = "Hi, how much is the " + state.background.item_name + "?";
    sys.turn_index = 0;
    Utterance usr;
    usr.speaker = Speaker::User;
    usr.text = "Hi, this is a good " + state.background.item_name +
               " and its price is " + format_price(spec.listed_price) + ".";
    usr.turn_index = 1;
    state.history = {std::move(sys), std::move(usr)};
    return state;
  }
  const int band = spec.band_of(spec.initial_score, 0);
  std::ostringstream text;
  text << "We are in phase0 and my state is band" << band << " now.";
  state.background.situation = text.str();
  Utterance opener;
  opener.speaker = Speaker::User;
  opener.text = text.str();
  opener.turn_index = 0;
  state.history = {std::move(opener)};
  return state;
}

ScriptedSimSpec jitter_case(const ScriptedSimSpec& base, uint64_t case_seed) {
  ScriptedSimSpec spec = base;
  spec.seed = mix_seeds(base.seed, case_seed);
  if (base.case_jitter > 0.0) {
    const double u = uniform01_from_hash(mix_seeds(spec.seed, 0xCA5E));
    if (base.bargain) {
      const double scale = 1.0 + base.case_jitter * (2.0 * u - 1.0);
      spec.listed_price = base.listed_price * scale;
      spec.buyer_target = base.buyer_target * scale;
      spec.seller_floor = base.seller_floor * scale;
    } else {
      spec.initial_score = base.initial_score + base.case_jitter * (2.0 * u - 1.0);
    }
  }
  return spec;
}

CaseFactory scripted_case_factory(ScriptedSimSpec base, StrategyCatalog catalog,
                                  uint64_t run_seed) {
  return [base = std::move(base), catalog = std::move(catalog),
          run_seed](int case_index) -> EpisodeContext {
    const auto spec = jitter_case(base, mix_seeds(run_seed, static_cast<uint64_t>(case_index)));
    EpisodeContext ctx;
    ctx.backend = std::make_shared<ScriptedBackend>(spec, catalog);
    ctx.initial_state = scripted_initial_state(spec);
    return ctx;
  };
}

}  // namespace dualplan
