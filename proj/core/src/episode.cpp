#include "dualplan/episode.hpp"

#include "dualplan/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace dualplan {

using nlohmann::json;

std::string to_string(PlannerTag tag) {
  switch (tag) {
    case PlannerTag::Policy: return "policy";
    case PlannerTag::Mcts: return "mcts";
    case PlannerTag::Human: return "human";
  }
  return "policy";
}

PlannerTag planner_tag_from_string(const std::string& name) {
  if (name == "policy") return PlannerTag::Policy;
  if (name == "mcts") return PlannerTag::Mcts;
  if (name == "human") return PlannerTag::Human;
  throw ParseFailure("unknown planner tag: " + name);
}

double cumulative_return(const Episode& episode, int t, double gamma) {
  const int n = static_cast<int>(episode.transitions.size());
  if (t < 1 || t > n) {
    throw IndexOutOfRange("turn " + std::to_string(t) + " outside episode of " +
                          std::to_string(n) + " transitions");
  }
  double value = 0.0;
  double discount = 1.0;
  for (int k = t; k <= n; ++k) {
    value += discount * episode.transitions[static_cast<size_t>(k - 1)].reward;
    discount *= gamma;
  }
  return value;
}

namespace {

json background_to_json(const CaseBackground& b) {
  return json{{"situation", b.situation},
              {"emotion_type", b.emotion_type},
              {"problem_type", b.problem_type},
              {"exercise", b.exercise},
              {"item_name", b.item_name},
              {"item_description", b.item_description},
              {"listed_price", b.listed_price},
              {"buyer_target_price", b.buyer_target_price}};
}

CaseBackground background_from_json(const json& j) {
  CaseBackground b;
  b.situation = j.value("situation", "");
  b.emotion_type = j.value("emotion_type", "");
  b.problem_type = j.value("problem_type", "");
  b.exercise = j.value("exercise", "");
  b.item_name = j.value("item_name", "");
  b.item_description = j.value("item_description", "");
  b.listed_price = j.value("listed_price", 0.0);
  b.buyer_target_price = j.value("buyer_target_price", 0.0);
  return b;
}

json utterance_to_json(const Utterance& u) {
  json j{{"speaker", u.speaker == Speaker::System ? "system" : "user"},
         {"text", u.text},
         {"turn_index", u.turn_index}};
  if (u.strategy.has_value()) j["strategy"] = *u.strategy;
  return j;
}

Utterance utterance_from_json(const json& j) {
  Utterance u;
  const std::string speaker = j.at("speaker").get<std::string>();
  if (speaker == "system") {
    u.speaker = Speaker::System;
  } else if (speaker == "user") {
    u.speaker = Speaker::User;
  } else {
    throw ParseFailure("unknown speaker: " + speaker);
  }
  u.text = j.at("text").get<std::string>();
  u.turn_index = j.at("turn_index").get<int>();
  if (j.contains("strategy") && !j["strategy"].is_null()) {
    u.strategy = j["strategy"].get<int>();
  }
  return u;
}

json transition_to_json(const Transition& t) {
  return json{{"state", to_json(t.state)},
              {"action", t.action},
              {"reward", t.reward},
              {"next_state", to_json(t.next_state)},
              {"done", t.done},
              {"verdicts", t.verdicts},
              {"planner", to_string(t.planner)}};
}

Transition transition_from_json(const json& j) {
  Transition t;
  t.state = dialogue_state_from_json(j.at("state"));
  t.action = j.at("action").get<int>();
  t.reward = j.at("reward").get<double>();
  t.next_state = dialogue_state_from_json(j.at("next_state"));
  t.done = j.at("done").get<bool>();
  t.verdicts = j.at("verdicts").get<std::vector<std::string>>();
  t.planner = planner_tag_from_string(j.value("planner", "policy"));
  return t;
}

}  // namespace

json to_json(const DialogueState& state) {
  json history = json::array();
  for (const auto& u : state.history) history.push_back(utterance_to_json(u));
  return json{{"background", background_to_json(state.background)},
              {"history", std::move(history)},
              {"turn", state.turn}};
}

DialogueState dialogue_state_from_json(const json& j) {
  DialogueState s;
  s.background = background_from_json(j.at("background"));
  for (const auto& u : j.at("history")) s.history.push_back(utterance_from_json(u));
  s.turn = j.at("turn").get<int>();
  return s;
}

json to_json(const Episode& e) {
  json transitions = json::array();
  for (const auto& t : e.transitions) transitions.push_back(transition_to_json(t));
  json j{{"task", to_string(e.task)},
         {"transitions", std::move(transitions)},
         {"success", e.success},
         {"turns", e.turns},
         {"stage", e.stage}};
  j["deal_price"] = e.deal_price.has_value() ? json(*e.deal_price) : json(nullptr);
  return j;
}

Episode episode_from_json(const json& j) {
  Episode e;
  e.task = task_id_from_string(j.at("task").get<std::string>());
  for (const auto& t : j.at("transitions")) {
    e.transitions.push_back(transition_from_json(t));
  }
  e.success = j.at("success").get<bool>();
  e.turns = j.at("turns").get<int>();
  if (j.contains("deal_price") && !j["deal_price"].is_null()) {
    e.deal_price = j["deal_price"].get<double>();
  }
  e.stage = j.value("stage", "");
  return e;
}

void append_episode_jsonl(std::ostream& out, const Episode& episode) {
  out << to_json(episode).dump() << '\n';
}

std::vector<Episode> read_episodes_jsonl(std::istream& in) {
  std::vector<Episode> episodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      episodes.push_back(episode_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseFailure(std::string("bad episode line: ") + e.what());
    }
  }
  return episodes;
}

std::vector<Episode> read_episodes_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open episode log: " + path);
  return read_episodes_jsonl(in);
}

void write_episodes_jsonl_file(const std::string& path,
                               const std::vector<Episode>& episodes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write episode log: " + path);
  for (const auto& e : episodes) append_episode_jsonl(out, e);
}

}  // namespace dualplan
