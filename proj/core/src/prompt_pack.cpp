#include "dualplan/prompt_pack.hpp"

#include "dualplan/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dualplan {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read prompt file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  // Trailing newline is file hygiene, not prompt content.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::vector<PromptTemplate> load_scaffold(const std::filesystem::path& dir,
                                          const std::string& prefix) {
  std::vector<PromptTemplate> scaffold;
  for (int i = 0;; ++i) {
    bool found = false;
    for (const char* role : {"system", "user", "assistant"}) {
      const auto path = dir / (prefix + "_" + std::to_string(i) + "_" + role + ".txt");
      if (std::filesystem::exists(path)) {
        scaffold.push_back({role, read_file(path)});
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  if (scaffold.empty()) {
    throw ConfigError("no " + prefix + " prompt templates under " + dir.string());
  }
  return scaffold;
}

}  // namespace

PromptPack PromptPack::load(const std::filesystem::path& root, TaskId task) {
  const auto dir = root / to_string(task);
  if (!std::filesystem::exists(dir)) {
    throw ConfigError("prompt directory missing: " + dir.string());
  }
  PromptPack pack;
  pack.task = task;
  pack.assistant_scaffold = load_scaffold(dir, "assistant");
  pack.user_scaffold = load_scaffold(dir, "user");
  pack.reward_scaffold = load_scaffold(dir, "reward");

  const auto strategies_path = dir / "strategies.json";
  std::ifstream in(strategies_path);
  if (!in) throw ConfigError("missing strategies.json under " + dir.string());
  try {
    const json j = json::parse(in);
    pack.catalog.task = task;
    int id = 0;
    for (const auto& row : j) {
      pack.catalog.strategies.push_back(
          {id++, row.at("name").get<std::string>(), row.at("instruction").get<std::string>()});
    }
    pack.catalog.validate();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad strategies.json: ") + e.what());
  }

  switch (task) {
    case TaskId::ESConv:
      pack.system_display = "Therapist";
      pack.user_display = "Patient";
      break;
    case TaskId::CIMA:
      pack.system_display = "Teacher";
      pack.user_display = "Student";
      break;
    case TaskId::CraigslistBargain:
      pack.system_display = "Buyer";
      pack.user_display = "Seller";
      break;
    case TaskId::Custom:
      pack.system_display = "System";
      pack.user_display = "User";
      break;
  }
  return pack;
}

std::filesystem::path PromptPack::default_dir() {
  if (const char* env = std::getenv("DUALPLAN_PROMPT_DIR")) {
    return env;
  }
#ifdef DUALPLAN_DEFAULT_PROMPT_DIR
  return DUALPLAN_DEFAULT_PROMPT_DIR;
#else
  return "data/prompts";
#endif
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& subs) {
  std::string out = tmpl;
  for (const auto& [key, value] : subs) {
    const std::string slot = "[" + key + "]";
    size_t pos = 0;
    while ((pos = out.find(slot, pos)) != std::string::npos) {
      out.replace(pos, slot.size(), value);
      pos += value.size();
    }
  }
  return out;
}

std::map<std::string, std::string> background_placeholders(const CaseBackground& bg) {
  auto price = [](double v) {
    std::ostringstream out;
    out << '$' << v;
    return out.str();
  };
  return {
      {"situation", bg.situation},
      {"emotion type", bg.emotion_type},
      {"problem type", bg.problem_type},
      {"exercise", bg.exercise},
      {"item name", bg.item_name},
      {"item description", bg.item_description},
      {"seller target price", price(bg.listed_price)},
      {"buyer target price", price(bg.buyer_target_price)},
  };
}

std::string render_transcript(const DialogueState& state, const PromptPack& pack) {
  std::ostringstream out;
  for (const auto& u : state.history) {
    out << (u.speaker == Speaker::System ? pack.system_display : pack.user_display)
        << ": " << u.text << '\n';
  }
  return out.str();
}

DialogueState llm_initial_state(TaskId task, const CaseBackground& background) {
  DialogueState state;
  state.background = background;
  auto sys = [&](std::string text) {
    Utterance u;
    u.speaker = Speaker::System;
    u.text = std::move(text);
    u.turn_index = static_cast<int>(state.history.size());
    state.history.push_back(std::move(u));
  };
  auto usr = [&](std::string text) {
    Utterance u;
    u.speaker = Speaker::User;
    u.text = std::move(text);
    u.turn_index = static_cast<int>(state.history.size());
    state.history.push_back(std::move(u));
  };
  switch (task) {
    case TaskId::ESConv:
      usr(background.situation);
      break;
    case TaskId::CIMA:
      sys("Please translate “" + background.exercise + "” into Italian.");
      usr(background.situation);
      break;
    case TaskId::CraigslistBargain: {
      std::ostringstream price;
      price << '$' << background.listed_price;
      sys("Hi, how much is the " + background.item_name + "?");
      usr("Hi, this is a good " + background.item_name + " and its price is " +
          price.str() + ".");
      break;
    }
    case TaskId::Custom:
      if (!background.situation.empty()) usr(background.situation);
      break;
  }
  return state;
}

}  // namespace dualplan
