#include "dualplan/task.hpp"

#include "dualplan/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace dualplan {

using nlohmann::json;

void TaskSpec::validate() const {
  catalog.validate();
  if (max_turns <= 0) throw ConfigError("max_turns must be positive");
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in (0, 1]");
  if (critic_samples <= 0) throw ConfigError("critic_samples must be positive");
  if (reward_map.verdicts.empty()) throw ConfigError("reward map must be non-empty");
}

TaskSpec TaskSpec::builtin(TaskId id) {
  TaskSpec spec;
  spec.id = id;
  spec.catalog = StrategyCatalog::builtin(id);
  spec.reward_map = RewardMap::builtin(id);
  spec.max_turns = (id == TaskId::CraigslistBargain) ? 5 : 8;
  spec.gamma = 0.999;
  spec.critic_samples = 10;
  spec.validate();
  return spec;
}

TaskSpec TaskSpec::from_json(const json& j) {
  const std::string name = j.value("task", "custom");
  TaskSpec spec;
  const TaskId id = task_id_from_string(name);
  if (id != TaskId::Custom) {
    spec = builtin(id);
  } else {
    spec.id = TaskId::Custom;
  }
  if (j.contains("catalog")) {
    spec.catalog.task = spec.id;
    spec.catalog.strategies.clear();
    int next_id = 0;
    for (const auto& row : j.at("catalog")) {
      Strategy s;
      s.id = row.value("id", next_id);
      s.name = row.at("name").get<std::string>();
      s.instruction = row.at("instruction").get<std::string>();
      spec.catalog.strategies.push_back(std::move(s));
      ++next_id;
    }
  }
  if (j.contains("reward_map")) {
    const auto& rm = j.at("reward_map");
    spec.reward_map.verdicts.clear();
    for (const auto& row : rm.at("verdicts")) {
      RewardMap::Entry entry;
      entry.verdict = row.at("verdict").get<std::string>();
      entry.score = row.at("score").get<double>();
      if (row.contains("aliases")) {
        entry.aliases = row["aliases"].get<std::vector<std::string>>();
      }
      spec.reward_map.verdicts.push_back(std::move(entry));
    }
    spec.reward_map.success_score = rm.value("success_score", 1.0);
  }
  spec.max_turns = j.value("max_turns", spec.max_turns);
  spec.gamma = j.value("gamma", spec.gamma);
  spec.critic_samples = j.value("critic_samples", spec.critic_samples);
  spec.validate();
  return spec;
}

json TaskSpec::to_json() const {
  json catalog_rows = json::array();
  for (const auto& s : catalog.strategies) {
    catalog_rows.push_back({{"id", s.id}, {"name", s.name}, {"instruction", s.instruction}});
  }
  json verdict_rows = json::array();
  for (const auto& v : reward_map.verdicts) {
    verdict_rows.push_back({{"verdict", v.verdict}, {"score", v.score}, {"aliases", v.aliases}});
  }
  return json{{"task", to_string(id)},
              {"catalog", std::move(catalog_rows)},
              {"reward_map",
               {{"verdicts", std::move(verdict_rows)},
                {"success_score", reward_map.success_score}}},
              {"max_turns", max_turns},
              {"gamma", gamma},
              {"critic_samples", critic_samples}};
}

TaskSpec TaskSpec::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open task spec: " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad task spec json: ") + e.what());
  }
}

}  // namespace dualplan
