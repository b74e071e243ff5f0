#include "dualplan/strategy.hpp"

#include "dualplan/errors.hpp"

namespace dualplan {

std::string to_string(TaskId id) {
  switch (id) {
    case TaskId::ESConv: return "esconv";
    case TaskId::CIMA: return "cima";
    case TaskId::CraigslistBargain: return "cb";
    case TaskId::Custom: return "custom";
  }
  return "custom";
}

TaskId task_id_from_string(const std::string& name) {
  if (name == "esconv") return TaskId::ESConv;
  if (name == "cima") return TaskId::CIMA;
  if (name == "cb" || name == "craigslistbargain") return TaskId::CraigslistBargain;
  if (name == "custom") return TaskId::Custom;
  throw ConfigError("unknown task id: " + name);
}

const Strategy& StrategyCatalog::at(int id) const {
  if (id < 0 || id >= size()) {
    throw IndexOutOfRange("strategy id " + std::to_string(id) +
                          " outside catalog of size " + std::to_string(size()));
  }
  return strategies[static_cast<size_t>(id)];
}

const Strategy* StrategyCatalog::find_by_instruction(const std::string& instruction) const {
  for (const auto& s : strategies) {
    if (s.instruction == instruction) return &s;
  }
  return nullptr;
}

const Strategy* StrategyCatalog::find_by_name(const std::string& name) const {
  for (const auto& s : strategies) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void StrategyCatalog::validate() const {
  for (int i = 0; i < size(); ++i) {
    const auto& s = strategies[static_cast<size_t>(i)];
    if (s.id != i) {
      throw ConfigError("catalog ids must be contiguous from 0; entry " +
                        std::to_string(i) + " has id " + std::to_string(s.id));
    }
    if (s.instruction.empty()) {
      throw ConfigError("strategy '" + s.name + "' has an empty instruction");
    }
  }
  const int expected = task == TaskId::ESConv  ? 8
                     : task == TaskId::CIMA    ? 5
                     : task == TaskId::CraigslistBargain ? 11
                                               : size();
  if (size() != expected) {
    throw ConfigError("task " + to_string(task) + " requires " +
                      std::to_string(expected) + " strategies, got " +
                      std::to_string(size()));
  }
}

namespace {

StrategyCatalog make_catalog(TaskId task,
                             std::initializer_list<std::pair<const char*, const char*>> rows) {
  StrategyCatalog catalog;
  catalog.task = task;
  int id = 0;
  for (const auto& [name, instruction] : rows) {
    catalog.strategies.push_back({id++, name, instruction});
  }
  return catalog;
}

}  // namespace

StrategyCatalog StrategyCatalog::builtin(TaskId task) {
  switch (task) {
    case TaskId::ESConv:
      return make_catalog(task, {
          {"Question",
           "Please ask the Patient to elaborate on the situation they just described."},
          {"Self-disclosure",
           "Please provide a statement relating to the Patient about the situation they just described."},
          {"Affirmation and Reassurance",
           "Please provide affirmation and reassurance to the Patient on the situation they just described."},
          {"Providing Suggestions",
           "Please provide suggestion to the Patient on the situation they just described."},
          {"Reflection of feelings",
           "Please acknowledge the Patient's feelings about the situation they described."},
          {"Information",
           "Please provide factual information to help the Patient with their situation."},
          {"Restatement or Paraphrasing",
           "Please acknowledge the Patient's feelings by paraphrasing their situation."},
          {"Others", "Please chat with the Patient."},
      });
    case TaskId::CIMA:
      return make_catalog(task, {
          {"Hint", "Please provide knowledge to the Student via a hint."},
          {"Open-ended Question",
           "Please ask a question to the Student to determine the Student's understanding or continue the conversation."},
          {"Correction",
           "Please correct the mistake or address the misconception the Student has."},
          {"Confirmation",
           "Please confirm the student's answer or understanding is correct."},
          {"Others", "Please chat with the Student without any pedagogical strategy."},
      });
    case TaskId::CraigslistBargain:
      return make_catalog(task, {
          {"Greetings", "Please say hello or chat randomly."},
          {"Ask a question",
           "Please ask any question about product, year, price, usage, etc."},
          {"Answer a question",
           "Please provide information about the product, year, usage, etc."},
          {"Propose the first price",
           "Please initiate a price or a price range for the product."},
          {"Propose a counter price",
           "Please propose a new price or a new price range."},
          {"Use comparatives",
           "Please propose a vague price by using comparatives with existing price."},
          {"Confirm information",
           "Please ask a question about the information to be confirmed."},
          {"Affirm confirmation",
           "Please give an affirmative response to a confirm."},
          {"Deny confirmation",
           "Please give a negative response to a confirm."},
          {"Agree with the proposal", "Please agree with the proposed price."},
          {"Disagree with a proposal", "Please disagree with the proposed price."},
      });
    case TaskId::Custom:
      throw ConfigError("no builtin catalog for custom tasks");
  }
  throw ConfigError("unknown task id");
}

}  // namespace dualplan
