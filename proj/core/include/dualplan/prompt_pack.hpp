#pragma once

#include "dualplan/dialogue.hpp"
#include "dualplan/strategy.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dualplan {

struct PromptTemplate {
  std::string role;     // chat role: "system" | "user" | "assistant"
  std::string content;  // template text with [placeholder] slots
};

/// Role-play and reward prompt scaffolds for one task, loaded from plain
/// text files named `<role>_<index>_<chatrole>.txt` in the task directory
/// (e.g. assistant_0_system.txt). The strategy->instruction map lives in
/// strategies.json alongside them.
struct PromptPack {
  TaskId task = TaskId::Custom;
  std::vector<PromptTemplate> assistant_scaffold;
  std::vector<PromptTemplate> user_scaffold;
  std::vector<PromptTemplate> reward_scaffold;
  StrategyCatalog catalog;
  std::string system_display;  // transcript label of the system speaker
  std::string user_display;    // transcript label of the user speaker

  static PromptPack load(const std::filesystem::path& root, TaskId task);
  /// Directory baked in at build time (core/data/prompts), overridable via
  /// the DUALPLAN_PROMPT_DIR environment variable.
  static std::filesystem::path default_dir();
};

/// Replaces every [key] occurrence with its substitution value.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& subs);

/// Placeholder map derived from a case background ([situation], [exercise],
/// [item name], prices, ...).
std::map<std::string, std::string> background_placeholders(const CaseBackground& bg);

/// "Therapist: .../Patient: ..." style transcript for reward prompts.
std::string render_transcript(const DialogueState& state, const PromptPack& pack);

/// Opener history for an LLM-backed episode of the given task.
DialogueState llm_initial_state(TaskId task, const CaseBackground& background);

}  // namespace dualplan
