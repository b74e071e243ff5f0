#include "dualplan/reward.hpp"

#include "dualplan/errors.hpp"

#include <algorithm>
#include <cctype>

namespace dualplan {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Critic replies are judged on their first sentence only; anything after a
// terminator is explanation the map must not trip over.
std::string first_sentence(std::string_view s) {
  const auto pos = s.find_first_of(".!?\n");
  return std::string(pos == std::string_view::npos ? s : s.substr(0, pos + 1));
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

int match_verdict(const std::string& verdict, const RewardMap& map) {
  const std::string text = lowercase(first_sentence(verdict));

  struct Match {
    int entry;
    std::string phrase;  // longest matched key or alias, lowercased
  };
  std::vector<Match> matches;
  for (int i = 0; i < static_cast<int>(map.verdicts.size()); ++i) {
    const auto& entry = map.verdicts[static_cast<size_t>(i)];
    std::string best;
    const std::string key = lowercase(entry.verdict);
    if (contains(text, key)) best = key;
    for (const auto& alias : entry.aliases) {
      const std::string a = lowercase(alias);
      if (contains(text, a) && a.size() > best.size()) best = a;
    }
    if (!best.empty()) matches.push_back({i, best});
  }

  if (matches.empty()) {
    throw UnrecognizedVerdict("verdict matches no reward-map entry: " + verdict);
  }
  if (matches.size() == 1) return matches.front().entry;

  // Nested keys ("correct" inside "partially correct") resolve to the most
  // specific phrase; anything else is genuine ambiguity.
  const auto longest = std::max_element(
      matches.begin(), matches.end(),
      [](const Match& a, const Match& b) { return a.phrase.size() < b.phrase.size(); });
  for (const auto& m : matches) {
    if (m.entry != longest->entry && !contains(longest->phrase, m.phrase)) {
      throw UnrecognizedVerdict("verdict matches multiple reward-map entries: " + verdict);
    }
  }
  return longest->entry;
}

double map_verdicts_to_reward(std::span<const std::string> verdicts,
                              const RewardMap& map) {
  if (verdicts.empty()) {
    throw EmptySamples("cannot map an empty verdict list to a reward");
  }
  // Tally per entry first: count * score rounds once per entry, so a
  // unanimous verdict list reproduces its map score bit-exactly, and the
  // result cannot depend on verdict order.
  std::vector<long> counts(map.verdicts.size(), 0);
  for (const auto& v : verdicts) {
    counts[static_cast<size_t>(match_verdict(v, map))] += 1;
  }
  double sum = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) sum += static_cast<double>(counts[i]) * map.verdicts[i].score;
  }
  return sum / static_cast<double>(verdicts.size());
}

RewardMap RewardMap::builtin(TaskId task) {
  RewardMap map;
  map.success_score = 1.0;
  switch (task) {
    case TaskId::ESConv:
      map.verdicts = {
          {"feel worse", -1.0, {"feels worse"}},
          {"feel the same", -0.5, {"feels the same"}},
          {"feel better", 0.1, {"feels better"}},
          {"solved", 1.0, {"has been solved"}},
      };
      return map;
    case TaskId::CIMA:
      map.verdicts = {
          {"incorrect answer", -1.0, {"incorrect translation"}},
          {"no answer", -0.5, {"did not try"}},
          {"partially correct", 0.5, {"correctly translated a part", "translated a part"}},
          {"correct", 1.0, {"correctly translated the whole"}},
      };
      return map;
    case TaskId::CraigslistBargain:
      map.verdicts = {
          {"have not reached a deal", 0.0, {"not reached a deal"}},
          {"have reached a deal", 1.0, {"reached a deal at"}},
      };
      return map;
    case TaskId::Custom:
      throw ConfigError("no builtin reward map for custom tasks");
  }
  throw ConfigError("unknown task id");
}

}  // namespace dualplan
