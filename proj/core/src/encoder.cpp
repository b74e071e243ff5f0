#include "dualplan/encoder.hpp"

#include "dualplan/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace dualplan {

TurnFeaturizer::TurnFeaturizer(int num_actions, int max_turns, double decay)
    : num_actions_(num_actions), max_turns_(max_turns), decay_(decay) {
  if (num_actions <= 0 || max_turns <= 0) {
    throw ConfigError("featurizer needs positive action count and turn cap");
  }
}

int TurnFeaturizer::dim() const { return 1 + 2 * num_actions_ + kTextBuckets + 2; }

uint64_t TurnFeaturizer::config_hash() const {
  std::string desc = "turn-featurizer/v1;A=" + std::to_string(num_actions_) +
                     ";T=" + std::to_string(max_turns_) +
                     ";decay=" + std::to_string(decay_) +
                     ";buckets=" + std::to_string(kTextBuckets);
  return fnv1a(desc);
}

std::vector<double> TurnFeaturizer::encode(const DialogueState& state,
                                           const StrategyCatalog& catalog) const {
  if (catalog.size() != num_actions_) {
    throw DimensionMismatch("featurizer built for " + std::to_string(num_actions_) +
                            " actions, catalog has " + std::to_string(catalog.size()));
  }
  std::vector<double> f(static_cast<size_t>(dim()), 0.0);
  f[0] = static_cast<double>(state.turn) / static_cast<double>(max_turns_);

  const auto actions = state.system_strategies();
  if (!actions.empty()) {
    const int last = actions.back();
    if (last >= 0 && last < num_actions_) f[static_cast<size_t>(1 + last)] = 1.0;
  }
  // Decayed bag, newest first, scaled so the sum stays below 1.
  double weight = 1.0 - decay_;
  for (auto it = actions.rbegin(); it != actions.rend(); ++it) {
    if (*it >= 0 && *it < num_actions_) {
      f[static_cast<size_t>(1 + num_actions_ + *it)] += weight;
    }
    weight *= decay_;
  }

  const size_t text_base = static_cast<size_t>(1 + 2 * num_actions_);
  if (const Utterance* user = state.last_user()) {
    std::string token;
    double norm = 0.0;
    auto flush = [&] {
      if (token.empty()) return;
      const size_t bucket = fnv1a(token) % kTextBuckets;
      f[text_base + bucket] += 1.0;
      token.clear();
    };
    for (unsigned char c : user->text) {
      if (std::isalnum(c)) {
        token.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush();
      }
    }
    flush();
    for (size_t i = 0; i < kTextBuckets; ++i) norm += f[text_base + i] * f[text_base + i];
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (size_t i = 0; i < kTextBuckets; ++i) f[text_base + i] /= norm;
    }
  }

  const size_t scalar_base = text_base + kTextBuckets;
  const auto& bg = state.background;
  if (bg.listed_price > bg.buyer_target_price && bg.buyer_target_price > 0.0) {
    // Most recent dollar amount in the history stands in for the current ask.
    double current_ask = bg.listed_price;
    for (auto it = state.history.rbegin(); it != state.history.rend(); ++it) {
      const auto pos = it->text.rfind('$');
      if (pos == std::string::npos) continue;
      std::string digits;
      for (size_t i = pos + 1; i < it->text.size(); ++i) {
        const char c = it->text[i];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
          digits.push_back(c);
        } else if (c != ',') {
          break;
        }
      }
      if (!digits.empty()) {
        current_ask = std::stod(digits);
        break;
      }
    }
    const double span = bg.listed_price - bg.buyer_target_price;
    f[scalar_base] = std::clamp((current_ask - bg.buyer_target_price) / span, -1.0, 2.0);
    f[scalar_base + 1] = 1.0;
  }
  return f;
}

}  // namespace dualplan
