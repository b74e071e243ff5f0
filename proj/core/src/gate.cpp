#include "dualplan/gate.hpp"

#include "dualplan/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dualplan {

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw EmptySamples("percentile of an empty sample set");
  if (q < 0.0 || q > 1.0) throw ConfigError("percentile q must lie in [0, 1]");
  const auto n = samples.size();
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<size_t>(rank, 1, n);
  auto nth = samples.begin() + static_cast<long>(rank - 1);
  std::nth_element(samples.begin(), nth, samples.end());
  return *nth;
}

GateState::GateState(double ratio, uint64_t seed, int warmup, UncertaintyMeasure m)
    : target_ratio(ratio), min_samples(warmup), measure(m), rng(seed) {
  if (ratio < 0.0 || ratio > 1.0) throw ConfigError("gate target ratio must lie in [0, 1]");
}

GateDecision gate_decide(GateState& gate, const ActionDistribution& dist) {
  GateDecision decision;
  decision.delta = gate.measure == UncertaintyMeasure::Top2Gap
                       ? top2_gap(dist)
                       : -entropy(dist);

  if (gate.collected.empty() ||
      static_cast<int>(gate.collected.size()) < gate.min_samples) {
    // Percentiles are meaningless on a near-empty list; fall back to a
    // Bernoulli draw at the target ratio.
    std::bernoulli_distribution use_mcts(gate.target_ratio);
    decision.choice = use_mcts(gate.rng) ? PlannerChoice::Mcts : PlannerChoice::PolicyLM;
    decision.warmup = true;
  } else {
    decision.threshold = percentile(gate.collected, gate.target_ratio);
    decision.choice = decision.delta > decision.threshold ? PlannerChoice::PolicyLM
                                                          : PlannerChoice::Mcts;
  }
  gate.collected.push_back(decision.delta);
  return decision;
}

}  // namespace dualplan
