#pragma once

#include "dualplan/policy_model.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace dualplan {

enum class PlannerChoice { PolicyLM, Mcts };

enum class UncertaintyMeasure { Top2Gap, NegEntropy };

/// Nearest-rank percentile: the ceil(q*n)-th order statistic (clamped to the
/// first for q = 0). Throws EmptySamples on an empty multiset.
double percentile(std::vector<double> samples, double q);

/// Per-run state of the non-parameterized control gate. The threshold is the
/// (100*target_ratio)-th percentile of all confidence values seen so far; a
/// confidence strictly above it routes the turn to the policy, anything else
/// to MCTS. The fresh value is appended after the decision.
struct GateState {
  double target_ratio = 0.5;
  int min_samples = 10;
  UncertaintyMeasure measure = UncertaintyMeasure::Top2Gap;
  std::vector<double> collected;
  std::mt19937_64 rng;

  GateState() : rng(0) {}
  GateState(double ratio, uint64_t seed, int warmup = 10,
            UncertaintyMeasure m = UncertaintyMeasure::Top2Gap);
};

struct GateDecision {
  PlannerChoice choice = PlannerChoice::PolicyLM;
  double delta = 0.0;      // the confidence value used
  double threshold = 0.0;  // percentile threshold (0 during warm-up)
  bool warmup = false;
};

GateDecision gate_decide(GateState& gate, const ActionDistribution& dist);

}  // namespace dualplan
