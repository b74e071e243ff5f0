#pragma once

#include "dualplan/dialogue.hpp"
#include "dualplan/hashing.hpp"
#include "dualplan/strategy.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace dualplan {

/// Turns a dialogue state into a fixed-dimension feature vector. Must be
/// deterministic for a fixed state; the output dimension is constant for
/// the lifetime of a model. `config_hash` identifies the encoder layout so
/// checkpoints trained against a different encoder are rejected at load.
class StateEncoder {
 public:
  virtual ~StateEncoder() = default;
  virtual std::vector<double> encode(const DialogueState& state,
                                     const StrategyCatalog& catalog) const = 0;
  virtual int dim() const = 0;
  virtual uint64_t config_hash() const = 0;
};

/// Default hand-rolled featurizer:
///   [0]                normalized turn index t / T
///   [1 .. A]           one-hot of the last system strategy
///   [A+1 .. 2A]        exponentially decayed bag of past strategies
///   [2A+1 .. 2A+64]    hashed bag-of-words of the last user utterance
///   [2A+65, 2A+66]     task scalars (normalized price gap and deal flag
///                      for bargaining tasks; zero otherwise)
class TurnFeaturizer final : public StateEncoder {
 public:
  static constexpr int kTextBuckets = 64;

  TurnFeaturizer(int num_actions, int max_turns, double decay = 0.7);

  std::vector<double> encode(const DialogueState& state,
                             const StrategyCatalog& catalog) const override;
  int dim() const override;
  uint64_t config_hash() const override;

 private:
  int num_actions_;
  int max_turns_;
  double decay_;
};

}  // namespace dualplan
