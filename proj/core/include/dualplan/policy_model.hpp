#pragma once

#include "dualplan/dialogue.hpp"
#include "dualplan/encoder.hpp"
#include "dualplan/strategy.hpp"
#include "dualplan/task.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualplan {

/// Row-major dense matrix, sized once at construction.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  bool operator==(const Mat&) const = default;
};

/// Weights of the two-headed planner net: a shared tanh trunk (D -> H)
/// feeding a softmax policy head and a linear action-value head (H -> A).
struct PolicyParams {
  int input_dim = 0;
  int hidden_dim = 0;
  int num_actions = 0;
  uint64_t featurizer_hash = 0;

  Mat trunk_w;                  // H x D
  std::vector<double> trunk_b;  // H
  Mat policy_w;                 // A x H
  std::vector<double> policy_b; // A
  Mat q_w;                      // A x H
  std::vector<double> q_b;      // A

  bool operator==(const PolicyParams&) const = default;

  /// Weights uniform in +-1/sqrt(fan-in), zero biases.
  static PolicyParams init(int input_dim, int hidden_dim, int num_actions,
                           uint64_t featurizer_hash, uint64_t seed);

  size_t param_count() const;
  /// Visits every parameter in a fixed canonical order (trunk, policy, q).
  void for_each_param(const std::function<void(double&)>& fn);
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);
};

struct ActionDistribution {
  std::vector<double> probs;
  int size() const { return static_cast<int>(probs.size()); }
};

struct QValues {
  std::vector<double> values;
  int size() const { return static_cast<int>(values.size()); }
};

/// Cached intermediate activations of one forward pass, consumed by backward().
struct Activations {
  std::vector<double> features;
  std::vector<double> hidden;        // tanh outputs
  std::vector<double> policy_logits;
  std::vector<double> probs;
  std::vector<double> q_values;
};

/// Gradient with the same shape as PolicyParams.
struct ParamGrad {
  Mat trunk_w;
  std::vector<double> trunk_b;
  Mat policy_w;
  std::vector<double> policy_b;
  Mat q_w;
  std::vector<double> q_b;

  static ParamGrad zeros_like(const PolicyParams& p);
  void accumulate(const ParamGrad& other);
  void scale(double factor);
  std::vector<double> flatten() const;
  double max_abs() const;
  bool finite() const;
};

Activations forward_pass(const PolicyParams& params, std::span<const double> features);
ActionDistribution policy_forward(const PolicyParams& params, std::span<const double> features);
QValues q_forward(const PolicyParams& params, std::span<const double> features);

/// delta = top(1) - top(2) of the distribution. Throws TooFewActions if A < 2.
double top2_gap(const ActionDistribution& dist);
/// Shannon entropy in nats; the alternative gate uncertainty measure.
double entropy(const ActionDistribution& dist);

/// Exact analytic gradients for upstream gradients on the policy logits and
/// on the q values, accumulated into `grad`.
void backward(const PolicyParams& params, const Activations& acts,
              std::span<const double> d_policy_logits,
              std::span<const double> d_q_values, ParamGrad& grad);

void sgd_step(PolicyParams& params, const ParamGrad& grad, double learning_rate);

/// Versioned JSON checkpoint; round-trips parameters bit-exactly.
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);
uint64_t file_hash(const std::filesystem::path& path);

/// Bundles weights with the encoder that produced their input layout.
struct PolicyModel {
  PolicyParams params;
  std::shared_ptr<const StateEncoder> encoder;

  ActionDistribution distribution(const DialogueState& state,
                                  const StrategyCatalog& catalog) const;
  QValues q_values(const DialogueState& state, const StrategyCatalog& catalog) const;
  int greedy_action(const DialogueState& state, const StrategyCatalog& catalog) const;

  /// Throws DimensionMismatch / VersionMismatch when params and encoder
  /// do not describe the same layout.
  void check_compatible(const StrategyCatalog& catalog) const;
};

/// Fresh model for a task: default featurizer plus initialized params.
PolicyModel make_policy_model(const TaskSpec& task, int hidden_dim, uint64_t seed);

}  // namespace dualplan
