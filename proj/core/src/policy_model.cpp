#include "dualplan/policy_model.hpp"

#include "dualplan/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace dualplan {

using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;
}

PolicyParams PolicyParams::init(int input_dim, int hidden_dim, int num_actions,
                                uint64_t featurizer_hash, uint64_t seed) {
  if (input_dim <= 0 || hidden_dim <= 0 || num_actions <= 0) {
    throw DimensionMismatch("all model dimensions must be positive");
  }
  PolicyParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.num_actions = num_actions;
  p.featurizer_hash = featurizer_hash;
  p.trunk_w = Mat(hidden_dim, input_dim);
  p.trunk_b.assign(static_cast<size_t>(hidden_dim), 0.0);
  p.policy_w = Mat(num_actions, hidden_dim);
  p.policy_b.assign(static_cast<size_t>(num_actions), 0.0);
  p.q_w = Mat(num_actions, hidden_dim);
  p.q_b.assign(static_cast<size_t>(num_actions), 0.0);

  std::mt19937_64 rng(seed);
  auto fill = [&rng](Mat& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : m.a) w = dist(rng);
  };
  fill(p.trunk_w, input_dim);
  fill(p.policy_w, hidden_dim);
  fill(p.q_w, hidden_dim);
  return p;
}

size_t PolicyParams::param_count() const {
  return trunk_w.a.size() + trunk_b.size() + policy_w.a.size() + policy_b.size() +
         q_w.a.size() + q_b.size();
}

void PolicyParams::for_each_param(const std::function<void(double&)>& fn) {
  for (auto& v : trunk_w.a) fn(v);
  for (auto& v : trunk_b) fn(v);
  for (auto& v : policy_w.a) fn(v);
  for (auto& v : policy_b) fn(v);
  for (auto& v : q_w.a) fn(v);
  for (auto& v : q_b) fn(v);
}

std::vector<double> PolicyParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  auto push = [&flat](const auto& range) { flat.insert(flat.end(), range.begin(), range.end()); };
  push(trunk_w.a);
  push(trunk_b);
  push(policy_w.a);
  push(policy_b);
  push(q_w.a);
  push(q_b);
  return flat;
}

void PolicyParams::assign_flat(std::span<const double> values) {
  if (values.size() != param_count()) {
    throw DimensionMismatch("flat parameter vector has the wrong length");
  }
  size_t i = 0;
  for_each_param([&](double& v) { v = values[i++]; });
}

ParamGrad ParamGrad::zeros_like(const PolicyParams& p) {
  ParamGrad g;
  g.trunk_w = Mat(p.hidden_dim, p.input_dim);
  g.trunk_b.assign(static_cast<size_t>(p.hidden_dim), 0.0);
  g.policy_w = Mat(p.num_actions, p.hidden_dim);
  g.policy_b.assign(static_cast<size_t>(p.num_actions), 0.0);
  g.q_w = Mat(p.num_actions, p.hidden_dim);
  g.q_b.assign(static_cast<size_t>(p.num_actions), 0.0);
  return g;
}

void ParamGrad::accumulate(const ParamGrad& other) {
  auto add = [](auto& dst, const auto& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  add(trunk_w.a, other.trunk_w.a);
  add(trunk_b, other.trunk_b);
  add(policy_w.a, other.policy_w.a);
  add(policy_b, other.policy_b);
  add(q_w.a, other.q_w.a);
  add(q_b, other.q_b);
}

void ParamGrad::scale(double factor) {
  auto mul = [factor](auto& dst) {
    for (auto& v : dst) v *= factor;
  };
  mul(trunk_w.a);
  mul(trunk_b);
  mul(policy_w.a);
  mul(policy_b);
  mul(q_w.a);
  mul(q_b);
}

std::vector<double> ParamGrad::flatten() const {
  std::vector<double> flat;
  auto push = [&flat](const auto& range) { flat.insert(flat.end(), range.begin(), range.end()); };
  push(trunk_w.a);
  push(trunk_b);
  push(policy_w.a);
  push(policy_b);
  push(q_w.a);
  push(q_b);
  return flat;
}

double ParamGrad::max_abs() const {
  double m = 0.0;
  for (const auto v : flatten()) m = std::max(m, std::fabs(v));
  return m;
}

bool ParamGrad::finite() const {
  for (const auto v : flatten()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Activations forward_pass(const PolicyParams& p, std::span<const double> features) {
  if (static_cast<int>(features.size()) != p.input_dim) {
    throw DimensionMismatch("feature dimension " + std::to_string(features.size()) +
                            " != model input dimension " + std::to_string(p.input_dim));
  }
  Activations acts;
  acts.features.assign(features.begin(), features.end());
  acts.hidden.resize(static_cast<size_t>(p.hidden_dim));
  for (int h = 0; h < p.hidden_dim; ++h) {
    double z = p.trunk_b[static_cast<size_t>(h)];
    for (int d = 0; d < p.input_dim; ++d) z += p.trunk_w(h, d) * features[static_cast<size_t>(d)];
    acts.hidden[static_cast<size_t>(h)] = std::tanh(z);
  }
  acts.policy_logits.resize(static_cast<size_t>(p.num_actions));
  acts.q_values.resize(static_cast<size_t>(p.num_actions));
  for (int a = 0; a < p.num_actions; ++a) {
    double logit = p.policy_b[static_cast<size_t>(a)];
    double q = p.q_b[static_cast<size_t>(a)];
    for (int h = 0; h < p.hidden_dim; ++h) {
      logit += p.policy_w(a, h) * acts.hidden[static_cast<size_t>(h)];
      q += p.q_w(a, h) * acts.hidden[static_cast<size_t>(h)];
    }
    acts.policy_logits[static_cast<size_t>(a)] = logit;
    acts.q_values[static_cast<size_t>(a)] = q;
  }
  // Max-shifted softmax.
  const double m = *std::max_element(acts.policy_logits.begin(), acts.policy_logits.end());
  double z = 0.0;
  acts.probs.resize(static_cast<size_t>(p.num_actions));
  for (size_t a = 0; a < acts.probs.size(); ++a) {
    acts.probs[a] = std::exp(acts.policy_logits[a] - m);
    z += acts.probs[a];
  }
  for (auto& v : acts.probs) v /= z;
  return acts;
}

ActionDistribution policy_forward(const PolicyParams& p, std::span<const double> features) {
  return ActionDistribution{forward_pass(p, features).probs};
}

QValues q_forward(const PolicyParams& p, std::span<const double> features) {
  return QValues{forward_pass(p, features).q_values};
}

double top2_gap(const ActionDistribution& dist) {
  if (dist.size() < 2) {
    throw TooFewActions("top2_gap needs at least two actions");
  }
  double top1 = -1.0, top2 = -1.0;
  for (const double p : dist.probs) {
    if (p > top1) {
      top2 = top1;
      top1 = p;
    } else if (p > top2) {
      top2 = p;
    }
  }
  return top1 - top2;
}

double entropy(const ActionDistribution& dist) {
  double h = 0.0;
  for (const double p : dist.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void backward(const PolicyParams& p, const Activations& acts,
              std::span<const double> d_policy_logits,
              std::span<const double> d_q_values, ParamGrad& grad) {
  if (static_cast<int>(d_policy_logits.size()) != p.num_actions ||
      static_cast<int>(d_q_values.size()) != p.num_actions) {
    throw DimensionMismatch("upstream gradient size must equal the action count");
  }
  std::vector<double> d_hidden(static_cast<size_t>(p.hidden_dim), 0.0);
  for (int a = 0; a < p.num_actions; ++a) {
    const double dl = d_policy_logits[static_cast<size_t>(a)];
    const double dq = d_q_values[static_cast<size_t>(a)];
    grad.policy_b[static_cast<size_t>(a)] += dl;
    grad.q_b[static_cast<size_t>(a)] += dq;
    for (int h = 0; h < p.hidden_dim; ++h) {
      const double hv = acts.hidden[static_cast<size_t>(h)];
      grad.policy_w(a, h) += dl * hv;
      grad.q_w(a, h) += dq * hv;
      d_hidden[static_cast<size_t>(h)] += dl * p.policy_w(a, h) + dq * p.q_w(a, h);
    }
  }
  for (int h = 0; h < p.hidden_dim; ++h) {
    const double hv = acts.hidden[static_cast<size_t>(h)];
    const double dz = d_hidden[static_cast<size_t>(h)] * (1.0 - hv * hv);
    grad.trunk_b[static_cast<size_t>(h)] += dz;
    for (int d = 0; d < p.input_dim; ++d) {
      grad.trunk_w(h, d) += dz * acts.features[static_cast<size_t>(d)];
    }
  }
}

void sgd_step(PolicyParams& params, const ParamGrad& grad, double learning_rate) {
  auto apply = [learning_rate](auto& dst, const auto& g) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] -= learning_rate * g[i];
  };
  apply(params.trunk_w.a, grad.trunk_w.a);
  apply(params.trunk_b, grad.trunk_b);
  apply(params.policy_w.a, grad.policy_w.a);
  apply(params.policy_b, grad.policy_b);
  apply(params.q_w.a, grad.q_w.a);
  apply(params.q_b, grad.q_b);
}

namespace {

json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.a.size()) throw ParseFailure("matrix payload size mismatch");
  m.a = data;
  return m;
}

}  // namespace

void save_checkpoint(const PolicyParams& p, const std::filesystem::path& path) {
  json j{{"format", "dualplan-checkpoint"},
         {"version", kCheckpointVersion},
         {"input_dim", p.input_dim},
         {"hidden_dim", p.hidden_dim},
         {"num_actions", p.num_actions},
         {"featurizer_hash", p.featurizer_hash},
         {"trunk_w", mat_to_json(p.trunk_w)},
         {"trunk_b", p.trunk_b},
         {"policy_w", mat_to_json(p.policy_w)},
         {"policy_b", p.policy_b},
         {"q_w", mat_to_json(p.q_w)},
         {"q_b", p.q_b}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write on checkpoint: " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseFailure(std::string("corrupt checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "dualplan-checkpoint") {
    throw ParseFailure("not a checkpoint file: " + path.string());
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw VersionMismatch("checkpoint version " + std::to_string(j.value("version", -1)) +
                          " unsupported");
  }
  try {
    PolicyParams p;
    p.input_dim = j.at("input_dim").get<int>();
    p.hidden_dim = j.at("hidden_dim").get<int>();
    p.num_actions = j.at("num_actions").get<int>();
    p.featurizer_hash = j.at("featurizer_hash").get<uint64_t>();
    p.trunk_w = mat_from_json(j.at("trunk_w"));
    p.trunk_b = j.at("trunk_b").get<std::vector<double>>();
    p.policy_w = mat_from_json(j.at("policy_w"));
    p.policy_b = j.at("policy_b").get<std::vector<double>>();
    p.q_w = mat_from_json(j.at("q_w"));
    p.q_b = j.at("q_b").get<std::vector<double>>();
    if (p.trunk_w.rows != p.hidden_dim || p.trunk_w.cols != p.input_dim ||
        p.policy_w.rows != p.num_actions || p.policy_w.cols != p.hidden_dim ||
        p.q_w.rows != p.num_actions || p.q_w.cols != p.hidden_dim ||
        static_cast<int>(p.trunk_b.size()) != p.hidden_dim ||
        static_cast<int>(p.policy_b.size()) != p.num_actions ||
        static_cast<int>(p.q_b.size()) != p.num_actions) {
      throw DimensionMismatch("checkpoint dimensions are inconsistent");
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseFailure(std::string("corrupt checkpoint: ") + e.what());
  }
}

uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

ActionDistribution PolicyModel::distribution(const DialogueState& state,
                                             const StrategyCatalog& catalog) const {
  return policy_forward(params, encoder->encode(state, catalog));
}

QValues PolicyModel::q_values(const DialogueState& state,
                              const StrategyCatalog& catalog) const {
  return q_forward(params, encoder->encode(state, catalog));
}

int PolicyModel::greedy_action(const DialogueState& state,
                               const StrategyCatalog& catalog) const {
  const auto dist = distribution(state, catalog);
  int best = 0;
  for (int a = 1; a < dist.size(); ++a) {
    if (dist.probs[static_cast<size_t>(a)] > dist.probs[static_cast<size_t>(best)]) best = a;
  }
  return best;
}

void PolicyModel::check_compatible(const StrategyCatalog& catalog) const {
  if (!encoder) throw ConfigError("policy model has no encoder");
  if (params.input_dim != encoder->dim()) {
    throw DimensionMismatch("checkpoint input dim " + std::to_string(params.input_dim) +
                            " != encoder dim " + std::to_string(encoder->dim()));
  }
  if (params.num_actions != catalog.size()) {
    throw DimensionMismatch("checkpoint action count " + std::to_string(params.num_actions) +
                            " != catalog size " + std::to_string(catalog.size()));
  }
  if (params.featurizer_hash != encoder->config_hash()) {
    throw VersionMismatch("checkpoint was trained against a different encoder configuration");
  }
}

PolicyModel make_policy_model(const TaskSpec& task, int hidden_dim, uint64_t seed) {
  auto encoder = std::make_shared<TurnFeaturizer>(task.catalog.size(), task.max_turns);
  PolicyModel model;
  model.params = PolicyParams::init(encoder->dim(), hidden_dim, task.catalog.size(),
                                    encoder->config_hash(), seed);
  model.encoder = std::move(encoder);
  return model;
}

}  // namespace dualplan
