#ifndef WGCS_OPTIM_HPP
#define WGCS_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "json_util.hpp"

namespace wgcs::optim {

using Matrix = Eigen::MatrixXd;

/// Linear learning-rate decay from `start` to `end` over `steps` updates.
struct LinearDecay {
  double start = 1e-4;
  double end = 5e-6;
  std::int64_t steps = 1;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::optional<LinearDecay> decay;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("adam lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam eps must be positive");
    if (decay && decay->steps < 1) throw ConfigError("lr decay needs steps >= 1");
  }
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(const AdamConfig& cfg, const std::vector<Matrix>& params) : config(cfg) {
    cfg.validate();
    for (const auto& p : params) {
      m.push_back(Matrix::Zero(p.rows(), p.cols()));
      v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }

  /// Learning rate used by update number `t` (1-based).
  double learning_rate(std::int64_t t) const {
    if (!config.decay) return config.lr;
    const auto& d = *config.decay;
    const double frac = static_cast<double>(std::min(t, d.steps)) / static_cast<double>(d.steps);
    return d.start + (d.end - d.start) * frac;
  }

  bool operator==(const AdamState& o) const {
    if (step != o.step || m.size() != o.m.size()) return false;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] != o.m[i] || v[i] != o.v[i]) return false;
    return true;
  }
};

/// One bias-corrected Adam descent step. Throws TrainingDiverged, carrying the
/// update index, if any gradient entry is non-finite.
inline void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractError("adam: parameter, gradient and state counts disagree");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        params[i].rows() != state.m[i].rows() || params[i].cols() != state.m[i].cols())
      throw ContractError("adam: shape mismatch in tensor " + std::to_string(i));
    if (!grads[i].allFinite()) throw TrainingDiverged(state.step + 1, "non-finite gradient");
  }
  const std::int64_t t = ++state.step;
  const auto& c = state.config;
  const double lr = state.learning_rate(t);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i].cwiseAbs2();
    const auto mhat = state.m[i].array() / bc1;
    const auto vhat = state.v[i].array() / bc2;
    params[i].array() -= lr * mhat / (vhat.sqrt() + c.eps);
  }
}

/// Clamp every entry (weights and biases) into [-c, c].
inline void weight_clip(std::vector<Matrix>& params, double c) {
  if (!(c > 0.0)) throw ContractError("weight clip bound must be positive");
  for (auto& p : params) p = p.cwiseMax(-c).cwiseMin(c);
}

inline json adam_config_to_json(const AdamConfig& c) {
  json j = {{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
  if (c.decay) j["decay"] = {{"start", c.decay->start}, {"end", c.decay->end}, {"steps", c.decay->steps}};
  return j;
}

inline AdamConfig adam_config_from_json(const json& j) {
  require_known_keys(j, {"lr", "beta1", "beta2", "eps", "decay"}, "optimizer");
  AdamConfig c;
  c.lr = get_or(j, "lr", c.lr);
  c.beta1 = get_or(j, "beta1", c.beta1);
  c.beta2 = get_or(j, "beta2", c.beta2);
  c.eps = get_or(j, "eps", c.eps);
  if (j.contains("decay")) {
    const json& d = j.at("decay");
    require_known_keys(d, {"start", "end", "steps"}, "optimizer.decay");
    LinearDecay ld;
    ld.start = get_or(d, "start", ld.start);
    ld.end = get_or(d, "end", ld.end);
    ld.steps = get_or<std::int64_t>(d, "steps", ld.steps);
    c.decay = ld;
  }
  c.validate();
  return c;
}

inline json adam_state_to_json(const AdamState& s) {
  json m = json::array();
  json v = json::array();
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    m.push_back({{"rows", s.m[i].rows()}, {"cols", s.m[i].cols()}, {"data", matrix_to_json(s.m[i])}});
    v.push_back(matrix_to_json(s.v[i]));
  }
  return {{"config", adam_config_to_json(s.config)}, {"step", s.step}, {"m", m}, {"v", v}};
}

inline AdamState adam_state_from_json(const json& j) {
  AdamState s;
  try {
    s.config = adam_config_from_json(j.at("config"));
    s.step = j.at("step").get<std::int64_t>();
    const json& m = j.at("m");
    const json& v = j.at("v");
    if (m.size() != v.size()) throw LoadError("adam state: m/v count mismatch");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto rows = m[i].at("rows").get<Eigen::Index>();
      const auto cols = m[i].at("cols").get<Eigen::Index>();
      s.m.push_back(matrix_from_json(m[i].at("data"), rows, cols, "adam m"));
      s.v.push_back(matrix_from_json(v[i], rows, cols, "adam v"));
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("adam state: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("adam state: ") + e.what());
  }
  if (s.step < 0) throw LoadError("adam state: negative step");
  return s;
}

}  // namespace wgcs::optim

#endif  // WGCS_OPTIM_HPP
