#ifndef WGCS_NN_HPP
#define WGCS_NN_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autodiff.hpp"
#include "error.hpp"
#include "json_util.hpp"
#include "rng.hpp"

namespace wgcs::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

/// Output layer: identity, bound * tanh(a), or clamp to [-bound, bound].
struct OutputActivation {
  enum class Kind { identity, tanh, clip };
  Kind kind = Kind::identity;
  double bound = 1.0;

  static OutputActivation identity() { return {Kind::identity, 1.0}; }
  static OutputActivation tanh(double scale = 1.0) { return {Kind::tanh, scale}; }
  static OutputActivation clip(double c) { return {Kind::clip, c}; }
};

struct HiddenLayer {
  std::size_t width = 0;
  Activation activation = Activation::relu;
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<HiddenLayer> hidden;
  std::size_t output_dim = 0;
  OutputActivation output;

  std::size_t layer_count() const { return hidden.size() + 1; }
  std::size_t fan_in(std::size_t layer) const { return layer == 0 ? input_dim : hidden[layer - 1].width; }
  std::size_t fan_out(std::size_t layer) const { return layer < hidden.size() ? hidden[layer].width : output_dim; }

  void validate() const {
    if (input_dim == 0) throw ConfigError("network input_dim must be >= 1");
    if (output_dim == 0) throw ConfigError("network output_dim must be >= 1");
    for (std::size_t i = 0; i < hidden.size(); ++i)
      if (hidden[i].width == 0) throw ConfigError("hidden layer " + std::to_string(i) + " has zero width");
    if (output.kind != OutputActivation::Kind::identity && !(output.bound > 0.0))
      throw ConfigError("output activation bound must be positive");
  }

  bool operator==(const NetworkSpec& o) const {
    if (input_dim != o.input_dim || output_dim != o.output_dim || hidden.size() != o.hidden.size()) return false;
    for (std::size_t i = 0; i < hidden.size(); ++i)
      if (hidden[i].width != o.hidden[i].width || hidden[i].activation != o.hidden[i].activation) return false;
    return output.kind == o.output.kind && output.bound == o.output.bound;
  }
};

/// Layer tensors in the order W0, b0, W1, b1, ...; W_l is fan_out x fan_in, b_l is 1 x fan_out.
struct NetworkParams {
  std::vector<Matrix> tensors;

  std::size_t layer_count() const { return tensors.size() / 2; }
  Matrix& weight(std::size_t l) { return tensors[2 * l]; }
  const Matrix& weight(std::size_t l) const { return tensors[2 * l]; }
  Matrix& bias(std::size_t l) { return tensors[2 * l + 1]; }
  const Matrix& bias(std::size_t l) const { return tensors[2 * l + 1]; }

  bool all_finite() const {
    for (const auto& t : tensors)
      if (!t.allFinite()) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& t : tensors)
      if (t.size() > 0) m = std::max(m, t.cwiseAbs().maxCoeff());
    return m;
  }

  bool operator==(const NetworkParams& o) const {
    if (tensors.size() != o.tensors.size()) return false;
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].rows() != o.tensors[i].rows() || tensors[i].cols() != o.tensors[i].cols() ||
          tensors[i] != o.tensors[i])
        return false;
    return true;
  }
};

inline void check_consistent(const NetworkSpec& spec, const NetworkParams& params) {
  if (params.tensors.size() != 2 * spec.layer_count()) throw LoadError("parameter tensor count does not match spec");
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto out = static_cast<Eigen::Index>(spec.fan_out(l));
    const auto in = static_cast<Eigen::Index>(spec.fan_in(l));
    if (params.weight(l).rows() != out || params.weight(l).cols() != in)
      throw LoadError("weight " + std::to_string(l) + " shape does not match spec");
    if (params.bias(l).rows() != 1 || params.bias(l).cols() != out)
      throw LoadError("bias " + std::to_string(l) + " shape does not match spec");
  }
}

/// He-normal for layers feeding a ReLU, Xavier-normal otherwise; zero biases.
inline NetworkParams build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, "nn.init");
  NetworkParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto in = static_cast<Eigen::Index>(spec.fan_in(l));
    const auto out = static_cast<Eigen::Index>(spec.fan_out(l));
    const bool relu = l < spec.hidden.size() && spec.hidden[l].activation == Activation::relu;
    const double sd = relu ? std::sqrt(2.0 / static_cast<double>(in)) : std::sqrt(2.0 / static_cast<double>(in + out));
    p.tensors.push_back(sd * standard_normal(rng, out, in));
    p.tensors.push_back(Matrix::Zero(1, out));
  }
  return p;
}

/// Coordinatewise clamp to [-c, c].
inline Matrix clip_layer(const Matrix& a, double c) {
  if (!(c > 0.0)) throw ContractError("clip bound must be positive");
  return a.cwiseMax(-c).cwiseMin(c);
}

/// The same map written as relu(a + c) - relu(a - c) - c.
inline Matrix clip_layer_two_relu(const Matrix& a, double c) {
  if (!(c > 0.0)) throw ContractError("clip bound must be positive");
  auto relu = [](double v) { return v > 0.0 ? v : 0.0; };
  return a.unaryExpr([&](double v) { return relu(v + c) - relu(v - c) - c; });
}

namespace detail {

inline void apply_hidden(Matrix& h, Activation a) {
  switch (a) {
    case Activation::relu: h = h.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; }); break;
    case Activation::tanh: h = h.array().tanh().matrix(); break;
    case Activation::identity: break;
  }
}

inline void apply_output(Matrix& h, const OutputActivation& out) {
  switch (out.kind) {
    case OutputActivation::Kind::identity: break;
    case OutputActivation::Kind::tanh: h = out.bound * h.array().tanh().matrix(); break;
    case OutputActivation::Kind::clip: h = clip_layer(h, out.bound); break;
  }
}

}  // namespace detail

/// Batched forward pass; each row of `inputs` is one sample.
inline Matrix forward(const NetworkSpec& spec, const NetworkParams& params, const Matrix& inputs) {
  if (inputs.cols() != static_cast<Eigen::Index>(spec.input_dim))
    throw ContractError("network input has " + std::to_string(inputs.cols()) + " columns, expected " +
                        std::to_string(spec.input_dim));
  Matrix h = inputs;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    Matrix z = h * params.weight(l).transpose();
    z.rowwise() += params.bias(l).row(0);
    if (l < spec.hidden.size()) {
      detail::apply_hidden(z, spec.hidden[l].activation);
    } else {
      detail::apply_output(z, spec.output);
    }
    h = std::move(z);
  }
  return h;
}

/// Single input as a column vector.
inline Vector forward_one(const NetworkSpec& spec, const NetworkParams& params, const Vector& input) {
  const Matrix out = forward(spec, params, Matrix(input.transpose()));
  return out.row(0).transpose();
}

/// Parameters placed on a tape, as leaves (trainable) or constants (frozen).
struct BoundParams {
  std::vector<ad::Var> tensors;
};

inline BoundParams bind(ad::Tape& tape, const NetworkParams& params, bool trainable) {
  BoundParams b;
  b.tensors.reserve(params.tensors.size());
  for (const auto& t : params.tensors) b.tensors.push_back(trainable ? tape.leaf(t) : tape.constant(t));
  return b;
}

/// Recorded forward pass over a batch Var (rows are samples).
inline ad::Var forward(ad::Tape& tape, const NetworkSpec& spec, const BoundParams& params, ad::Var inputs) {
  if (inputs.cols() != static_cast<Eigen::Index>(spec.input_dim))
    throw ContractError("network input has " + std::to_string(inputs.cols()) + " columns, expected " +
                        std::to_string(spec.input_dim));
  const Eigen::Index rows = inputs.rows();
  ad::Var h = inputs;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const ad::Var w = params.tensors[2 * l];
    const ad::Var b = params.tensors[2 * l + 1];
    ad::Var z = tape.add(tape.matmul(h, tape.transpose(w)), tape.broadcast_rows(b, rows));
    if (l < spec.hidden.size()) {
      switch (spec.hidden[l].activation) {
        case Activation::relu: z = tape.relu(z); break;
        case Activation::tanh: z = tape.tanh(z); break;
        case Activation::identity: break;
      }
    } else {
      switch (spec.output.kind) {
        case OutputActivation::Kind::identity: break;
        case OutputActivation::Kind::tanh: z = tape.scale(tape.tanh(z), spec.output.bound); break;
        case OutputActivation::Kind::clip: z = tape.clip(z, spec.output.bound); break;
      }
    }
    h = z;
  }
  return h;
}

/// A spec together with parameters shaped for it.
struct Network {
  NetworkSpec spec;
  NetworkParams params;

  static Network build(const NetworkSpec& spec, std::uint64_t seed) { return {spec, build_network(spec, seed)}; }
  Matrix operator()(const Matrix& inputs) const { return forward(spec, params, inputs); }
};

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kCheckpointFormatVersion = 1;

inline json spec_to_json(const NetworkSpec& spec) {
  json hidden = json::array();
  for (const auto& h : spec.hidden) hidden.push_back({{"width", h.width}, {"activation", to_string(h.activation)}});
  json out;
  switch (spec.output.kind) {
    case OutputActivation::Kind::identity: out = {{"kind", "identity"}}; break;
    case OutputActivation::Kind::tanh: out = {{"kind", "tanh"}, {"scale", spec.output.bound}}; break;
    case OutputActivation::Kind::clip: out = {{"kind", "clip"}, {"bound", spec.output.bound}}; break;
  }
  return {{"input_dim", spec.input_dim}, {"hidden", hidden}, {"output_dim", spec.output_dim}, {"output_activation", out}};
}

/// Parses a spec object. A clip bound may be written as the string "log_n",
/// resolved against `sample_size` when one is given.
inline NetworkSpec spec_from_json(const json& j, std::size_t sample_size = 0) {
  require_known_keys(j, {"input_dim", "hidden", "output_dim", "output_activation"}, "network spec");
  NetworkSpec s;
  try {
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.output_dim = j.at("output_dim").get<std::size_t>();
    for (const auto& h : j.value("hidden", json::array())) {
      require_known_keys(h, {"width", "activation"}, "hidden layer");
      s.hidden.push_back({h.at("width").get<std::size_t>(), activation_from_string(h.value("activation", "relu"))});
    }
    if (j.contains("output_activation")) {
      const json& o = j.at("output_activation");
      require_known_keys(o, {"kind", "scale", "bound"}, "output_activation");
      const std::string kind = o.at("kind").get<std::string>();
      if (kind == "identity") {
        s.output = OutputActivation::identity();
      } else if (kind == "tanh") {
        s.output = OutputActivation::tanh(o.value("scale", 1.0));
      } else if (kind == "clip") {
        const json& b = o.at("bound");
        if (b.is_string() && b.get<std::string>() == "log_n") {
          if (sample_size < 2) throw ConfigError("clip bound 'log_n' needs a sample size >= 2");
          s.output = OutputActivation::clip(std::log(static_cast<double>(sample_size)));
        } else {
          s.output = OutputActivation::clip(b.get<double>());
        }
      } else {
        throw ConfigError("unknown output activation '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline json params_to_json(const NetworkParams& p) {
  json layers = json::array();
  for (std::size_t l = 0; l < p.layer_count(); ++l)
    layers.push_back({{"weight", matrix_to_json(p.weight(l))}, {"bias", matrix_to_json(p.bias(l)).at(0)}});
  return layers;
}

inline NetworkParams params_from_json(const json& j, const NetworkSpec& spec) {
  if (!j.is_array() || j.size() != spec.layer_count()) throw LoadError("params: layer count does not match spec");
  NetworkParams p;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const json& layer = j[l];
    if (!layer.is_object() || !layer.contains("weight") || !layer.contains("bias"))
      throw LoadError("params: layer " + std::to_string(l) + " lacks weight/bias");
    const auto out = static_cast<Eigen::Index>(spec.fan_out(l));
    const auto in = static_cast<Eigen::Index>(spec.fan_in(l));
    p.tensors.push_back(matrix_from_json(layer.at("weight"), out, in, "weight " + std::to_string(l)));
    p.tensors.push_back(matrix_from_json(json::array({layer.at("bias")}), 1, out, "bias " + std::to_string(l)));
  }
  if (!p.all_finite()) throw LoadError("params: non-finite entry");
  return p;
}

struct Checkpoint {
  NetworkSpec spec;
  NetworkParams params;
  json metadata = json::object();
};

inline json save_checkpoint(const NetworkSpec& spec, const NetworkParams& params, const json& metadata) {
  check_consistent(spec, params);
  if (!params.all_finite()) throw ContractError("refusing to checkpoint non-finite parameters");
  return {{"format_version", kCheckpointFormatVersion},
          {"spec", spec_to_json(spec)},
          {"params", params_to_json(params)},
          {"metadata", metadata}};
}

inline Checkpoint load_checkpoint(const json& doc) {
  if (!doc.is_object()) throw LoadError("checkpoint: expected an object");
  if (!doc.contains("format_version") || doc.at("format_version") != kCheckpointFormatVersion)
    throw LoadError("checkpoint: unsupported format_version");
  Checkpoint c;
  try {
    c.spec = spec_from_json(doc.at("spec"));
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint spec: ") + e.what());
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: ") + e.what());
  }
  if (!doc.contains("params")) throw LoadError("checkpoint: missing params");
  c.params = params_from_json(doc.at("params"), c.spec);
  c.metadata = doc.value("metadata", json::object());
  return c;
}

}  // namespace wgcs::nn

#endif  // WGCS_NN_HPP
