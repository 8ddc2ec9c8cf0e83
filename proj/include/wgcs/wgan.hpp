#ifndef WGCS_WGAN_HPP
#define WGCS_WGAN_HPP

// Adversarial training of a conditional generator G(eta, x) against a critic
// D(x, y). The critic maximizes
//
//   mean_i D(x_i, G(eta_i, x_i)) - mean_i D(x_i, y_i) - penalty,
//
// the generator minimizes mean_i D(x_i, G(eta_i, x_i)). The Lipschitz constraint
// on D is imposed either by a gradient penalty on ||grad_(x,y) D||_2 or by
// clamping the critic parameters after every update.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <Eigen/Dense>

#include "autodiff.hpp"
#include "data.hpp"
#include "error.hpp"
#include "json_util.hpp"
#include "nn.hpp"
#include "optim.hpp"
#include "rng.hpp"

namespace wgcs::wgan {

using Matrix = Eigen::MatrixXd;
using nn::Network;

enum class LipschitzMode { gradient_penalty, weight_clip };
enum class PenaltyPoint { real_data, interpolated };

struct TrainConfig {
  double lambda = 10.0;
  int critic_steps = 5;
  int batch_size = 256;
  std::int64_t total_generator_steps = 10000;
  LipschitzMode lipschitz_mode = LipschitzMode::gradient_penalty;
  double clip_c = 0.01;
  PenaltyPoint penalty_point = PenaltyPoint::interpolated;
  int noise_dim = 1;
  std::uint64_t seed = 0;
  optim::AdamConfig generator_optimizer;
  optim::AdamConfig critic_optimizer;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (critic_steps < 1) throw ConfigError("critic_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (total_generator_steps < 0) throw ConfigError("total_generator_steps must be >= 0");
    if (noise_dim < 1) throw ConfigError("noise_dim must be >= 1");
    if (lipschitz_mode == LipschitzMode::weight_clip && !(clip_c > 0.0))
      throw ConfigError("clip_c must be positive in weight_clip mode");
    generator_optimizer.validate();
    critic_optimizer.validate();
  }
};

inline json train_config_to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"critic_steps", c.critic_steps},
          {"batch_size", c.batch_size},
          {"total_generator_steps", c.total_generator_steps},
          {"lipschitz_mode", c.lipschitz_mode == LipschitzMode::gradient_penalty ? "gradient_penalty" : "weight_clip"},
          {"clip_c", c.clip_c},
          {"penalty_point", c.penalty_point == PenaltyPoint::interpolated ? "interpolated" : "real_data"},
          {"noise_dim", c.noise_dim},
          {"seed", c.seed},
          {"generator_optimizer", optim::adam_config_to_json(c.generator_optimizer)},
          {"critic_optimizer", optim::adam_config_to_json(c.critic_optimizer)}};
}

inline TrainConfig train_config_from_json(const json& j) {
  require_known_keys(j,
                     {"lambda", "critic_steps", "batch_size", "total_generator_steps", "lipschitz_mode", "clip_c",
                      "penalty_point", "noise_dim", "seed", "generator_optimizer", "critic_optimizer"},
                     "train config");
  TrainConfig c;
  c.lambda = get_or(j, "lambda", c.lambda);
  c.critic_steps = get_or(j, "critic_steps", c.critic_steps);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.total_generator_steps = get_or(j, "total_generator_steps", c.total_generator_steps);
  c.clip_c = get_or(j, "clip_c", c.clip_c);
  c.noise_dim = get_or(j, "noise_dim", c.noise_dim);
  c.seed = get_or(j, "seed", c.seed);
  const auto mode = get_or<std::string>(j, "lipschitz_mode", "gradient_penalty");
  if (mode == "gradient_penalty") {
    c.lipschitz_mode = LipschitzMode::gradient_penalty;
  } else if (mode == "weight_clip") {
    c.lipschitz_mode = LipschitzMode::weight_clip;
  } else {
    throw ConfigError("unknown lipschitz_mode '" + mode + "'");
  }
  const auto point = get_or<std::string>(j, "penalty_point", "interpolated");
  if (point == "interpolated") {
    c.penalty_point = PenaltyPoint::interpolated;
  } else if (point == "real_data") {
    c.penalty_point = PenaltyPoint::real_data;
  } else {
    throw ConfigError("unknown penalty_point '" + point + "'");
  }
  if (j.contains("generator_optimizer")) c.generator_optimizer = optim::adam_config_from_json(j.at("generator_optimizer"));
  if (j.contains("critic_optimizer")) c.critic_optimizer = optim::adam_config_from_json(j.at("critic_optimizer"));
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Objective pieces

/// Generator input rows [eta, x].
inline Matrix generator_inputs(const Matrix& noise, const Matrix& x) {
  if (noise.rows() != x.rows()) throw ContractError("noise and predictor row counts differ");
  Matrix out(x.rows(), noise.cols() + x.cols());
  out << noise, x;
  return out;
}

/// Critic input rows [x, y].
inline Matrix critic_inputs(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw ContractError("x and y row counts differ");
  Matrix out(x.rows(), x.cols() + y.cols());
  out << x, y;
  return out;
}

inline void check_pair(const Network& critic, const Network& generator, Eigen::Index x_dim, Eigen::Index y_dim,
                       Eigen::Index noise_dim) {
  if (static_cast<Eigen::Index>(generator.spec.input_dim) != noise_dim + x_dim)
    throw ContractError("generator input_dim must equal noise_dim + x_dim");
  if (static_cast<Eigen::Index>(generator.spec.output_dim) != y_dim)
    throw ContractError("generator output_dim must equal y_dim");
  if (static_cast<Eigen::Index>(critic.spec.input_dim) != x_dim + y_dim)
    throw ContractError("critic input_dim must equal x_dim + y_dim");
  if (critic.spec.output_dim != 1) throw ContractError("critic must be scalar-valued");
}

/// (1/n) sum D(x_i, G(eta_i, x_i)) - (1/n) sum D(x_i, y_i).
inline double empirical_objective(const Network& critic, const Network& generator, const Matrix& x, const Matrix& y,
                                  const Matrix& noise) {
  if (x.rows() == 0) throw ContractError("empty batch");
  if (x.rows() != y.rows() || x.rows() != noise.rows()) throw ContractError("batch row counts differ");
  check_pair(critic, generator, x.cols(), y.cols(), noise.cols());
  const Matrix fake = generator(generator_inputs(noise, x));
  return critic(critic_inputs(x, fake)).mean() - critic(critic_inputs(x, y)).mean();
}

/// Same objective with generator outputs supplied directly.
inline double empirical_objective(const Network& critic, const Matrix& x, const Matrix& y, const Matrix& fake) {
  if (x.rows() == 0) throw ContractError("empty batch");
  return critic(critic_inputs(x, fake)).mean() - critic(critic_inputs(x, y)).mean();
}

/// Points at which the input gradient is penalized: the real pairs, or
/// (x_i, a_i y_i + (1 - a_i) fake_i) with a_i ~ U[0, 1].
inline Matrix penalty_points(const Matrix& x, const Matrix& y, const Matrix& fake, PenaltyPoint mode, Rng& rng) {
  if (mode == PenaltyPoint::real_data) return critic_inputs(x, y);
  if (fake.rows() != y.rows() || fake.cols() != y.cols()) throw ContractError("fake and real responses differ in shape");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix mixed(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double a = unif(rng);
    mixed.row(i) = a * y.row(i) + (1.0 - a) * fake.row(i);
  }
  return critic_inputs(x, mixed);
}

struct PenaltyTerm {
  ad::Var value;   // lambda * mean_i (||grad_i|| - 1)^2, differentiable in the critic tensors
  Matrix norms;    // ||grad_(x,y) D|| per point
};

/// Records the penalty on `tape`; the input gradient is taken with a recorded
/// sweep so the result can be differentiated with respect to `critic_tensors`.
inline PenaltyTerm gradient_penalty(ad::Tape& tape, const nn::NetworkSpec& critic_spec,
                                    const nn::BoundParams& critic_tensors, const Matrix& points, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be >= 0");
  const ad::Var z = tape.leaf(points);
  const ad::Var out = nn::forward(tape, critic_spec, critic_tensors, z);
  const ad::Var g = tape.grad(tape.sum(out), {z}).front();
  const ad::Var norms = tape.sqrt(tape.sum_cols(tape.square(g)));
  const ad::Var value = tape.scale(tape.mean(tape.square(tape.shift(norms, -1.0))), lambda);
  return {value, norms.value()};
}

/// Value-only penalty for a fixed batch; `mixing_seed` drives the interpolation weights.
inline double gradient_penalty(const Network& critic, const Matrix& x, const Matrix& y, const Matrix& fake,
                               double lambda, PenaltyPoint mode, std::uint64_t mixing_seed) {
  Rng rng = make_rng(mixing_seed, "wgan.mix");
  const Matrix points = penalty_points(x, y, fake, mode, rng);
  ad::Tape tape;
  const auto bound = nn::bind(tape, critic.params, false);
  return gradient_penalty(tape, critic.spec, bound, points, lambda).value.scalar();
}

/// ||grad_(x,y) D|| at each row of `points`.
inline Eigen::VectorXd input_gradient_norms(const Network& critic, const Matrix& points) {
  ad::Tape tape;
  const auto bound = nn::bind(tape, critic.params, false);
  const ad::Var z = tape.leaf(points);
  const ad::Var out = nn::forward(tape, critic.spec, bound, z);
  const Matrix g = tape.gradient(tape.sum(out), {z}).front();
  return g.rowwise().norm();
}

struct LipschitzSummary {
  double median = 0.0;
  double max = 0.0;
};

namespace detail {
inline double median(Eigen::VectorXd v) {
  if (v.size() == 0) return 0.0;
  std::sort(v.data(), v.data() + v.size());
  const Eigen::Index n = v.size();
  return n % 2 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}
}  // namespace detail

inline LipschitzSummary lipschitz_monitor(const Network& critic, const Matrix& probe_points) {
  const Eigen::VectorXd norms = input_gradient_norms(critic, probe_points);
  if (norms.size() == 0) return {};
  return {detail::median(norms), norms.maxCoeff()};
}

// ---------------------------------------------------------------------------
// Sizing

struct NetworkSizes {
  std::size_t critic_width = 1;
  std::size_t critic_depth = 2;
  std::size_t generator_width = 1;
  std::size_t generator_depth = 2;
};

/// Widths at fixed depth 2 satisfying W1 L1 >= ceil(sqrt(n)) and W2^2 L2 >= c q n.
inline NetworkSizes size_networks(std::uint64_t n, std::uint64_t q, double c = 12.0) {
  if (n < 1 || q < 1) throw ContractError("size_networks needs n >= 1 and q >= 1");
  NetworkSizes s;
  auto target = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  while (target * target < n) ++target;
  while (target > 1 && (target - 1) * (target - 1) >= n) --target;
  s.critic_width = static_cast<std::size_t>((target + s.critic_depth - 1) / s.critic_depth);
  const double gen_target = c * static_cast<double>(q) * static_cast<double>(n);
  auto w = static_cast<std::uint64_t>(std::ceil(std::sqrt(gen_target / static_cast<double>(s.generator_depth))));
  while (w > 1 && static_cast<double>((w - 1) * (w - 1) * s.generator_depth) >= gen_target) --w;
  while (static_cast<double>(w * w * s.generator_depth) < gen_target) ++w;
  s.generator_width = static_cast<std::size_t>(w);
  return s;
}

// ---------------------------------------------------------------------------
// Training

enum class Phase { critic, generator };

struct StepRecord {
  std::int64_t step = 0;
  Phase phase = Phase::critic;
  double objective = 0.0;
  double penalty = 0.0;
  double grad_norm_median = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> records;

  /// Columns: step, phase, objective, penalty, grad_norm_median, elapsed_ms.
  std::string to_csv() const {
    std::string out = "step,phase,objective,penalty,grad_norm_median,elapsed_ms\n";
    for (const auto& r : records) {
      out += std::to_string(r.step) + ',' + (r.phase == Phase::critic ? "critic" : "generator") + ',' +
             format_double(r.objective) + ',' + format_double(r.penalty) + ',' + format_double(r.grad_norm_median) +
             ',' + format_double(r.elapsed_ms) + '\n';
    }
    return out;
  }
};

/// Everything the alternating updates mutate. `data` is the (already
/// standardized) training sample.
struct TrainingState {
  PairedDataset data;
  TrainConfig config;
  Network generator;
  Network critic;
  optim::AdamState generator_opt;
  optim::AdamState critic_opt;
  Rng batch_rng;
  Rng noise_rng;
  Rng mix_rng;
  std::int64_t step = 0;
  TrainReport report;
};

inline TrainingState init_training(PairedDataset data, const nn::NetworkSpec& generator_spec,
                                   const nn::NetworkSpec& critic_spec, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw ConfigError("training dataset is empty");
  data.validate();
  TrainingState s{std::move(data),
                  config,
                  Network::build(generator_spec, derive_seed(config.seed, "wgan.generator")),
                  Network::build(critic_spec, derive_seed(config.seed, "wgan.critic")),
                  {},
                  {},
                  make_rng(config.seed, "wgan.batch"),
                  make_rng(config.seed, "wgan.noise"),
                  make_rng(config.seed, "wgan.mix"),
                  0,
                  {}};
  check_pair(s.critic, s.generator, s.data.x_dim(), s.data.y_dim(), config.noise_dim);
  s.generator_opt = optim::AdamState(config.generator_optimizer, s.generator.params.tensors);
  s.critic_opt = optim::AdamState(config.critic_optimizer, s.critic.params.tensors);
  if (config.lipschitz_mode == LipschitzMode::weight_clip) optim::weight_clip(s.critic.params.tensors, config.clip_c);
  return s;
}

namespace detail {

struct Batch {
  Matrix x;
  Matrix y;
};

inline Batch sample_batch(const PairedDataset& data, int batch_size, Rng& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, data.size() - 1);
  Batch b{Matrix(batch_size, data.x_dim()), Matrix(batch_size, data.y_dim())};
  for (int i = 0; i < batch_size; ++i) {
    const Eigen::Index r = pick(rng);
    b.x.row(i) = data.x.row(r);
    b.y.row(i) = data.y.row(r);
  }
  return b;
}

/// Each step allocates and frees many ~100 KB tape buffers; keep glibc from
/// serving them with fresh mmap calls every time.
inline void tune_allocator() {
#if defined(__GLIBC__) && defined(M_MMAP_THRESHOLD)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)once;
#endif
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace detail

/// One ascent step for the critic on objective - penalty (implemented as
/// descent on penalty - objective). In weight_clip mode the penalty is
/// omitted and the critic is clamped after the update.
inline void critic_step(TrainingState& s) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = s.config;
  const std::int64_t step = s.step + 1;
  auto batch = detail::sample_batch(s.data, cfg.batch_size, s.batch_rng);
  const Matrix noise = standard_normal(s.noise_rng, cfg.batch_size, cfg.noise_dim);
  const Matrix fake = s.generator(generator_inputs(noise, batch.x));

  ad::Tape tape;
  const auto phi = nn::bind(tape, s.critic.params, true);
  const ad::Var d_fake = nn::forward(tape, s.critic.spec, phi, tape.constant(critic_inputs(batch.x, fake)));
  const ad::Var d_real = nn::forward(tape, s.critic.spec, phi, tape.constant(critic_inputs(batch.x, batch.y)));
  const ad::Var objective = tape.sub(tape.mean(d_fake), tape.mean(d_real));

  StepRecord rec;
  rec.step = step;
  rec.phase = Phase::critic;
  rec.objective = objective.scalar();
  ad::Var loss = tape.neg(objective);
  if (cfg.lipschitz_mode == LipschitzMode::gradient_penalty) {
    const Matrix points = penalty_points(batch.x, batch.y, fake, cfg.penalty_point, s.mix_rng);
    const PenaltyTerm pen = gradient_penalty(tape, s.critic.spec, phi, points, cfg.lambda);
    rec.penalty = pen.value.scalar();
    rec.grad_norm_median = detail::median(pen.norms);
    loss = tape.add(loss, pen.value);
  } else {
    rec.grad_norm_median = detail::median(input_gradient_norms(s.critic, critic_inputs(batch.x, batch.y)));
  }
  if (!std::isfinite(loss.scalar())) throw TrainingDiverged(step, "non-finite critic loss");
  const auto grads = tape.gradient(loss, phi.tensors);
  try {
    optim::adam_step(s.critic.params.tensors, grads, s.critic_opt);
  } catch (const TrainingDiverged&) {
    throw TrainingDiverged(step, "non-finite critic gradient");
  }
  if (cfg.lipschitz_mode == LipschitzMode::weight_clip) optim::weight_clip(s.critic.params.tensors, cfg.clip_c);
  s.step = step;
  rec.elapsed_ms = detail::elapsed_ms(start);
  s.report.records.push_back(rec);
}

/// One descent step for the generator on (1/n) sum D(x_i, G(eta_i, x_i)) with fresh noise.
inline void generator_step(TrainingState& s) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = s.config;
  const std::int64_t step = s.step + 1;
  auto batch = detail::sample_batch(s.data, cfg.batch_size, s.batch_rng);
  const Matrix noise = standard_normal(s.noise_rng, cfg.batch_size, cfg.noise_dim);

  ad::Tape tape;
  const auto theta = nn::bind(tape, s.generator.params, true);
  const auto phi = nn::bind(tape, s.critic.params, false);
  const ad::Var fake =
      nn::forward(tape, s.generator.spec, theta, tape.constant(generator_inputs(noise, batch.x)));
  const ad::Var joint = tape.hconcat(tape.constant(batch.x), fake);
  const ad::Var loss = tape.mean(nn::forward(tape, s.critic.spec, phi, joint));
  if (!std::isfinite(loss.scalar())) throw TrainingDiverged(step, "non-finite generator loss");

  std::vector<ad::Var> wrt = theta.tensors;
  wrt.push_back(joint);
  auto grads = tape.gradient(loss, wrt);
  const Matrix joint_grad = grads.back() * static_cast<double>(cfg.batch_size);
  grads.pop_back();

  StepRecord rec;
  rec.step = step;
  rec.phase = Phase::generator;
  rec.objective = loss.scalar() - s.critic(critic_inputs(batch.x, batch.y)).mean();
  rec.penalty = 0.0;
  rec.grad_norm_median = detail::median(joint_grad.rowwise().norm());
  try {
    optim::adam_step(s.generator.params.tensors, grads, s.generator_opt);
  } catch (const TrainingDiverged&) {
    throw TrainingDiverged(step, "non-finite generator gradient");
  }
  s.step = step;
  rec.elapsed_ms = detail::elapsed_ms(start);
  s.report.records.push_back(rec);
}

struct TrainResult {
  Network generator;
  Network critic;
  TrainReport report;
};

/// Runs `critic_steps` critic updates then one generator update,
/// `total_generator_steps` times, on minibatches drawn with replacement.
inline TrainingState train_state(PairedDataset data, const nn::NetworkSpec& generator_spec,
                                 const nn::NetworkSpec& critic_spec, const TrainConfig& config) {
  detail::tune_allocator();
  TrainingState s = init_training(std::move(data), generator_spec, critic_spec, config);
  s.report.records.reserve(static_cast<std::size_t>(config.total_generator_steps * (config.critic_steps + 1)));
  for (std::int64_t g = 0; g < config.total_generator_steps; ++g) {
    for (int k = 0; k < config.critic_steps; ++k) critic_step(s);
    generator_step(s);
  }
  return s;
}

inline TrainResult train(PairedDataset data, const nn::NetworkSpec& generator_spec, const nn::NetworkSpec& critic_spec,
                         const TrainConfig& config) {
  TrainingState s = train_state(std::move(data), generator_spec, critic_spec, config);
  return {std::move(s.generator), std::move(s.critic), std::move(s.report)};
}

}  // namespace wgcs::wgan

#endif  // WGCS_WGAN_HPP
