#ifndef WGCS_SYNTH_HPP
#define WGCS_SYNTH_HPP

// Synthetic benchmarks: the two-moon model and the nonparametric models M1-M3,
// with closed-form conditional moments for M1-M3.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "data.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace wgcs::synth {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class ModelKind { two_moon, m1, m2, m3 };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::two_moon: return "two_moon";
    case ModelKind::m1: return "m1";
    case ModelKind::m2: return "m2";
    case ModelKind::m3: return "m3";
  }
  return "?";
}

inline ModelKind model_from_string(const std::string& s) {
  if (s == "two_moon") return ModelKind::two_moon;
  if (s == "m1") return ModelKind::m1;
  if (s == "m2") return ModelKind::m2;
  if (s == "m3") return ModelKind::m3;
  throw ConfigError("unknown synthetic model '" + s + "'");
}

/// Nuisance-free dimension each model reads from X.
inline Eigen::Index active_dims(ModelKind k) {
  switch (k) {
    case ModelKind::two_moon: return 2;
    case ModelKind::m1:
    case ModelKind::m2: return 5;
    case ModelKind::m3: return 2;
  }
  return 0;
}

struct SynthModel {
  ModelKind kind = ModelKind::m1;
  double sigma = 0.1;
  Eigen::Index d = 5;

  static SynthModel two_moon(double sigma) { return {ModelKind::two_moon, sigma, 2}; }
  static SynthModel m1(Eigen::Index d = 5) { return {ModelKind::m1, 0.0, d}; }
  static SynthModel m2(Eigen::Index d = 5) { return {ModelKind::m2, 0.0, d}; }
  static SynthModel m3(Eigen::Index d = 2) { return {ModelKind::m3, 0.0, d}; }

  void validate() const {
    if (kind == ModelKind::two_moon) {
      if (!(sigma > 0.0)) throw ConfigError("two_moon sigma must be positive");
      return;
    }
    if (d < active_dims(kind))
      throw ConfigError(std::string(to_string(kind)) + " needs d >= " + std::to_string(active_dims(kind)));
  }
};

// ---------------------------------------------------------------------------
// Two moons. X is the class label in {1, 2}, encoded one-hot as (x_1, x_2).

/// Noise-free point plus noise (e1, e2) for class 1 or 2 at angle alpha.
inline RowVector two_moon_response(int cls, double alpha, double e1, double e2) {
  RowVector y(2);
  if (cls == 1) {
    y << std::cos(alpha) + 0.5 + e1, std::sin(alpha) - 1.0 / 6.0 + e2;
  } else if (cls == 2) {
    y << std::cos(alpha) - 0.5 + e1, -std::sin(alpha) + 1.0 / 6.0 + e2;
  } else {
    throw ContractError("two_moon class must be 1 or 2");
  }
  return y;
}

inline RowVector two_moon_onehot(int cls) {
  RowVector x = RowVector::Zero(2);
  x(cls - 1) = 1.0;
  return x;
}

/// `count` draws of Y | X = cls.
inline Matrix sample_two_moon(int cls, Eigen::Index count, double sigma, Rng& rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, sigma);
  Matrix y(count, 2);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double a = angle(rng);
    const double e1 = noise(rng);
    const double e2 = noise(rng);
    y.row(i) = two_moon_response(cls, a, e1, e2);
  }
  return y;
}

/// n/2 rows of class 1 followed by n/2 rows of class 2.
inline PairedDataset gen_two_moon(Eigen::Index n, double sigma, std::uint64_t seed) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("two_moon needs a positive even n");
  if (!(sigma > 0.0)) throw ConfigError("two_moon sigma must be positive");
  Rng rng = make_rng(seed, "synth.two_moon");
  const Eigen::Index half = n / 2;
  PairedDataset d;
  d.x = Matrix::Zero(n, 2);
  d.y.resize(n, 2);
  d.x.topRows(half).col(0).setOnes();
  d.x.bottomRows(half).col(1).setOnes();
  d.y.topRows(half) = sample_two_moon(1, half, sigma, rng);
  d.y.bottomRows(half) = sample_two_moon(2, half, sigma, rng);
  d.provenance = "two_moon(sigma=" + format_double(sigma) + ",seed=" + std::to_string(seed) + ")";
  return d;
}

// ---------------------------------------------------------------------------
// M1-M3. X ~ N(0, I_d); only the leading components enter the response.

inline double m1_mean(const Eigen::Ref<const RowVector>& x) {
  return x(0) * x(0) + std::exp(x(1) + x(2) / 3.0) + std::sin(x(3) + x(4));
}

inline double m2_base(const Eigen::Ref<const RowVector>& x) {
  return 5.0 + x(0) * x(0) / 3.0 + x(1) * x(1) + x(2) * x(2) + x(3) + x(4);
}

inline double m3_location(const Eigen::Ref<const RowVector>& x) { return 1.0 + x(0) + 0.5 * x(1); }

inline double m1_response(const Eigen::Ref<const RowVector>& x, double eps) { return m1_mean(x) + eps; }

inline double m2_response(const Eigen::Ref<const RowVector>& x, double eps) {
  return m2_base(x) * std::exp(0.5 * eps);
}

struct M3Draw {
  double value;
  int component;  // 1: N(-mu, 0.5^2) taken when U <= 1/3; 2: N(mu, 1)
};

inline M3Draw m3_draw(const Eigen::Ref<const RowVector>& x, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const double mu = m3_location(x);
  const double u = unif(rng);
  const double e = z(rng);
  if (u <= 1.0 / 3.0) return {-mu + 0.5 * e, 1};
  return {mu + e, 2};
}

/// One draw of Y | X = x for M1-M3.
inline double draw_response(ModelKind kind, const Eigen::Ref<const RowVector>& x, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  switch (kind) {
    case ModelKind::m1:
      return m1_response(x, z(rng));
    case ModelKind::m2: {
      std::bernoulli_distribution coin(0.5);
      const double centre = coin(rng) ? 2.0 : -2.0;
      return m2_response(x, centre + z(rng));
    }
    case ModelKind::m3:
      return m3_draw(x, rng).value;
    case ModelKind::two_moon:
      break;
  }
  throw ConfigError("draw_response does not support two_moon");
}

inline Matrix sample_predictors(Eigen::Index n, Eigen::Index d, Rng& rng) { return standard_normal(rng, n, d); }

inline PairedDataset gen_regression(const SynthModel& model, Eigen::Index n, std::uint64_t seed) {
  model.validate();
  if (model.kind == ModelKind::two_moon) throw ConfigError("use gen_two_moon for two_moon");
  if (n <= 0) throw ConfigError("sample size must be positive");
  Rng xr = make_rng(seed, std::string("synth.x.") + to_string(model.kind));
  Rng yr = make_rng(seed, std::string("synth.y.") + to_string(model.kind));
  PairedDataset d;
  d.x = sample_predictors(n, model.d, xr);
  d.y.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) d.y(i, 0) = draw_response(model.kind, d.x.row(i), yr);
  d.provenance = std::string(to_string(model.kind)) + "(d=" + std::to_string(model.d) + ",seed=" + std::to_string(seed) + ")";
  return d;
}

inline PairedDataset gen_m1(Eigen::Index n, Eigen::Index d, std::uint64_t seed) { return gen_regression(SynthModel::m1(d), n, seed); }
inline PairedDataset gen_m2(Eigen::Index n, Eigen::Index d, std::uint64_t seed) { return gen_regression(SynthModel::m2(d), n, seed); }
inline PairedDataset gen_m3(Eigen::Index n, Eigen::Index d, std::uint64_t seed) { return gen_regression(SynthModel::m3(d), n, seed); }

inline PairedDataset generate(const SynthModel& model, Eigen::Index n, std::uint64_t seed) {
  if (model.kind == ModelKind::two_moon) return gen_two_moon(n, model.sigma, seed);
  return gen_regression(model, n, seed);
}

struct ConditionalStats {
  double mean;
  double sd;
};

/// Closed-form E(Y | X = x) and SD(Y | X = x).
inline ConditionalStats true_conditional_stats(ModelKind kind, const Eigen::Ref<const RowVector>& x) {
  switch (kind) {
    case ModelKind::m1:
      return {m1_mean(x), 1.0};
    case ModelKind::m2: {
      // eps ~ 0.5 N(-2,1) + 0.5 N(2,1); E exp(t eps) per component is exp(t mu + t^2 / 2).
      const double b = m2_base(x);
      const double e1 = 0.5 * (std::exp(-1.0 + 0.125) + std::exp(1.0 + 0.125));
      const double e2 = 0.5 * (std::exp(-2.0 + 0.5) + std::exp(2.0 + 0.5));
      return {b * e1, std::abs(b) * std::sqrt(e2 - e1 * e1)};
    }
    case ModelKind::m3: {
      const double mu = m3_location(x);
      const double mean = mu / 3.0;
      const double second = (1.0 / 3.0) * (0.25 + mu * mu) + (2.0 / 3.0) * (1.0 + mu * mu);
      return {mean, std::sqrt(second - mean * mean)};
    }
    case ModelKind::two_moon:
      break;
  }
  throw ConfigError("true_conditional_stats does not support two_moon");
}

}  // namespace wgcs::synth

#endif  // WGCS_SYNTH_HPP
