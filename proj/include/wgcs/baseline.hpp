#ifndef WGCS_BASELINE_HPP
#define WGCS_BASELINE_HPP

// Conditional kernel density estimator with Gaussian product kernels and
// rule-of-thumb bandwidths h_j = 1.06 sigma_j n^(-1/(2k + d)).

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "data.hpp"
#include "error.hpp"

namespace wgcs::baseline {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

inline constexpr double kWeightFloor = 1e-300;

inline double ckde_bandwidth(double sd, double n, int order, Eigen::Index d) {
  if (!(sd > 0.0)) throw ConfigError("bandwidth needs a positive spread");
  if (!(n >= 1.0)) throw ConfigError("bandwidth needs n >= 1");
  return 1.06 * sd * std::pow(n, -1.0 / static_cast<double>(2 * order + d));
}

struct CkdeModel {
  Matrix x;       // n x d training predictors
  Vector y;       // n training responses
  RowVector hx;   // per-predictor bandwidths
  double hy = 1.0;
  int order = 2;

  /// Bandwidths from sample SDs (denominator n - 1); scalar response only.
  static CkdeModel fit(const PairedDataset& data, int order = 2) {
    data.validate();
    if (data.y_dim() != 1) throw ConfigError("CKDE supports a scalar response only");
    if (data.size() < 2) throw ConfigError("CKDE needs at least two training points");
    CkdeModel m;
    m.x = data.x;
    m.y = data.y.col(0);
    m.order = order;
    const auto n = static_cast<double>(data.size());
    const Eigen::Index d = data.x_dim();
    auto spread = [&](const Eigen::Ref<const Vector>& c) {
      return std::sqrt((c.array() - c.mean()).square().sum() / (n - 1.0));
    };
    m.hx.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) m.hx(j) = ckde_bandwidth(spread(m.x.col(j)), n, order, d);
    m.hy = ckde_bandwidth(spread(m.y), n, order, d);
    return m;
  }

  /// Explicit bandwidths, for tests and user-tuned fits.
  static CkdeModel with_bandwidths(Matrix x, Vector y, RowVector hx, double hy) {
    if (x.rows() != y.size() || x.rows() == 0) throw ContractError("CKDE needs matching nonempty x and y");
    if (hx.size() != x.cols()) throw ContractError("one bandwidth per predictor required");
    if (!(hy > 0.0) || (hx.array() <= 0.0).any()) throw ConfigError("bandwidths must be positive");
    return {std::move(x), std::move(y), std::move(hx), hy, 2};
  }
};

/// Normalized Nadaraya-Watson weights of the training points at x.
inline Vector ckde_weights(const CkdeModel& m, const RowVector& x) {
  if (x.size() != m.x.cols()) throw ContractError("query dimension does not match the CKDE model");
  const Matrix u = (m.x.rowwise() - x).array().rowwise() / m.hx.array();
  Vector w = (-0.5 * u.array().square().rowwise().sum()).exp().matrix();
  const double top = w.maxCoeff();
  if (!(top >= kWeightFloor)) throw DegenerateQuery("all kernel weights underflow at the query point");
  return w / w.sum();
}

inline double normal_pdf(double z, double sd) {
  return std::exp(-0.5 * (z / sd) * (z / sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

inline double ckde_conditional_density(const CkdeModel& m, const RowVector& x, double y) {
  const Vector w = ckde_weights(m, x);
  double f = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) f += w(i) * normal_pdf(y - m.y(i), m.hy);
  return f;
}

/// Exact moments of the Gaussian mixture implied by the weights.
inline double ckde_mean(const CkdeModel& m, const RowVector& x) { return ckde_weights(m, x).dot(m.y); }

inline double ckde_sd(const CkdeModel& m, const RowVector& x) {
  const Vector w = ckde_weights(m, x);
  const double mean = w.dot(m.y);
  const double second = w.dot((m.y.array().square() + m.hy * m.hy).matrix());
  return std::sqrt(std::max(0.0, second - mean * mean));
}

}  // namespace wgcs::baseline

#endif  // WGCS_BASELINE_HPP
