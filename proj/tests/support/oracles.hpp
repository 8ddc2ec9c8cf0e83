#ifndef WGCS_TEST_ORACLES_HPP
#define WGCS_TEST_ORACLES_HPP

// Reference computations written independently of the library code paths
// they check: loops instead of Eigen expressions, enumeration instead of
// assignment solvers, quadrature instead of closed forms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "wgcs/nn.hpp"

namespace oracle {

using Matrix = Eigen::MatrixXd;

/// min over all n! bijections of (1/n) sum_i ||a_i - b_pi(i)||_1.
inline double brute_force_w1(const Matrix& a, const Matrix& b) {
  const auto n = static_cast<int>(a.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < a.cols(); ++k) cost += std::abs(a(i, k) - b(perm[static_cast<std::size_t>(i)], k));
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

/// Minimum-cost assignment value by enumeration.
inline double brute_force_assignment(const Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Composite Simpson rule with `intervals` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (hi - lo) / intervals;
  double s = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

/// Scalar-loop MLP forward pass for a single input.
inline std::vector<double> mlp_forward(const wgcs::nn::NetworkSpec& spec, const wgcs::nn::NetworkParams& p,
                                       std::vector<double> h) {
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Matrix& w = p.weight(l);
    const Matrix& b = p.bias(l);
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double acc = b(0, o);
      for (Eigen::Index i = 0; i < w.cols(); ++i) acc += w(o, i) * h[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = acc;
    }
    const bool last = l + 1 == spec.layer_count();
    for (double& v : next) {
      if (!last) {
        switch (spec.hidden[l].activation) {
          case wgcs::nn::Activation::relu: v = v > 0.0 ? v : 0.0; break;
          case wgcs::nn::Activation::tanh: v = std::tanh(v); break;
          case wgcs::nn::Activation::identity: break;
        }
      } else {
        switch (spec.output.kind) {
          case wgcs::nn::OutputActivation::Kind::identity: break;
          case wgcs::nn::OutputActivation::Kind::tanh: v = spec.output.bound * std::tanh(v); break;
          case wgcs::nn::OutputActivation::Kind::clip: v = std::min(spec.output.bound, std::max(-spec.output.bound, v)); break;
        }
      }
    }
    h = std::move(next);
  }
  return h;
}

/// Pre-activation values of every hidden ReLU unit for one input (kink detection).
inline double min_relu_margin(const wgcs::nn::NetworkSpec& spec, const wgcs::nn::NetworkParams& p,
                              std::vector<double> h) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < spec.layer_count(); ++l) {
    const Matrix& w = p.weight(l);
    std::vector<double> next(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double acc = p.bias(l)(0, o);
      for (Eigen::Index i = 0; i < w.cols(); ++i) acc += w(o, i) * h[static_cast<std::size_t>(i)];
      if (spec.hidden[l].activation == wgcs::nn::Activation::relu) {
        margin = std::min(margin, std::abs(acc));
        acc = acc > 0.0 ? acc : 0.0;
      } else if (spec.hidden[l].activation == wgcs::nn::Activation::tanh) {
        acc = std::tanh(acc);
      }
      next[static_cast<std::size_t>(o)] = acc;
    }
    h = std::move(next);
  }
  return margin;
}

/// Mean and SD of a finite Gaussian mixture.
struct Moments {
  double mean;
  double sd;
};

inline Moments gaussian_mixture_moments(const std::vector<double>& w, const std::vector<double>& mu,
                                        const std::vector<double>& sd) {
  double m = 0.0;
  double second = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    m += w[k] * mu[k];
    second += w[k] * (sd[k] * sd[k] + mu[k] * mu[k]);
  }
  return {m, std::sqrt(second - m * m)};
}

/// Y = base * exp(eps / 2), eps ~ 0.5 N(-2, 1) + 0.5 N(2, 1): lognormal moments per component.
inline Moments m2_moments(double base) {
  // E exp(t eps) for eps ~ N(c, 1) is exp(t c + t^2 / 2).
  double first = 0.0;
  double second = 0.0;
  for (double c : {-2.0, 2.0}) {
    first += 0.5 * std::exp(0.5 * c + 0.125);
    second += 0.5 * std::exp(c + 0.5);
  }
  return {base * first, std::abs(base) * std::sqrt(second - first * first)};
}

/// Sample mean and standard error of the mean.
struct MonteCarlo {
  double mean;
  double se;
  double sd;
  double sd_se;  // delta-method SE of the sample SD
};

inline MonteCarlo summarize(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  const double sd = std::sqrt(m2);
  // Var(s^2) ~ (m4 - m2^2) / n, and SE(s) ~ SE(s^2) / (2 s).
  return {m, sd / std::sqrt(n), sd, std::sqrt((m4 - m2 * m2) / n) / (2.0 * sd)};
}

inline wgcs::nn::Network linear_network(const std::vector<double>& w, double b) {
  wgcs::nn::NetworkSpec spec;
  spec.input_dim = w.size();
  spec.output_dim = 1;
  wgcs::nn::NetworkParams p;
  Matrix W(1, static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) W(0, static_cast<Eigen::Index>(i)) = w[i];
  p.tensors = {W, Matrix::Constant(1, 1, b)};
  return {spec, p};
}

/// Random MLP: up to `max_layers` hidden layers of width <= `max_width`, mixed activations.
inline wgcs::nn::Network random_mlp(std::mt19937_64& rng, std::size_t input_dim, std::size_t output_dim,
                                    int max_layers, int max_width, bool relu_only = false) {
  std::uniform_int_distribution<int> layers(1, max_layers);
  std::uniform_int_distribution<int> width(1, max_width);
  std::bernoulli_distribution coin(0.5);
  wgcs::nn::NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  const int L = layers(rng);
  for (int l = 0; l < L; ++l)
    spec.hidden.push_back({static_cast<std::size_t>(width(rng)),
                           relu_only || coin(rng) ? wgcs::nn::Activation::relu : wgcs::nn::Activation::tanh});
  wgcs::nn::NetworkParams p = wgcs::nn::build_network(spec, rng());
  std::normal_distribution<double> z(0.0, 0.3);
  for (std::size_t l = 0; l < spec.layer_count(); ++l)
    for (Eigen::Index j = 0; j < p.bias(l).size(); ++j) p.bias(l)(0, j) = z(rng);
  return {spec, p};
}

}  // namespace oracle

#endif  // WGCS_TEST_ORACLES_HPP
