#ifndef WGCS_SAMPLER_HPP
#define WGCS_SAMPLER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "data.hpp"
#include "error.hpp"
#include "json_util.hpp"
#include "nn.hpp"
#include "rng.hpp"
#include "wgan.hpp"

namespace wgcs::sampler {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr Eigen::Index kDefaultDraws = 10000;

/// A frozen generator plus everything needed to draw Y | X = x in original units.
class ConditionalSampler {
 public:
  ConditionalSampler(nn::Network generator, int noise_dim, Standardization stats, std::uint64_t base_seed)
      : generator_(std::move(generator)), noise_dim_(noise_dim), stats_(std::move(stats)), base_seed_(base_seed) {
    if (noise_dim_ < 1) throw ContractError("noise_dim must be >= 1");
    if (static_cast<Eigen::Index>(generator_.spec.input_dim) != noise_dim_ + stats_.x.mean.size())
      throw ContractError("generator input_dim must equal noise_dim + x_dim");
    if (static_cast<Eigen::Index>(generator_.spec.output_dim) != stats_.y.mean.size())
      throw ContractError("generator output_dim must equal y_dim");
  }

  /// Sampler over unstandardized data: identity statistics.
  static ConditionalSampler unstandardized(nn::Network generator, int noise_dim, std::uint64_t base_seed) {
    const auto q = static_cast<Eigen::Index>(generator.spec.output_dim);
    const auto d = static_cast<Eigen::Index>(generator.spec.input_dim) - noise_dim;
    if (d < 1) throw ContractError("generator input_dim must exceed noise_dim");
    return {std::move(generator), noise_dim, {ColumnStats::identity(d), ColumnStats::identity(q)}, base_seed};
  }

  /// Reads noise_dim, standardization and seed from checkpoint metadata.
  static ConditionalSampler from_checkpoint(const nn::Checkpoint& ck) {
    const json& md = ck.metadata;
    if (!md.contains("noise_dim")) throw LoadError("checkpoint metadata lacks noise_dim");
    const int m = md.at("noise_dim").get<int>();
    const std::uint64_t seed = md.value("seed", std::uint64_t{0});
    if (md.contains("standardization"))
      return {{ck.spec, ck.params}, m, standardization_from_json(md.at("standardization")), seed};
    return unstandardized({ck.spec, ck.params}, m, seed);
  }

  Eigen::Index x_dim() const { return stats_.x.mean.size(); }
  Eigen::Index y_dim() const { return stats_.y.mean.size(); }
  int noise_dim() const { return noise_dim_; }
  std::uint64_t base_seed() const { return base_seed_; }
  const nn::Network& generator() const { return generator_; }
  const Standardization& standardization() const { return stats_; }

  /// J draws G(eta_j, x), eta_j ~ N(0, I_m), in original units. The noise
  /// stream is keyed by (base seed, query_index).
  Matrix sample(const RowVector& x, Eigen::Index draws, std::uint64_t query_index = 0) const {
    return stats_.y.invert(sample_standardized(x, draws, query_index));
  }

  Matrix sample_standardized(const RowVector& x, Eigen::Index draws, std::uint64_t query_index = 0) const {
    if (draws < 1) throw ContractError("J must be >= 1");
    if (x.size() != x_dim())
      throw ContractError("query has " + std::to_string(x.size()) + " predictors, expected " + std::to_string(x_dim()));
    Rng rng = make_rng(base_seed_, "sampler.noise", query_index);
    const Matrix noise = standard_normal(rng, draws, noise_dim_);
    const Matrix xs = stats_.x.apply(Matrix(x)).replicate(draws, 1);
    return generator_(wgan::generator_inputs(noise, xs));
  }

 private:
  nn::Network generator_;
  int noise_dim_;
  Standardization stats_;
  std::uint64_t base_seed_;
};

// ---------------------------------------------------------------------------
// Functionals of a sample matrix (rows are draws)

inline RowVector sample_mean(const Matrix& s) { return s.colwise().mean(); }

/// Unbiased (J - 1) sample standard deviation per column.
inline RowVector sample_sd(const Matrix& s) {
  if (s.rows() < 2) throw ContractError("standard deviation needs J >= 2");
  const RowVector mu = sample_mean(s);
  return ((s.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(s.rows() - 1)).sqrt().matrix();
}

/// Linear interpolation between order statistics: position (J - 1) p.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// levels.size() x q matrix of per-coordinate empirical quantiles.
inline Matrix empirical_quantiles(const Matrix& s, const std::vector<double>& levels) {
  if (levels.empty()) throw ContractError("quantile levels must be nonempty");
  for (double p : levels)
    if (!(p > 0.0 && p < 1.0)) throw ContractError("quantile levels must lie in (0, 1)");
  if (s.rows() == 0) throw ContractError("no samples");
  Matrix out(static_cast<Eigen::Index>(levels.size()), s.cols());
  std::vector<double> col(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) col[static_cast<std::size_t>(i)] = s(i, j);
    std::sort(col.begin(), col.end());
    for (std::size_t k = 0; k < levels.size(); ++k) out(static_cast<Eigen::Index>(k), j) = quantile_sorted(col, levels[k]);
  }
  return out;
}

/// Equal-tailed levels ((1 - nominal) / 2, (1 + nominal) / 2).
inline std::pair<double, double> interval_levels(double nominal) {
  if (!(nominal > 0.0 && nominal < 1.0)) throw ContractError("nominal level must lie in (0, 1)");
  return {(1.0 - nominal) / 2.0, (1.0 + nominal) / 2.0};
}

struct Interval {
  RowVector lo;
  RowVector hi;
};

inline Interval interval_from_samples(const Matrix& s, double nominal) {
  const auto [a, b] = interval_levels(nominal);
  const Matrix q = empirical_quantiles(s, {a, b});
  return {q.row(0), q.row(1)};
}

// ---------------------------------------------------------------------------
// Sampler-level estimators

inline Matrix sample_conditional(const ConditionalSampler& s, const RowVector& x, Eigen::Index draws,
                                 std::uint64_t query_index = 0) {
  return s.sample(x, draws, query_index);
}

inline RowVector conditional_mean(const ConditionalSampler& s, const RowVector& x, Eigen::Index draws,
                                  std::uint64_t query_index = 0) {
  return sample_mean(s.sample(x, draws, query_index));
}

inline RowVector conditional_sd(const ConditionalSampler& s, const RowVector& x, Eigen::Index draws,
                                std::uint64_t query_index = 0) {
  if (draws < 2) throw ContractError("conditional_sd needs J >= 2");
  return sample_sd(s.sample(x, draws, query_index));
}

inline Matrix conditional_quantile(const ConditionalSampler& s, const RowVector& x, Eigen::Index draws,
                                   const std::vector<double>& levels, std::uint64_t query_index = 0) {
  if (levels.empty()) throw ContractError("quantile levels must be nonempty");
  return empirical_quantiles(s.sample(x, draws, query_index), levels);
}

inline Interval prediction_interval(const ConditionalSampler& s, const RowVector& x, Eigen::Index draws,
                                    double nominal, std::uint64_t query_index = 0) {
  interval_levels(nominal);
  return interval_from_samples(s.sample(x, draws, query_index), nominal);
}

/// (1/J) sum_j g(G(eta_j, x)).
inline RowVector conditional_expectation(const ConditionalSampler& s, const RowVector& x, Eigen::Index draws,
                                         const std::function<RowVector(const RowVector&)>& g,
                                         std::uint64_t query_index = 0) {
  const Matrix samples = s.sample(x, draws, query_index);
  RowVector acc = g(samples.row(0));
  for (Eigen::Index j = 1; j < samples.rows(); ++j) acc += g(samples.row(j));
  return acc / static_cast<double>(samples.rows());
}

// ---------------------------------------------------------------------------
// Batch estimation report

struct EstimateRequest {
  Eigen::Index draws = kDefaultDraws;
  std::vector<double> levels;
  std::optional<double> nominal = 0.9;
};

struct EstimateRow {
  RowVector mean;
  std::optional<RowVector> sd;
  Matrix quantiles;  // levels x q
  std::optional<Interval> interval;
};

struct EstimateReport {
  EstimateRequest request;
  Eigen::Index y_dim = 0;
  std::vector<EstimateRow> rows;

  std::string to_csv() const {
    auto cols = [&](const std::string& name) {
      std::string h;
      for (Eigen::Index j = 0; j < y_dim; ++j) h += "," + name + "_" + std::to_string(j + 1);
      return h;
    };
    std::string out = "query" + cols("mean") + cols("sd");
    for (double p : request.levels) out += cols("q" + format_double(p));
    if (request.nominal) out += cols("lo") + cols("hi");
    out += ",J\n";
    auto put = [&](const RowVector& v) {
      for (Eigen::Index j = 0; j < v.size(); ++j) out += "," + format_double(v(j));
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out += std::to_string(i);
      put(r.mean);
      if (r.sd) {
        put(*r.sd);
      } else {
        for (Eigen::Index j = 0; j < y_dim; ++j) out += ",";
      }
      for (Eigen::Index k = 0; k < r.quantiles.rows(); ++k) put(r.quantiles.row(k));
      if (r.interval) {
        put(r.interval->lo);
        put(r.interval->hi);
      }
      out += "," + std::to_string(request.draws) + "\n";
    }
    return out;
  }
};

/// Per-query estimates; query i uses noise stream i, so duplicate query rows
/// receive different (independent) draws.
inline EstimateReport estimate(const ConditionalSampler& s, const Matrix& queries, const EstimateRequest& req) {
  if (req.draws < 1) throw ContractError("J must be >= 1");
  if (queries.cols() != s.x_dim()) throw ContractError("query columns do not match the sampler's predictor dimension");
  if (req.nominal) interval_levels(*req.nominal);
  EstimateReport rep{req, s.y_dim(), {}};
  rep.rows.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    const Matrix draws = s.sample(queries.row(i), req.draws, static_cast<std::uint64_t>(i));
    EstimateRow row;
    row.mean = sample_mean(draws);
    if (draws.rows() >= 2) row.sd = sample_sd(draws);
    if (!req.levels.empty()) row.quantiles = empirical_quantiles(draws, req.levels);
    if (req.nominal) row.interval = interval_from_samples(draws, *req.nominal);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace wgcs::sampler

#endif  // WGCS_SAMPLER_HPP
