#ifndef WGCS_METRICS_HPP
#define WGCS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "json_util.hpp"

namespace wgcs::metrics {

using Matrix = Eigen::MatrixXd;

/// Equally weighted point set; one point per row.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(Matrix points) : points_(std::move(points)) {
    if (points_.rows() == 0 || points_.cols() == 0) throw ContractError("empirical distribution must be nonempty");
    if (!points_.allFinite()) throw ContractError("empirical distribution has non-finite coordinates");
  }

  const Matrix& points() const { return points_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

 private:
  Matrix points_;
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
/// potentials, O(n^3)). Returns assignment[row] = column.
inline std::vector<Eigen::Index> solve_assignment(const Matrix& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw ContractError("assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Eigen::Index> match(static_cast<std::size_t>(n + 1), 0);  // match[col] = row
  std::vector<Eigen::Index> way(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(n + 1));
  std::vector<char> used(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Eigen::Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(match[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(n));
  for (Eigen::Index j = 1; j <= n; ++j) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

inline Matrix l1_cost_matrix(const Matrix& a, const Matrix& b) {
  Matrix cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) cost(i, j) = (a.row(i) - b.row(j)).cwiseAbs().sum();
  return cost;
}

inline void check_comparable(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  if (a.size() != b.size())
    throw ContractError("exact_w1 needs equal sample sizes (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  if (a.dim() != b.dim()) throw ContractError("exact_w1 needs equal dimensions");
}

/// W1 with L1 ground cost through the assignment solver, any dimension.
inline double exact_w1_assignment(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  check_comparable(a, b);
  const Matrix cost = l1_cost_matrix(a.points(), b.points());
  const auto match = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(a.size());
}

/// One-dimensional W1: match order statistics.
inline double exact_w1_sorted(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  check_comparable(a, b);
  if (a.dim() != 1) throw ContractError("sorted W1 path is one-dimensional only");
  std::vector<double> x(a.points().data(), a.points().data() + a.size());
  std::vector<double> y(b.points().data(), b.points().data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x[i] - y[i]);
  return total / static_cast<double>(x.size());
}

/// Exact empirical 1-Wasserstein distance with cost ||u - v||_1.
inline double exact_w1(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  check_comparable(a, b);
  return a.dim() == 1 ? exact_w1_sorted(a, b) : exact_w1_assignment(a, b);
}

inline double exact_w1(const Matrix& a, const Matrix& b) {
  return exact_w1(EmpiricalDistribution(a), EmpiricalDistribution(b));
}

/// (1/K) sum_k mean_j (est_kj - oracle_kj)^2; rows are test points, columns response coordinates.
inline double mse(const Matrix& estimates, const Matrix& oracle) {
  if (estimates.rows() != oracle.rows() || estimates.cols() != oracle.cols())
    throw ContractError("mse: estimate and oracle shapes differ");
  if (estimates.rows() == 0) throw ContractError("mse: no test points");
  return (estimates - oracle).array().square().mean();
}

inline double mse_mean(const Matrix& estimated_means, const Matrix& true_means) { return mse(estimated_means, true_means); }
inline double mse_sd(const Matrix& estimated_sds, const Matrix& true_sds) { return mse(estimated_sds, true_sds); }

/// Fraction of rows with lo <= value <= hi (every coordinate, for vector responses).
inline double interval_coverage(const Matrix& lo, const Matrix& hi, const Matrix& realized) {
  if (lo.rows() != realized.rows() || hi.rows() != realized.rows() || lo.cols() != realized.cols() ||
      hi.cols() != realized.cols())
    throw ContractError("interval_coverage: shapes differ");
  if (realized.rows() == 0) return 0.0;
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < realized.rows(); ++i) {
    bool ok = true;
    for (Eigen::Index j = 0; j < realized.cols(); ++j) ok = ok && lo(i, j) <= realized(i, j) && realized(i, j) <= hi(i, j);
    inside += ok ? 1 : 0;
  }
  return static_cast<double>(inside) / static_cast<double>(realized.rows());
}

/// One evaluation record as emitted by `eval` and consumed by bench reports.
struct MetricRecord {
  std::string metric;
  double value = 0.0;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
};

inline json to_json(const MetricRecord& r) {
  return {{"metric", r.metric}, {"value", r.value}, {"n", r.n}, {"seed", r.seed}};
}

}  // namespace wgcs::metrics

#endif  // WGCS_METRICS_HPP
