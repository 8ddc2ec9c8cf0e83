#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "wgcs/sampler.hpp"

namespace {

using namespace wgcs;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Single affine layer G(eta, x) = [eta, x] W^T + b.
nn::Network affine_generator(const Matrix& w, const RowVector& b, nn::OutputActivation out = nn::OutputActivation::identity()) {
  nn::Network g;
  g.spec.input_dim = static_cast<std::size_t>(w.cols());
  g.spec.output_dim = static_cast<std::size_t>(w.rows());
  g.spec.output = out;
  g.params.tensors = {w, b};
  return g;
}

sampler::ConditionalSampler eta_sampler(double scale = 1.0, double shift = 0.0) {
  // m = 1, d = 1, q = 1: G = scale * eta + shift.
  return sampler::ConditionalSampler::unstandardized(affine_generator(Matrix{{scale, 0.0}}, RowVector::Constant(1, shift)), 1, 17);
}

TEST(SampleConditional, ConstantGenerator) {
  const auto s = sampler::ConditionalSampler::unstandardized(affine_generator(Matrix::Zero(2, 3), RowVector{{4.0, -1.5}}), 1, 0);
  const Matrix draws = sampler::sample_conditional(s, RowVector{{0.3, 7.0}}, 25);
  ASSERT_EQ(draws.rows(), 25);
  for (Eigen::Index i = 0; i < 25; ++i) EXPECT_EQ(draws.row(i), (RowVector{{4.0, -1.5}}));
  EXPECT_EQ(sampler::conditional_sd(s, RowVector{{0.3, 7.0}}, 25), RowVector::Zero(2));
  const auto iv = sampler::prediction_interval(s, RowVector{{0.3, 7.0}}, 25, 0.9);
  EXPECT_EQ(iv.lo, iv.hi);
  const Matrix q = sampler::conditional_quantile(s, RowVector{{0.3, 7.0}}, 25, {0.1, 0.5, 0.9});
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_EQ(q.row(k), (RowVector{{4.0, -1.5}}));
}

TEST(SampleConditional, IdentityPassthrough) {
  Matrix w(2, 3);
  w << 0, 1, 0, 0, 0, 1;
  const auto s = sampler::ConditionalSampler::unstandardized(affine_generator(w, RowVector::Zero(2)), 1, 0);
  const RowVector x{{-2.0, 0.25}};
  const Matrix draws = s.sample(x, 10);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(draws.row(i), x);
}

TEST(SampleConditional, TanhOutputRange) {
  const auto s = sampler::ConditionalSampler::unstandardized(
      affine_generator(Matrix{{40.0, 1.0}}, RowVector::Zero(1), nn::OutputActivation::tanh(3.0)), 1, 2);
  const Matrix draws = s.sample(RowVector{{0.0}}, 5000);
  EXPECT_LE(draws.cwiseAbs().maxCoeff(), 3.0);
}

TEST(SampleConditional, DeterministicPerQueryIndex) {
  const auto s = eta_sampler();
  EXPECT_TRUE(s.sample(RowVector{{1.0}}, 50, 3) == s.sample(RowVector{{1.0}}, 50, 3));
  EXPECT_FALSE(s.sample(RowVector{{1.0}}, 50, 3) == s.sample(RowVector{{1.0}}, 50, 4));
}

TEST(SampleConditional, ContractErrors) {
  const auto s = eta_sampler();
  EXPECT_THROW(s.sample(RowVector{{1.0, 2.0}}, 5), ContractError);
  EXPECT_THROW(s.sample(RowVector{{1.0}}, 0), ContractError);
  EXPECT_THROW(sampler::conditional_sd(s, RowVector{{1.0}}, 1), ContractError);
  EXPECT_THROW(sampler::conditional_quantile(s, RowVector{{1.0}}, 10, {}), ContractError);
  EXPECT_THROW(sampler::conditional_quantile(s, RowVector{{1.0}}, 10, {1.0}), ContractError);
  EXPECT_THROW(sampler::prediction_interval(s, RowVector{{1.0}}, 10, 1.0), ContractError);
  EXPECT_THROW(sampler::ConditionalSampler(affine_generator(Matrix{{1.0, 0.0}}, RowVector::Zero(1)), 2,
                                           {ColumnStats::identity(1), ColumnStats::identity(1)}, 0),
               ContractError);
}

TEST(Moments, StandardNormalGenerator) {
  const auto s = eta_sampler();
  const RowVector x{{0.7}};
  EXPECT_LT(std::abs(sampler::conditional_mean(s, x, 100000)(0)), 0.02);
  EXPECT_LT(std::abs(sampler::conditional_sd(s, x, 100000)(0) - 1.0), 0.02);
  const RowVector sq = sampler::conditional_expectation(s, x, 100000, [](const RowVector& y) { return RowVector(y.array().square()); });
  EXPECT_LT(std::abs(sq(0) - 1.0), 0.03);
}

TEST(Moments, AffineGenerator) {
  const auto s = eta_sampler(2.0, 5.0);
  EXPECT_NEAR(sampler::conditional_mean(s, RowVector{{0.0}}, 100000)(0), 5.0, 0.04);
  EXPECT_NEAR(sampler::conditional_sd(s, RowVector{{0.0}}, 100000)(0), 2.0, 0.04);
}

TEST(Moments, ExpectationFunctionals) {
  const auto s = eta_sampler(1.5, -1.0);
  const RowVector x{{0.0}};
  const RowVector id = sampler::conditional_expectation(s, x, 4000, [](const RowVector& y) { return y; }, 2);
  EXPECT_NEAR(id(0), sampler::conditional_mean(s, x, 4000, 2)(0), 1e-12);
  const RowVector one = sampler::conditional_expectation(s, x, 4000, [](const RowVector&) { return RowVector::Ones(1); });
  EXPECT_EQ(one(0), 1.0);
}

TEST(Quantiles, LinearInterpolation) {
  Matrix s(100, 1);
  for (int i = 0; i < 100; ++i) s(i, 0) = 100 - i;  // unsorted on purpose
  const Matrix q = sampler::empirical_quantiles(s, {0.05, 0.5, 0.95});
  EXPECT_DOUBLE_EQ(q(1, 0), 50.5);
  // Position (J - 1) p: 4.95 -> 5.95, 94.05 -> 95.05.
  EXPECT_NEAR(q(0, 0), 5.95, 1e-12);
  EXPECT_NEAR(q(2, 0), 95.05, 1e-12);
  EXPECT_LE(q(0, 0), q(1, 0));
  EXPECT_LE(q(1, 0), q(2, 0));
}

TEST(Quantiles, MonotoneInLevel) {
  const auto s = eta_sampler();
  std::vector<double> levels;
  for (int i = 1; i < 100; ++i) levels.push_back(i / 100.0);
  const Matrix q = sampler::conditional_quantile(s, RowVector{{0.0}}, 500, levels);
  for (Eigen::Index k = 1; k < q.rows(); ++k) EXPECT_LE(q(k - 1, 0), q(k, 0));
}

TEST(Intervals, NominalLevelsAndCoherence) {
  const auto [a, b] = sampler::interval_levels(0.9);
  EXPECT_DOUBLE_EQ(a, 0.05);
  EXPECT_DOUBLE_EQ(b, 0.95);
  const auto s = eta_sampler();
  const RowVector x{{0.0}};
  const auto iv = sampler::prediction_interval(s, x, 999, 0.9, 6);
  const Matrix q = sampler::conditional_quantile(s, x, 999, {a, b}, 6);
  EXPECT_EQ(iv.lo(0), q(0, 0));
  EXPECT_EQ(iv.hi(0), q(1, 0));
}

TEST(Intervals, ApproachSampleRangeAsNominalGoesToOne) {
  const auto s = eta_sampler();
  const RowVector x{{0.0}};
  const Matrix draws = s.sample(x, 200, 1);
  const auto iv = sampler::prediction_interval(s, x, 200, 1.0 - 1e-12, 1);
  EXPECT_NEAR(iv.lo(0), draws.minCoeff(), 1e-9);
  EXPECT_NEAR(iv.hi(0), draws.maxCoeff(), 1e-9);
}

TEST(Standardization, EstimatesAreEquivariant) {
  // Same generator, once with identity stats and once with y mean 3, sd 2
  // (and x standardized by mean 1, sd 4).
  const auto g = affine_generator(Matrix{{1.0, 0.5}}, RowVector::Constant(1, 0.2));
  const Standardization st{{RowVector::Constant(1, 1.0), RowVector::Constant(1, 4.0)},
                           {RowVector::Constant(1, 3.0), RowVector::Constant(1, 2.0)}};
  const sampler::ConditionalSampler scaled(g, 1, st, 9);
  const auto plain = sampler::ConditionalSampler::unstandardized(g, 1, 9);
  const RowVector x{{5.0}};
  const RowVector xs{{(5.0 - 1.0) / 4.0}};
  EXPECT_NEAR(sampler::conditional_mean(scaled, x, 3000)(0), 3.0 + 2.0 * sampler::conditional_mean(plain, xs, 3000)(0), 1e-12);
  EXPECT_NEAR(sampler::conditional_sd(scaled, x, 3000)(0), 2.0 * sampler::conditional_sd(plain, xs, 3000)(0), 1e-12);
  const Matrix qs = sampler::conditional_quantile(scaled, x, 3000, {0.1, 0.7});
  const Matrix qp = sampler::conditional_quantile(plain, xs, 3000, {0.1, 0.7});
  EXPECT_NEAR(qs(0, 0), 3.0 + 2.0 * qp(0, 0), 1e-12);
  EXPECT_NEAR(qs(1, 0), 3.0 + 2.0 * qp(1, 0), 1e-12);
  EXPECT_TRUE(scaled.sample_standardized(x, 100).isApprox(plain.sample(xs, 100), 1e-15));
}

TEST(EstimateReport, CsvShapeAndSingleDraw) {
  const auto s = eta_sampler();
  const Matrix queries{{0.0}, {1.0}, {1.0}};
  sampler::EstimateRequest req;
  req.draws = 1;
  req.levels = {0.5};
  const auto rep = sampler::estimate(s, queries, req);
  const std::string csv = rep.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "query,mean_1,sd_1,q0.5_1,lo_1,hi_1,J");
  EXPECT_FALSE(rep.rows[0].sd.has_value());
  // SD column left empty: "0,<mean>,,<q>,...".
  const std::string row0 = csv.substr(csv.find('\n') + 1);
  EXPECT_NE(row0.find(",,"), std::string::npos);
}

TEST(EstimateReport, IntervalsBracketMedianAndDuplicatesDiffer) {
  const auto s = eta_sampler(1.0, 2.0);
  const Matrix queries{{0.5}, {0.5}};
  sampler::EstimateRequest req;
  req.draws = 500;
  req.levels = {0.5};
  const auto rep = sampler::estimate(s, queries, req);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.interval->lo(0), r.quantiles(0, 0));
    EXPECT_LE(r.quantiles(0, 0), r.interval->hi(0));
  }
  EXPECT_NE(rep.rows[0].mean(0), rep.rows[1].mean(0));
  EXPECT_EQ(sampler::estimate(s, queries, req).to_csv(), rep.to_csv());
}

TEST(FromCheckpoint, RestoresStandardizationAndSeed) {
  const auto g = affine_generator(Matrix{{1.0, 0.5}}, RowVector::Constant(1, 0.2));
  const Standardization st{{RowVector::Constant(1, 1.0), RowVector::Constant(1, 4.0)},
                           {RowVector::Constant(1, 3.0), RowVector::Constant(1, 2.0)}};
  const json md = {{"noise_dim", 1}, {"seed", 21}, {"standardization", standardization_to_json(st)}};
  const auto ck = nn::load_checkpoint(json::parse(nn::save_checkpoint(g.spec, g.params, md).dump()));
  const auto s = sampler::ConditionalSampler::from_checkpoint(ck);
  const sampler::ConditionalSampler direct(g, 1, st, 21);
  EXPECT_TRUE(s.sample(RowVector{{2.0}}, 64, 5) == direct.sample(RowVector{{2.0}}, 64, 5));
  EXPECT_THROW(sampler::ConditionalSampler::from_checkpoint(nn::Checkpoint{g.spec, g.params, json::object()}), LoadError);
}

}  // namespace
