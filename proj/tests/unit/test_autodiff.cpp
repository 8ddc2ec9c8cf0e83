#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "wgcs/autodiff.hpp"
#include "wgcs/error.hpp"

namespace {

using wgcs::ad::Expression;
using wgcs::ad::Tape;
using wgcs::ad::Var;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

TEST(AutodiffEvaluate, ElementaryValues) {
  const Expression square = [](Tape& t, Var w) { return t.square(w); };
  EXPECT_EQ(wgcs::ad::evaluate(square, Vector::Constant(1, 3.0))(0), 9.0);
  const Expression relu = [](Tape& t, Var w) { return t.relu(w); };
  EXPECT_EQ(wgcs::ad::evaluate(relu, Vector::Constant(1, -2.0))(0), 0.0);
  const Expression th = [](Tape& t, Var w) { return t.tanh(w); };
  EXPECT_EQ(wgcs::ad::evaluate(th, Vector::Constant(1, 0.0))(0), 0.0);
}

TEST(AutodiffEvaluate, RecordsIntermediates) {
  Tape t;
  const Var x = t.leaf(2.0);
  const Var y = t.add(t.mul(x, x), t.constant(1.0));
  EXPECT_EQ(y.scalar(), 5.0);
  EXPECT_EQ(t.size(), 4u);
}

TEST(AutodiffEvaluate, UnsupportedPrimitiveIsConfigError) {
  Tape t;
  const Var x = t.leaf(1.0);
  EXPECT_THROW(t.apply("sin", x), wgcs::ConfigError);
  EXPECT_THROW(t.apply("pow", x, x), wgcs::ConfigError);
  EXPECT_NO_THROW(t.apply("tanh", x));
  EXPECT_NO_THROW(t.apply("max", x, x));
}

TEST(AutodiffGradient, PowerRule) {
  const Expression square = [](Tape& t, Var w) { return t.square(w); };
  EXPECT_EQ(wgcs::ad::reverse_gradient(square, Vector::Constant(1, 3.0))(0), 6.0);
}

TEST(AutodiffGradient, NonScalarOutputIsContractError) {
  Tape t;
  const Var x = t.leaf(Matrix::Ones(2, 1));
  EXPECT_THROW(t.gradient(t.square(x), {x}), wgcs::ContractError);
}

TEST(AutodiffGradient, UnreachedVariableGetsZero) {
  Tape t;
  const Var x = t.leaf(Matrix::Ones(2, 3));
  const Var u = t.leaf(1.0);
  const auto g = t.gradient(t.sum(t.square(u)), {x, u});
  EXPECT_EQ(g[0], Matrix::Zero(2, 3));
  EXPECT_EQ(g[1](0, 0), 2.0);
}

TEST(AutodiffGradient, DoubleBackwardOfCube) {
  // f = x^3, g = (f')^2 = 9 x^4, g'(1) = 36.
  Tape t;
  const Var x = t.leaf(1.0);
  const Var f = t.mul(t.mul(x, x), x);
  const Var fp = t.grad(f, {x}).front();
  EXPECT_DOUBLE_EQ(fp.scalar(), 3.0);
  const Var g = t.square(fp);
  EXPECT_NEAR(t.gradient(g, {x}).front()(0, 0), 36.0, 1e-12);
}

TEST(AutodiffGradient, LinearCriticInputGradientAndPenalty) {
  // D(x, y) = 2x + 3y, penalty 10 (sqrt(13) - 1)^2.
  Tape t;
  const Var z = t.leaf(Matrix{{0.3, -0.7}});
  const Var w = t.constant(Matrix{{2.0}, {3.0}});
  const Var d = t.matmul(z, w);
  const Var g = t.grad(t.sum(d), {z}).front();
  EXPECT_EQ(g.value(), (Matrix{{2.0, 3.0}}));
  const Var norm = t.sqrt(t.sum_cols(t.square(g)));
  const Var pen = t.scale(t.square(t.shift(norm, -1.0)), 10.0);
  EXPECT_NEAR(pen.scalar(), 10.0 * std::pow(std::sqrt(13.0) - 1.0, 2), 1e-12);
  EXPECT_NEAR(pen.scalar(), 67.88897, 5e-6);
}

TEST(AutodiffGradient, SqrtAtZeroHasZeroDerivative) {
  Tape t;
  const Var x = t.leaf(Matrix::Zero(1, 1));
  const auto g = t.gradient(t.sum(t.sqrt(x)), {x});
  EXPECT_EQ(g[0](0, 0), 0.0);
}

TEST(AutodiffGradient, ReluSubgradientAtZeroIsZero) {
  const Expression relu = [](Tape& t, Var w) { return t.sum(t.relu(w)); };
  EXPECT_EQ(wgcs::ad::reverse_gradient(relu, Vector::Zero(1))(0), 0.0);
}

TEST(FiniteDifference, Examples) {
  const Expression square = [](Tape& t, Var w) { return t.square(w); };
  EXPECT_NEAR(wgcs::ad::finite_difference_gradient(square, Vector::Constant(1, 3.0), 1e-4)(0), 6.0, 1e-8);
  const Expression th = [](Tape& t, Var w) { return t.tanh(w); };
  const double exact = 1.0 - std::tanh(0.5) * std::tanh(0.5);
  EXPECT_NEAR(exact, 0.786448, 1e-6);
  EXPECT_NEAR(wgcs::ad::finite_difference_gradient(th, Vector::Constant(1, 0.5), 1e-4)(0), exact, 1e-8);
  const Expression relu = [](Tape& t, Var w) { return t.relu(w); };
  EXPECT_NEAR(wgcs::ad::finite_difference_gradient(relu, Vector::Constant(1, 1.0), 1e-6)(0), 1.0, 1e-9);
  EXPECT_THROW(wgcs::ad::finite_difference_gradient(square, Vector::Constant(1, 3.0), 0.0), wgcs::ContractError);
}

// ---------------------------------------------------------------------------
// Random compositions: a small program over a state vector, run both on the
// tape and by a plain interpreter that also tracks the distance to the
// nearest kink (relu/abs at 0, min/max ties).

enum class Step { affine, relu, tanh, abs, square, sqrt1, add, mul, min, max };

struct Program {
  int input_dim = 1;
  std::vector<Step> steps;
  std::vector<Matrix> mats;  // per step: affine/binary operand map
  std::vector<Vector> shifts;
  Vector out_weights;
};

Program random_program(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 16);
  std::uniform_int_distribution<int> depth(1, 6);
  std::uniform_int_distribution<int> kind(0, 9);
  std::normal_distribution<double> z(0.0, 1.0);
  Program p;
  p.input_dim = dim(rng);
  int cur = p.input_dim;
  const int D = depth(rng);
  for (int s = 0; s < D; ++s) {
    const auto k = static_cast<Step>(kind(rng));
    const int out = k == Step::affine ? dim(rng) : cur;
    Matrix m(out, cur);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng) / std::sqrt(static_cast<double>(cur));
    Vector b(out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.5 * z(rng);
    p.steps.push_back(k);
    p.mats.push_back(m);
    p.shifts.push_back(b);
    cur = out;
  }
  p.out_weights.resize(cur);
  for (Eigen::Index i = 0; i < cur; ++i) p.out_weights(i) = z(rng);
  return p;
}

Var run_on_tape(const Program& p, Tape& t, Var x) {
  Var v = x;
  for (std::size_t s = 0; s < p.steps.size(); ++s) {
    const Var other = t.add(t.matmul(t.constant(p.mats[s]), v), t.constant(p.shifts[s]));
    switch (p.steps[s]) {
      case Step::affine: v = other; break;
      case Step::relu: v = t.relu(v); break;
      case Step::tanh: v = t.tanh(v); break;
      case Step::abs: v = t.abs(v); break;
      case Step::square: v = t.square(v); break;
      case Step::sqrt1: v = t.sqrt(t.shift(t.square(v), 1.0)); break;
      case Step::add: v = t.apply("add", v, other); break;
      case Step::mul: v = t.apply("mul", v, other); break;
      case Step::min: v = t.apply("min", v, other); break;
      case Step::max: v = t.apply("max", v, other); break;
    }
  }
  return t.sum(t.mul(v, t.constant(p.out_weights)));
}

/// Plain interpreter; returns the output and the smallest kink margin.
std::pair<double, double> interpret(const Program& p, const Vector& x) {
  Vector v = x;
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < p.steps.size(); ++s) {
    Vector other(p.mats[s].rows());
    for (Eigen::Index i = 0; i < p.mats[s].rows(); ++i) {
      double acc = p.shifts[s](i);
      for (Eigen::Index j = 0; j < p.mats[s].cols(); ++j) acc += p.mats[s](i, j) * v(j);
      other(i) = acc;
    }
    Vector next = v;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      switch (p.steps[s]) {
        case Step::affine: break;
        case Step::relu: margin = std::min(margin, std::abs(v(i))); next(i) = v(i) > 0 ? v(i) : 0.0; break;
        case Step::tanh: next(i) = std::tanh(v(i)); break;
        case Step::abs: margin = std::min(margin, std::abs(v(i))); next(i) = std::abs(v(i)); break;
        case Step::square: next(i) = v(i) * v(i); break;
        case Step::sqrt1: next(i) = std::sqrt(v(i) * v(i) + 1.0); break;
        case Step::add: next(i) = v(i) + other(i); break;
        case Step::mul: next(i) = v(i) * other(i); break;
        case Step::min: margin = std::min(margin, std::abs(v(i) - other(i))); next(i) = std::min(v(i), other(i)); break;
        case Step::max: margin = std::min(margin, std::abs(v(i) - other(i))); next(i) = std::max(v(i), other(i)); break;
      }
    }
    if (p.steps[s] == Step::affine) next = other;
    v = next;
  }
  double out = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += v(i) * p.out_weights(i);
  return {out, margin};
}

TEST(AutodiffProperty, RandomCompositionsMatchFiniteDifferences) {
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Program p = random_program(rng);
    Vector x(p.input_dim);
    // Resample until every kink is at least 1e-3 away (finite differences
    // with h = 1e-4 then stay on one smooth piece).
    for (int attempt = 0;; ++attempt) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
      if (interpret(p, x).second > 1e-3) break;
      ASSERT_LT(attempt, 1000);
    }
    Tape t;
    const Var xv = t.leaf(Matrix(x));
    const Var out = run_on_tape(p, t, xv);
    const double plain = interpret(p, x).first;
    EXPECT_NEAR(out.scalar(), plain, 1e-12 * std::max(1.0, std::abs(plain)));
    const Matrix g = t.gradient(out, {xv}).front();
    const Vector fd = wgcs::ad::finite_difference_gradient([&](const Vector& v) { return interpret(p, v).first; }, x, 1e-4);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    EXPECT_LT((Vector(g) - fd).cwiseAbs().maxCoeff() / scale, 1e-5) << "trial " << trial;
  }
}

TEST(AutodiffProperty, TapeDeterminismAndReplay) {
  std::mt19937_64 rng(7);
  const Program p = random_program(rng);
  Vector x(p.input_dim);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);

  Tape a;
  Tape b;
  const Var xa = a.leaf(Matrix(x));
  const Var xb = b.leaf(Matrix(x));
  const auto ga = a.grad(run_on_tape(p, a, xa), {xa});
  const auto gb = b.grad(run_on_tape(p, b, xb), {xb});
  ASSERT_EQ(a.size(), b.size());
  for (int id = 0; id < static_cast<int>(a.size()); ++id) {
    const auto& na = a.node(id);
    const auto& nb = b.node(id);
    EXPECT_EQ(na.op, nb.op);
    EXPECT_EQ(na.lhs, nb.lhs);
    EXPECT_EQ(na.rhs, nb.rhs);
    EXPECT_TRUE(na.value == nb.value) << "node " << id;
    EXPECT_LT(na.lhs, id);
    EXPECT_LT(na.rhs, id);
    if (na.op != wgcs::ad::OpKind::leaf && na.op != wgcs::ad::OpKind::constant) {
      EXPECT_TRUE(a.recompute(id) == na.value) << "replay differs at node " << id;
    }
  }
  EXPECT_TRUE(ga[0].value() == gb[0].value());
}

TEST(AutodiffProperty, SecondOrderThroughSmoothMlp) {
  // h(W) = || d/dz sum(tanh(z W1) W2) ||^2, differentiated with respect to W1
  // on the tape and by finite differences of the recorded first-order sweep.
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix Z(4, 3), W1(3, 5), W2(5, 1);
  for (auto* m : {&Z, &W1, &W2})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = z(rng);

  auto objective = [&](Tape& t, Var w1) {
    const Var zv = t.leaf(Z);
    const Var out = t.sum(t.matmul(t.tanh(t.matmul(zv, w1)), t.constant(W2)));
    const Var g = t.grad(out, {zv}).front();
    return t.sum(t.square(g));
  };
  Tape t;
  const Var w1 = t.leaf(W1);
  const Matrix g = t.gradient(objective(t, w1), {w1}).front();
  auto value = [&](const Matrix& w) {
    Tape s;
    return objective(s, s.leaf(w)).scalar();
  };
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < W1.size(); ++i) {
    Matrix up = W1, down = W1;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double fd = (value(up) - value(down)) / (2 * h);
    EXPECT_NEAR(g.data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(AutodiffShapes, BroadcastSliceAndPadRoundTrip) {
  Tape t;
  const Var x = t.leaf(Matrix{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  const Var s = t.slice_cols(x, 1, 2);
  EXPECT_EQ(s.value(), (Matrix{{2.0, 3.0}, {5.0, 6.0}}));
  const Var p = t.pad_cols(s, 1, 3);
  EXPECT_EQ(p.value(), (Matrix{{0.0, 2.0, 3.0}, {0.0, 5.0, 6.0}}));
  const auto g = t.gradient(t.sum(t.square(s)), {x});
  EXPECT_EQ(g[0], (Matrix{{0.0, 4.0, 6.0}, {0.0, 10.0, 12.0}}));
  EXPECT_THROW(t.slice_cols(x, 2, 2), wgcs::ContractError);
  const Var r = t.broadcast_rows(t.leaf(Matrix{{1.0, 2.0}}), 3);
  EXPECT_EQ(r.value().rows(), 3);
}

}  // namespace
