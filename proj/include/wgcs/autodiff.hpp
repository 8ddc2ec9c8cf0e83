#ifndef WGCS_AUTODIFF_HPP
#define WGCS_AUTODIFF_HPP

// Reverse-mode automatic differentiation over small dense matrices.
//
// Every operation appends one node to a Tape and computes its value eagerly.
// Tape::grad performs the reverse sweep by emitting ordinary tape operations,
// so the gradients it returns are themselves differentiable (double backward).
// This is what the gradient penalty needs: the norm of the critic's input
// gradient is differentiated again with respect to the critic parameters.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace wgcs::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OpKind : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  neg,
  scale,
  shift,
  matmul,
  transpose,
  relu,
  tanh,
  abs,
  square,
  sqrt,
  safe_recip,
  min,
  max,
  clip,
  sum,
  fill,
  sum_rows,
  broadcast_rows,
  sum_cols,
  broadcast_cols,
  slice_cols,
  pad_cols,
  hconcat,
};

struct Node {
  OpKind op = OpKind::leaf;
  int lhs = -1;
  int rhs = -1;
  double k = 0.0;
  Eigen::Index a = 0;
  Eigen::Index b = 0;
  Matrix value;
};

class Tape;

/// Handle to a node on a tape. Only meaningful against the tape that created it.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  void clear() { nodes_.clear(); }

  /// Drops every node with id >= n. Vars referring to dropped nodes become invalid.
  void truncate(std::size_t n) {
    if (n < nodes_.size()) nodes_.resize(n);
  }

  Var leaf(Matrix v) { return push({OpKind::leaf, -1, -1, 0.0, 0, 0, std::move(v)}); }
  Var constant(Matrix v) { return push({OpKind::constant, -1, -1, 0.0, 0, 0, std::move(v)}); }
  Var leaf(double v) { return leaf(Matrix::Constant(1, 1, v)); }
  Var constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

  Var add(Var x, Var y) { return binary(OpKind::add, x, y); }
  Var sub(Var x, Var y) { return binary(OpKind::sub, x, y); }
  Var mul(Var x, Var y) { return binary(OpKind::mul, x, y); }
  Var div(Var x, Var y) { return binary(OpKind::div, x, y); }
  Var min(Var x, Var y) { return binary(OpKind::min, x, y); }
  Var max(Var x, Var y) { return binary(OpKind::max, x, y); }
  Var matmul(Var x, Var y) { return binary(OpKind::matmul, x, y); }
  Var hconcat(Var x, Var y) { return binary(OpKind::hconcat, x, y); }

  Var neg(Var x) { return unary(OpKind::neg, x); }
  Var transpose(Var x) { return unary(OpKind::transpose, x); }
  Var relu(Var x) { return unary(OpKind::relu, x); }
  Var tanh(Var x) { return unary(OpKind::tanh, x); }
  Var abs(Var x) { return unary(OpKind::abs, x); }
  Var square(Var x) { return unary(OpKind::square, x); }
  Var sqrt(Var x) { return unary(OpKind::sqrt, x); }
  /// 1/x, with the value and derivative at x = 0 defined as 0.
  Var safe_recip(Var x) { return unary(OpKind::safe_recip, x); }
  Var sum(Var x) { return unary(OpKind::sum, x); }
  Var sum_rows(Var x) { return unary(OpKind::sum_rows, x); }
  Var sum_cols(Var x) { return unary(OpKind::sum_cols, x); }

  Var scale(Var x, double k) { return unary(OpKind::scale, x, k); }
  Var shift(Var x, double k) { return unary(OpKind::shift, x, k); }
  /// Clamp to [-c, c]. The derivative is that of relu(a+c) - relu(a-c) - c.
  Var clip(Var x, double c) {
    if (!(c > 0.0)) throw ContractError("clip bound must be positive");
    return unary(OpKind::clip, x, c);
  }
  Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

  Var fill(Var s, Eigen::Index rows, Eigen::Index cols) {
    expect_scalar(s, "fill");
    return unary(OpKind::fill, s, 0.0, rows, cols);
  }
  Var broadcast_rows(Var row, Eigen::Index rows) {
    if (row.value().rows() != 1) throw ContractError("broadcast_rows expects a single row");
    return unary(OpKind::broadcast_rows, row, 0.0, rows, 0);
  }
  Var broadcast_cols(Var col, Eigen::Index cols) {
    if (col.value().cols() != 1) throw ContractError("broadcast_cols expects a single column");
    return unary(OpKind::broadcast_cols, col, 0.0, 0, cols);
  }
  Var slice_cols(Var x, Eigen::Index offset, Eigen::Index width) {
    if (offset < 0 || width < 0 || offset + width > x.value().cols())
      throw ContractError("slice_cols out of range");
    return unary(OpKind::slice_cols, x, 0.0, offset, width);
  }
  Var pad_cols(Var x, Eigen::Index offset, Eigen::Index total) {
    if (offset < 0 || offset + x.value().cols() > total) throw ContractError("pad_cols out of range");
    return unary(OpKind::pad_cols, x, 0.0, offset, total);
  }

  /// Dispatch by primitive name; unknown names are a configuration error.
  Var apply(std::string_view name, Var x) {
    if (name == "relu") return relu(x);
    if (name == "tanh") return tanh(x);
    if (name == "abs") return abs(x);
    if (name == "square") return square(x);
    if (name == "sqrt") return sqrt(x);
    if (name == "neg") return neg(x);
    if (name == "sum") return sum(x);
    if (name == "transpose") return transpose(x);
    throw ConfigError("unsupported unary primitive '" + std::string(name) + "'");
  }
  Var apply(std::string_view name, Var x, Var y) {
    if (name == "add") return add(x, y);
    if (name == "sub") return sub(x, y);
    if (name == "mul") return mul(x, y);
    if (name == "div") return div(x, y);
    if (name == "min") return min(x, y);
    if (name == "max") return max(x, y);
    if (name == "matmul") return matmul(x, y);
    throw ConfigError("unsupported binary primitive '" + std::string(name) + "'");
  }

  /// Reverse sweep from a scalar output. The sweep is recorded on this tape,
  /// so the returned Vars can be differentiated again.
  std::vector<Var> grad(Var output, std::span<const Var> wrt);
  std::vector<Var> grad(Var output, std::initializer_list<Var> wrt) {
    return grad(output, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  /// Gradient values only; the nodes of the sweep are discarded afterwards.
  std::vector<Matrix> gradient(Var output, std::span<const Var> wrt) {
    const std::size_t mark = size();
    auto vars = grad(output, wrt);
    std::vector<Matrix> out;
    out.reserve(vars.size());
    for (const auto& v : vars) out.push_back(v.value());
    truncate(mark);
    return out;
  }
  std::vector<Matrix> gradient(Var output, std::initializer_list<Var> wrt) {
    return gradient(output, std::span<const Var>(wrt.begin(), wrt.size()));
  }

  /// Recomputes a node's value from the recorded values of its inputs.
  Matrix recompute(int id) const { return compute(node(id)); }

 private:
  friend class Var;

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  void own(Var x) const {
    if (x.tape_ != this || x.id_ < 0 || static_cast<std::size_t>(x.id_) >= nodes_.size())
      throw ContractError("Var does not belong to this tape");
  }

  static void expect_scalar(Var x, const char* what) {
    if (x.value().rows() != 1 || x.value().cols() != 1)
      throw ContractError(std::string(what) + " expects a 1x1 value");
  }

  Var unary(OpKind op, Var x, double k = 0.0, Eigen::Index a = 0, Eigen::Index b = 0) {
    own(x);
    Node n{op, x.id_, -1, k, a, b, {}};
    n.value = compute(n);
    return push(std::move(n));
  }

  Var binary(OpKind op, Var x, Var y) {
    own(x);
    own(y);
    const Matrix& xv = node(x.id_).value;
    const Matrix& yv = node(y.id_).value;
    if (op == OpKind::matmul) {
      if (xv.cols() != yv.rows()) throw ContractError("matmul inner dimensions disagree");
    } else if (op == OpKind::hconcat) {
      if (xv.rows() != yv.rows()) throw ContractError("hconcat row counts disagree");
    } else if (xv.rows() != yv.rows() || xv.cols() != yv.cols()) {
      throw ContractError("elementwise operands have different shapes");
    }
    Node n{op, x.id_, y.id_, 0.0, 0, 0, {}};
    n.value = compute(n);
    return push(std::move(n));
  }

  Matrix compute(const Node& n) const;
  void accumulate(std::vector<Var>& adj, int id, Var contribution);
  void backprop(int id, Var g, std::vector<Var>& adj, const std::vector<char>& needs);

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const {
  if (!valid()) throw ContractError("invalid Var");
  return tape_->node(id_).value;
}

inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ContractError("Var is not scalar");
  return v(0, 0);
}

inline Matrix Tape::compute(const Node& n) const {
  auto in = [&](int id) -> const Matrix& { return nodes_[static_cast<std::size_t>(id)].value; };
  switch (n.op) {
    case OpKind::leaf:
    case OpKind::constant:
      return n.value;
    case OpKind::add:
      return in(n.lhs) + in(n.rhs);
    case OpKind::sub:
      return in(n.lhs) - in(n.rhs);
    case OpKind::mul:
      return in(n.lhs).cwiseProduct(in(n.rhs));
    case OpKind::div:
      return in(n.lhs).cwiseQuotient(in(n.rhs));
    case OpKind::neg:
      return -in(n.lhs);
    case OpKind::scale:
      return n.k * in(n.lhs);
    case OpKind::shift:
      return (in(n.lhs).array() + n.k).matrix();
    case OpKind::matmul:
      return in(n.lhs) * in(n.rhs);
    case OpKind::transpose:
      return in(n.lhs).transpose();
    case OpKind::relu:
      return in(n.lhs).unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
    case OpKind::tanh:
      return in(n.lhs).array().tanh().matrix();
    case OpKind::abs:
      return in(n.lhs).cwiseAbs();
    case OpKind::square:
      return in(n.lhs).cwiseAbs2();
    case OpKind::sqrt:
      return in(n.lhs).cwiseSqrt();
    case OpKind::safe_recip:
      return in(n.lhs).unaryExpr([](double v) { return v != 0.0 ? 1.0 / v : 0.0; });
    case OpKind::min:
      return in(n.lhs).cwiseMin(in(n.rhs));
    case OpKind::max:
      return in(n.lhs).cwiseMax(in(n.rhs));
    case OpKind::clip:
      return in(n.lhs).cwiseMax(-n.k).cwiseMin(n.k);
    case OpKind::sum:
      return Matrix::Constant(1, 1, in(n.lhs).sum());
    case OpKind::fill:
      return Matrix::Constant(n.a, n.b, in(n.lhs)(0, 0));
    case OpKind::sum_rows:
      return in(n.lhs).colwise().sum();
    case OpKind::broadcast_rows:
      return in(n.lhs).replicate(n.a, 1);
    case OpKind::sum_cols:
      return in(n.lhs).rowwise().sum();
    case OpKind::broadcast_cols:
      return in(n.lhs).replicate(1, n.b);
    case OpKind::slice_cols:
      return in(n.lhs).middleCols(n.a, n.b);
    case OpKind::pad_cols: {
      const Matrix& x = in(n.lhs);
      Matrix out = Matrix::Zero(x.rows(), n.b);
      out.middleCols(n.a, x.cols()) = x;
      return out;
    }
    case OpKind::hconcat: {
      const Matrix& x = in(n.lhs);
      const Matrix& y = in(n.rhs);
      Matrix out(x.rows(), x.cols() + y.cols());
      out << x, y;
      return out;
    }
  }
  throw ContractError("unknown op kind");
}

inline void Tape::accumulate(std::vector<Var>& adj, int id, Var contribution) {
  auto& slot = adj[static_cast<std::size_t>(id)];
  slot = slot.valid() ? add(slot, contribution) : contribution;
}

inline void Tape::backprop(int id, Var g, std::vector<Var>& adj, const std::vector<char>& needs) {
  // Copy what we need: pushing nodes may reallocate nodes_.
  const OpKind op = nodes_[static_cast<std::size_t>(id)].op;
  const int l = nodes_[static_cast<std::size_t>(id)].lhs;
  const int r = nodes_[static_cast<std::size_t>(id)].rhs;
  const double k = nodes_[static_cast<std::size_t>(id)].k;
  const Eigen::Index na = nodes_[static_cast<std::size_t>(id)].a;
  const bool gl = l >= 0 && needs[static_cast<std::size_t>(l)];
  const bool gr = r >= 0 && needs[static_cast<std::size_t>(r)];
  const Var x(this, l);
  const Var y(this, r);
  const Var out(this, id);
  auto mask = [&](auto pred) {
    const Matrix& xv = nodes_[static_cast<std::size_t>(l)].value;
    return constant(xv.unaryExpr(pred));
  };

  switch (op) {
    case OpKind::leaf:
    case OpKind::constant:
      return;
    case OpKind::add:
      if (gl) accumulate(adj, l, g);
      if (gr) accumulate(adj, r, g);
      return;
    case OpKind::sub:
      if (gl) accumulate(adj, l, g);
      if (gr) accumulate(adj, r, neg(g));
      return;
    case OpKind::mul:
      if (gl) accumulate(adj, l, mul(g, y));
      if (gr) accumulate(adj, r, mul(g, x));
      return;
    case OpKind::div:
      if (gl) accumulate(adj, l, div(g, y));
      if (gr) accumulate(adj, r, neg(div(mul(g, out), y)));
      return;
    case OpKind::neg:
      if (gl) accumulate(adj, l, neg(g));
      return;
    case OpKind::scale:
      if (gl) accumulate(adj, l, scale(g, k));
      return;
    case OpKind::shift:
      if (gl) accumulate(adj, l, g);
      return;
    case OpKind::matmul:
      if (gl) accumulate(adj, l, matmul(g, transpose(y)));
      if (gr) accumulate(adj, r, matmul(transpose(x), g));
      return;
    case OpKind::transpose:
      if (gl) accumulate(adj, l, transpose(g));
      return;
    case OpKind::relu:
      // Subgradient at the kink is 0.
      if (gl) accumulate(adj, l, mul(g, mask([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
      return;
    case OpKind::tanh:
      if (gl) accumulate(adj, l, mul(g, shift(neg(square(out)), 1.0)));
      return;
    case OpKind::abs:
      if (gl)
        accumulate(adj, l, mul(g, mask([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); })));
      return;
    case OpKind::square:
      if (gl) accumulate(adj, l, mul(g, scale(x, 2.0)));
      return;
    case OpKind::sqrt:
      // Derivative at 0 taken as 0 so that zero-norm gradients stay finite.
      if (gl) accumulate(adj, l, mul(g, scale(safe_recip(out), 0.5)));
      return;
    case OpKind::safe_recip:
      if (gl) accumulate(adj, l, mul(g, neg(square(out))));
      return;
    case OpKind::min:
    case OpKind::max: {
      const Matrix& xv = nodes_[static_cast<std::size_t>(l)].value;
      const Matrix& yv = nodes_[static_cast<std::size_t>(r)].value;
      Matrix pick(xv.rows(), xv.cols());
      for (Eigen::Index i = 0; i < xv.size(); ++i) {
        const bool first = op == OpKind::min ? xv(i) <= yv(i) : xv(i) >= yv(i);
        pick(i) = first ? 1.0 : 0.0;
      }
      const Matrix other = Matrix::Ones(pick.rows(), pick.cols()) - pick;
      if (gl) accumulate(adj, l, mul(g, constant(pick)));
      if (gr) accumulate(adj, r, mul(g, constant(other)));
      return;
    }
    case OpKind::clip:
      if (gl) accumulate(adj, l, mul(g, mask([k](double v) { return (v > -k && v <= k) ? 1.0 : 0.0; })));
      return;
    case OpKind::sum: {
      const Matrix& xv = nodes_[static_cast<std::size_t>(l)].value;
      const Eigen::Index rows = xv.rows();
      const Eigen::Index cols = xv.cols();
      if (gl) accumulate(adj, l, fill(g, rows, cols));
      return;
    }
    case OpKind::fill:
      if (gl) accumulate(adj, l, sum(g));
      return;
    case OpKind::sum_rows: {
      const Eigen::Index rows = nodes_[static_cast<std::size_t>(l)].value.rows();
      if (gl) accumulate(adj, l, broadcast_rows(g, rows));
      return;
    }
    case OpKind::broadcast_rows:
      if (gl) accumulate(adj, l, sum_rows(g));
      return;
    case OpKind::sum_cols: {
      const Eigen::Index cols = nodes_[static_cast<std::size_t>(l)].value.cols();
      if (gl) accumulate(adj, l, broadcast_cols(g, cols));
      return;
    }
    case OpKind::broadcast_cols:
      if (gl) accumulate(adj, l, sum_cols(g));
      return;
    case OpKind::slice_cols: {
      const Eigen::Index cols = nodes_[static_cast<std::size_t>(l)].value.cols();
      if (gl) accumulate(adj, l, pad_cols(g, na, cols));
      return;
    }
    case OpKind::pad_cols: {
      const Eigen::Index cols = nodes_[static_cast<std::size_t>(l)].value.cols();
      if (gl) accumulate(adj, l, slice_cols(g, na, cols));
      return;
    }
    case OpKind::hconcat: {
      const Eigen::Index lc = nodes_[static_cast<std::size_t>(l)].value.cols();
      const Eigen::Index rc = nodes_[static_cast<std::size_t>(r)].value.cols();
      if (gl) accumulate(adj, l, slice_cols(g, 0, lc));
      if (gr) accumulate(adj, r, slice_cols(g, lc, rc));
      return;
    }
  }
}

inline std::vector<Var> Tape::grad(Var output, std::span<const Var> wrt) {
  own(output);
  expect_scalar(output, "grad");
  for (const auto& w : wrt) own(w);

  const auto top = static_cast<std::size_t>(output.id_);
  std::vector<char> needs(top + 1, 0);
  for (const auto& w : wrt)
    if (static_cast<std::size_t>(w.id_) <= top) needs[static_cast<std::size_t>(w.id_)] = 1;
  for (std::size_t i = 0; i <= top; ++i) {
    const Node& n = nodes_[i];
    if ((n.lhs >= 0 && needs[static_cast<std::size_t>(n.lhs)]) ||
        (n.rhs >= 0 && needs[static_cast<std::size_t>(n.rhs)]))
      needs[i] = 1;
  }

  std::vector<Var> adj(top + 1);
  if (needs[top]) adj[top] = constant(1.0);
  for (std::size_t i = top + 1; i-- > 0;) {
    if (!needs[i] || !adj[i].valid()) continue;
    backprop(static_cast<int>(i), adj[i], adj, needs);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    const auto id = static_cast<std::size_t>(w.id_);
    if (id <= top && adj[id].valid()) {
      out.push_back(adj[id]);
    } else {
      const Matrix& v = nodes_[id].value;
      out.push_back(constant(Matrix::Zero(v.rows(), v.cols())));
    }
  }
  return out;
}

inline Var operator+(Var x, Var y) { return x.tape()->add(x, y); }
inline Var operator-(Var x, Var y) { return x.tape()->sub(x, y); }
/// Elementwise (Hadamard) product; use Tape::matmul for matrix products.
inline Var operator*(Var x, Var y) { return x.tape()->mul(x, y); }
inline Var operator/(Var x, Var y) { return x.tape()->div(x, y); }
inline Var operator-(Var x) { return x.tape()->neg(x); }
inline Var operator*(double k, Var x) { return x.tape()->scale(x, k); }
inline Var operator*(Var x, double k) { return x.tape()->scale(x, k); }
inline Var operator+(Var x, double k) { return x.tape()->shift(x, k); }
inline Var operator-(Var x, double k) { return x.tape()->shift(x, -k); }

/// An expression maps an input column vector (as a leaf) to an output Var.
using Expression = std::function<Var(Tape&, Var)>;

/// Forward evaluation; every intermediate stays recorded on `tape`.
inline Var evaluate(Tape& tape, const Expression& expr, Var input) { return expr(tape, input); }

inline Vector evaluate(const Expression& expr, const Vector& input) {
  Tape tape;
  const Var x = tape.leaf(Matrix(input));
  const Matrix& v = expr(tape, x).value();
  return Eigen::Map<const Vector>(v.data(), v.size());
}

/// Reverse-mode gradient of a scalar-valued expression.
inline Vector reverse_gradient(const Expression& expr, const Vector& input) {
  Tape tape;
  const Var x = tape.leaf(Matrix(input));
  const Var y = expr(tape, x);
  const Matrix g = tape.gradient(y, {x}).front();
  return Eigen::Map<const Vector>(g.data(), g.size());
}

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                         double h) {
  if (!(h > 0.0)) throw ContractError("finite-difference step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline Vector finite_difference_gradient(const Expression& expr, const Vector& x, double h) {
  return finite_difference_gradient(
      [&](const Vector& v) {
        const Vector out = evaluate(expr, v);
        if (out.size() != 1) throw ContractError("finite differences need a scalar expression");
        return out(0);
      },
      x, h);
}

}  // namespace wgcs::ad

#endif  // WGCS_AUTODIFF_HPP
