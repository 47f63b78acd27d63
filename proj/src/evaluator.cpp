#include "featforge/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace featforge {

namespace {

using Array = Eigen::ArrayXd;

Array limited(Array v) {
  return v.unaryExpr([](double x) { return std::isnan(x) ? 0.0 : std::clamp(x, -kValueLimit, kValueLimit); });
}

Array finite_or_zero(const Array& v) {
  return v.unaryExpr([](double x) { return std::isfinite(x) ? x : 0.0; });
}

Array sign(const Array& u) {
  return u.unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Array as_bool(const Array& a) { return (a != 0.0).cast<double>(); }

// u = w * a for each continuous argument; boolean-typed nodes see raw a.
std::array<Array, 2> weighted_inputs(const Node& n, const std::array<const Array*, 2>& args) {
  std::array<Array, 2> u;
  const bool weighted = n.n_weights() > 0;
  for (std::size_t i = 0; i < n.arity(); ++i) u[i] = weighted ? Array(n.weights[i] * *args[i]) : *args[i];
  return u;
}

Array node_values(const Node& n, const std::array<const Array*, 2>& args) {
  if (n.op == Op::Feature) return limited(n.weights[0] * *args[0]);
  const auto u = weighted_inputs(n, args);
  switch (n.op) {
    case Op::Add:
      return limited(u[0] + u[1]);
    case Op::Sub:
      return limited(u[0] - u[1]);
    case Op::Mul:
      return limited(u[0] * u[1]);
    case Op::Div:
      return limited(u[0] * u[1] / (u[1].square() + kDivEpsilon));
    case Op::Square:
      return limited(u[0].square());
    case Op::Cube:
      return limited(u[0].cube());
    case Op::Sqrt:
      return limited(u[0].abs().sqrt());
    case Op::Sin:
      return limited(u[0].sin());
    case Op::Cos:
      return limited(u[0].cos());
    case Op::Exp:
      return limited(u[0].exp());
    case Op::Log:
      return limited((u[0] == 0.0).select(0.0, u[0].abs().log()));
    case Op::Exponent:
      return limited(u[0].abs().pow(u[1]));
    case Op::Logit:
      return limited(1.0 / (1.0 + (-u[0]).exp()));
    case Op::Tanh:
      return limited(u[0].tanh());
    case Op::Gauss:
      return limited((-u[0].square()).exp());
    case Op::Relu:
      return limited(u[0].max(0.0));
    case Op::And:
      return (as_bool(u[0]) * as_bool(u[1]));
    case Op::Or:
      return (as_bool(u[0]) + as_bool(u[1]) - as_bool(u[0]) * as_bool(u[1]));
    case Op::Not:
      return 1.0 - as_bool(u[0]);
    case Op::Xor:
      return (as_bool(u[0]) != as_bool(u[1])).cast<double>();
    case Op::Equal:
      return (u[0] == u[1]).cast<double>();
    case Op::Less:
      return (u[0] < u[1]).cast<double>();
    case Op::LessEq:
      return (u[0] <= u[1]).cast<double>();
    case Op::Greater:
      return (u[0] > u[1]).cast<double>();
    case Op::GreaterEq:
      return (u[0] >= u[1]).cast<double>();
    case Op::Feature:
      break;
  }
  throw std::logic_error("node_values: unhandled operator");
}

// d(out)/d(u_i) for a differentiable node, zeroed where the output clamped.
std::array<Array, 2> node_partials(const Node& n, const std::array<const Array*, 2>& args, const Array& out) {
  std::array<Array, 2> d;
  const Eigen::Index N = out.size();
  if (n.op == Op::Feature) {
    d[0] = Array::Ones(N);
  } else {
    const auto u = weighted_inputs(n, args);
    switch (n.op) {
      case Op::Add:
        d[0] = Array::Ones(N);
        d[1] = Array::Ones(N);
        break;
      case Op::Sub:
        d[0] = Array::Ones(N);
        d[1] = -Array::Ones(N);
        break;
      case Op::Mul:
        d[0] = u[1];
        d[1] = u[0];
        break;
      case Op::Div: {
        const Array den = u[1].square() + kDivEpsilon;
        d[0] = u[1] / den;
        d[1] = u[0] * (kDivEpsilon - u[1].square()) / den.square();
        break;
      }
      case Op::Square:
        d[0] = 2.0 * u[0];
        break;
      case Op::Cube:
        d[0] = 3.0 * u[0].square();
        break;
      case Op::Sqrt:
        d[0] = (u[0] == 0.0).select(0.0, sign(u[0]) / (2.0 * u[0].abs().sqrt()));
        break;
      case Op::Sin:
        d[0] = u[0].cos();
        break;
      case Op::Cos:
        d[0] = -u[0].sin();
        break;
      case Op::Exp:
        d[0] = u[0].exp();
        break;
      case Op::Log:
        d[0] = (u[0] == 0.0).select(0.0, 1.0 / u[0]);
        break;
      case Op::Exponent: {
        const Array base = u[0].abs();
        d[0] = (base == 0.0).select(0.0, u[1] * base.pow(u[1] - 1.0) * sign(u[0]));
        d[1] = (base == 0.0).select(0.0, base.pow(u[1]) * base.log());
        break;
      }
      case Op::Logit: {
        const Array s = 1.0 / (1.0 + (-u[0]).exp());
        d[0] = s * (1.0 - s);
        break;
      }
      case Op::Tanh:
        d[0] = 1.0 - u[0].tanh().square();
        break;
      case Op::Gauss:
        d[0] = -2.0 * u[0] * (-u[0].square()).exp();
        break;
      case Op::Relu:
        d[0] = (u[0] > 0.0).cast<double>();
        break;
      default:
        throw std::logic_error("node_partials: operator is not differentiable");
    }
  }
  const auto clamped = out.abs() >= kValueLimit;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, n.arity()); ++i)
    d[i] = clamped.select(0.0, finite_or_zero(d[i]));
  return d;
}

struct Trace {
  std::vector<Array> values;
  std::vector<std::array<std::size_t, 2>> children;
  std::vector<Array> features;  // raw terminal inputs, indexed like values
};

Trace trace_tree(const Tree& tree, const Matrix& X) {
  Trace tr;
  tr.values.resize(tree.size());
  tr.children.resize(tree.size());
  tr.features.resize(tree.size());
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.nodes[i];
    std::array<const Array*, 2> args{nullptr, nullptr};
    if (n.op == Op::Feature) {
      if (n.feature >= static_cast<std::size_t>(X.cols()))
        throw std::out_of_range("feature x" + std::to_string(n.feature) + " not present (data has " +
                                std::to_string(X.cols()) + " columns)");
      tr.features[i] = X.col(n.feature).array();
      args[0] = &tr.features[i];
    } else {
      if (stack.size() < n.arity()) throw std::invalid_argument("forward: malformed tree");
      for (std::size_t a = n.arity(); a-- > 0;) {
        tr.children[i][a] = stack.back();
        stack.pop_back();
      }
      for (std::size_t a = 0; a < n.arity(); ++a) args[a] = &tr.values[tr.children[i][a]];
    }
    tr.values[i] = node_values(n, args);
    stack.push_back(i);
  }
  if (stack.size() != 1) throw std::invalid_argument("forward: malformed tree");
  return tr;
}

std::array<const Array*, 2> node_args(const Trace& tr, const Node& n, std::size_t i) {
  std::array<const Array*, 2> args{nullptr, nullptr};
  if (n.op == Op::Feature)
    args[0] = &tr.features[i];
  else
    for (std::size_t a = 0; a < n.arity(); ++a) args[a] = &tr.values[tr.children[i][a]];
  return args;
}

struct GradResult {
  WeightGradients grads;
  double loss = 0.0;
};

GradResult gradient_and_loss(const Individual& ind, const Matrix& X, const Vector& y) {
  const auto m = ind.trees.size();
  if (ind.beta.size() != m) throw std::invalid_argument("loss_gradient: individual has no fitted beta");
  const Eigen::Index N = X.rows();
  std::vector<Trace> traces;
  traces.reserve(m);
  Array pred = Array::Constant(N, ind.intercept);
  for (std::size_t j = 0; j < m; ++j) {
    traces.push_back(trace_tree(ind.trees[j], X));
    pred += ind.beta[j] * traces.back().values.back();
  }
  const Array resid = y.array() - pred;
  GradResult out;
  out.loss = resid.square().mean();
  out.grads.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& tree = ind.trees[j];
    auto& g = out.grads[j];
    g.assign(tree.size(), {0.0, 0.0});
    if (tree.type() != ValueType::Continuous || ind.beta[j] == 0.0) continue;
    const auto& tr = traces[j];
    std::vector<Array> adj(tree.size(), Array::Zero(N));
    adj.back() = (-2.0 / static_cast<double>(N)) * ind.beta[j] * resid;
    for (std::size_t i = tree.size(); i-- > 0;) {
      const auto& n = tree.nodes[i];
      if (n.n_weights() == 0) continue;
      const auto args = node_args(tr, n, i);
      const auto partial = node_partials(n, args, tr.values[i]);
      if (n.op == Op::Feature) {
        g[i][0] = (adj[i] * partial[0] * *args[0]).sum();
        continue;
      }
      for (std::size_t a = 0; a < n.arity(); ++a) {
        const Array local = adj[i] * partial[a];
        g[i][a] = (local * *args[a]).sum();
        adj[tr.children[i][a]] += local * n.weights[a];
      }
    }
    for (auto& gw : g)
      for (double& v : gw) v = std::isfinite(v) ? std::clamp(v, -kGradientClip, kGradientClip) : 0.0;
  }
  return out;
}

void apply_step(Individual& ind, const WeightGradients& grads, double lr) {
  for (std::size_t j = 0; j < ind.trees.size(); ++j)
    for (std::size_t i = 0; i < ind.trees[j].size(); ++i) {
      auto& n = ind.trees[j].nodes[i];
      for (std::size_t w = 0; w < n.n_weights(); ++w) n.weights[w] -= lr * grads[j][i][w];
    }
}

}  // namespace

double apply_node(Op op, std::span<const double> args, std::span<const double> weights) {
  Node n = Node::function(op);
  std::copy(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(n.n_weights()), n.weights.begin());
  std::array<Array, 2> a;
  std::array<const Array*, 2> p{nullptr, nullptr};
  const std::size_t k = std::max<std::size_t>(1, n.arity());
  for (std::size_t i = 0; i < k; ++i) {
    a[i] = Array::Constant(1, args[i]);
    p[i] = &a[i];
  }
  return node_values(n, p)(0);
}

NodeGradient node_gradient(Op op, std::span<const double> args, std::span<const double> weights) {
  Node n = Node::function(op);
  std::copy(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(n.n_weights()), n.weights.begin());
  std::array<Array, 2> a;
  std::array<const Array*, 2> p{nullptr, nullptr};
  const std::size_t k = std::max<std::size_t>(1, n.arity());
  for (std::size_t i = 0; i < k; ++i) {
    a[i] = Array::Constant(1, args[i]);
    p[i] = &a[i];
  }
  NodeGradient g;
  if (n.n_weights() == 0) return g;
  const auto partial = node_partials(n, p, node_values(n, p));
  for (std::size_t i = 0; i < k; ++i) {
    g.d_args[i] = partial[i](0) * n.weights[i];
    g.d_weights[i] = partial[i](0) * args[i];
  }
  return g;
}

Eigen::ArrayXd evaluate(const Tree& tree, const Matrix& X) { return trace_tree(tree, X).values.back(); }

ReprMatrix forward(const Individual& ind, const Matrix& X) {
  ReprMatrix phi(X.rows(), static_cast<Eigen::Index>(ind.trees.size()));
  for (std::size_t j = 0; j < ind.trees.size(); ++j) phi.col(static_cast<Eigen::Index>(j)) = evaluate(ind.trees[j], X).matrix();
  return phi;
}

Vector predict(const Individual& ind, const Matrix& X) {
  if (ind.beta.size() != ind.trees.size()) throw std::invalid_argument("predict: individual has no fitted beta");
  const auto phi = forward(ind, X);
  const Eigen::Map<const Vector> beta(ind.beta.data(), static_cast<Eigen::Index>(ind.beta.size()));
  return (phi * beta).array() + ind.intercept;
}

double batch_loss(const Individual& ind, const Matrix& X, const Vector& y) {
  return (y - predict(ind, X)).array().square().mean();
}

WeightGradients loss_gradient(const Individual& ind, const Matrix& X, const Vector& y) {
  return gradient_and_loss(ind, X, y).grads;
}

void sgd_step(Individual& ind, const Matrix& X, const Vector& y, double learning_rate) {
  apply_step(ind, loss_gradient(ind, X, y), learning_rate);
}

bool has_trainable_weights(const Individual& ind) {
  for (const auto& t : ind.trees) {
    if (t.type() != ValueType::Continuous) continue;
    for (const auto& n : t.nodes)
      if (n.n_weights() > 0) return true;
  }
  return false;
}

Individual train(Individual ind, const Matrix& X, const Vector& y, const SgdConfig& cfg, Rng& rng) {
  if (cfg.iterations <= 0 || X.rows() == 0 || !has_trainable_weights(ind)) return ind;
  const auto N = static_cast<std::size_t>(X.rows());
  const std::size_t B = std::min(cfg.batch_size, N);
  std::vector<Eigen::Index> perm(N);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::size_t cursor = N;
  double lr = cfg.learning_rate;
  Matrix Xb;
  Vector yb;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Matrix* xs = &X;
    const Vector* ys = &y;
    if (B < N) {
      if (cursor + B > N) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      const std::vector<Eigen::Index> rows(perm.begin() + static_cast<std::ptrdiff_t>(cursor),
                                           perm.begin() + static_cast<std::ptrdiff_t>(cursor + B));
      cursor += B;
      Xb = X(rows, Eigen::placeholders::all);
      yb = y(rows);
      xs = &Xb;
      ys = &yb;
    }
    const auto [grads, before] = gradient_and_loss(ind, *xs, *ys);
    auto saved = ind.trees;
    apply_step(ind, grads, lr);
    const double after = batch_loss(ind, *xs, *ys);
    if (!(after <= before)) {
      ind.trees = std::move(saved);
      lr *= 0.5;
    }
  }
  return ind;
}

}  // namespace featforge
