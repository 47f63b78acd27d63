#include <doctest.h>

#include <cmath>

#include "featforge/engine.hpp"
#include "featforge/evaluator.hpp"
#include "oracles.hpp"

using namespace featforge;

namespace {

Individual with_fit(Individual ind, const Matrix& X, const Vector& y) {
  const auto lm = ridge_fit(forward(ind, X), y, 1e-3);
  ind.beta.assign(lm->beta.data(), lm->beta.data() + lm->beta.size());
  ind.intercept = lm->intercept;
  return ind;
}

}  // namespace

TEST_CASE("identity representation reproduces X") {
  std::mt19937_64 rng(1);
  const Matrix X = oracle::random_matrix(rng, 20, 4);
  CHECK(forward(identity_individual(4), X) == X);
}

TEST_CASE("edge weights scale arguments") {
  Matrix X(3, 2);
  X << 1, 2, 3, 4, -1, 0.5;
  Tree t{{Node::terminal(0), Node::terminal(1), Node::function(Op::Add)}};
  t.nodes[2].weights = {2.0, 3.0};
  const Eigen::ArrayXd col = evaluate(t, X);
  for (int i = 0; i < 3; ++i) CHECK(col(i) == doctest::Approx(2 * X(i, 0) + 3 * X(i, 1)));
}

TEST_CASE("tanh column") {
  Matrix X(2, 1);
  X << 0, 1;
  const auto col = evaluate(parse_tree("tanh(x0)"), X);
  CHECK(col(0) == 0.0);
  CHECK(col(1) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
  CHECK(col(1) == doctest::Approx(0.76159).epsilon(1e-5));
}

TEST_CASE("protected operators stay finite") {
  Matrix X(3, 2);
  X << 0, 0, -4, 1e300, 1e8, -1e-300;
  for (const char* s : {"(x0/x1)", "log(x0)", "sqrt(x0)", "exp(x1)", "exponent(x0,x1)", "((x0^3)^3)", "logit(x1)",
                        "exponent(x1,x0)", "(x1/x0)"}) {
    CAPTURE(s);
    const auto col = evaluate(parse_tree(s), X);
    CHECK(col.allFinite());
    CHECK(col.abs().maxCoeff() <= kValueLimit);
  }
  CHECK(evaluate(parse_tree("log(x0)"), X)(0) == 0.0);
  CHECK(evaluate(parse_tree("sqrt(x0)"), X)(1) == doctest::Approx(2.0));
  CHECK(evaluate(parse_tree("(x0/x1)"), X)(0) == 0.0);
  CHECK(evaluate(parse_tree("gauss(x0)"), X)(1) == doctest::Approx(std::exp(-16.0)));
  CHECK(evaluate(parse_tree("logit(x0)"), X)(0) == doctest::Approx(0.5));
}

TEST_CASE("boolean trees evaluate to 0/1") {
  Matrix X(3, 2);
  X << 0, 1, 2, 1, 1, 1;
  CHECK(evaluate(parse_tree("(x0<x1)"), X).matrix() == Eigen::Vector3d(1, 0, 0));
  CHECK(evaluate(parse_tree("(x0=x1)"), X).matrix() == Eigen::Vector3d(0, 0, 1));
  CHECK(evaluate(parse_tree("not((x0<x1))"), X).matrix() == Eigen::Vector3d(0, 1, 1));
  CHECK(evaluate(parse_tree("xor((x0<x1),(x0>=x1))"), X).matrix() == Eigen::Vector3d(1, 1, 1));
  CHECK(evaluate(parse_tree("and((x0<=x1),(x0>=x1))"), X).matrix() == Eigen::Vector3d(0, 0, 1));
  CHECK(evaluate(parse_tree("or((x0<x1),(x0>x1))"), X).matrix() == Eigen::Vector3d(1, 1, 0));
}

TEST_CASE("forward rejects missing features and is pure") {
  std::mt19937_64 rng(2);
  const Matrix X = oracle::random_matrix(rng, 10, 2);
  CHECK_THROWS_AS(forward(parse("[x2]"), X), std::out_of_range);
  const auto ind = parse("[tanh(x0{0.3})][exponent(x0,x1){0.5,2}][(x0/x1)]");
  const auto a = forward(ind, X), b = forward(ind, X);
  CHECK(a == b);
}

TEST_CASE("node gradients match finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> arg(0.3, 2.0), w(0.5, 1.5), sign(0, 1);
  for (const auto& k : node_kinds()) {
    if (!k.differentiable) continue;
    CAPTURE(k.name);
    for (int trial = 0; trial < 100; ++trial) {
      std::array<double, 2> a{arg(rng) * (sign(rng) < 0.5 ? -1 : 1), arg(rng) * (sign(rng) < 0.5 ? -1 : 1)};
      std::array<double, 2> ws{w(rng), w(rng)};
      if (k.op == Op::Relu && std::abs(a[0] * ws[0]) < 1e-3) continue;
      const std::size_t na = k.op == Op::Feature ? 1 : k.arity;
      const auto g = node_gradient(k.op, {a.data(), na}, {ws.data(), weight_count(k.op)});
      for (std::size_t i = 0; i < na; ++i) {
        const double num_a = oracle::central_difference(
            [&](double v) {
              auto b = a;
              b[i] = v;
              return apply_node(k.op, {b.data(), na}, {ws.data(), weight_count(k.op)});
            },
            a[i]);
        CHECK(oracle::relative_error(g.d_args[i], num_a) < 1e-4);
      }
      for (std::size_t i = 0; i < weight_count(k.op); ++i) {
        const double num_w = oracle::central_difference(
            [&](double v) {
              auto b = ws;
              b[i] = v;
              return apply_node(k.op, {a.data(), na}, {b.data(), weight_count(k.op)});
            },
            ws[i]);
        CHECK(oracle::relative_error(g.d_weights[i], num_w) < 1e-4);
      }
    }
  }
}

TEST_CASE("loss gradient matches finite differences") {
  std::mt19937_64 rng(4);
  const Matrix X = oracle::random_matrix(rng, 30, 3);
  Vector y = (X.col(0).array().tanh() + X.col(1).array().square()).matrix();
  auto ind = with_fit(parse("[tanh((x0{0.7}*x2){0.9,1.1})][gauss(x1{0.4})][(x1/(x2+x0))]"), X, y);
  const auto g = loss_gradient(ind, X, y);
  for (std::size_t t = 0; t < ind.trees.size(); ++t)
    for (std::size_t n = 0; n < ind.trees[t].size(); ++n)
      for (std::size_t k = 0; k < ind.trees[t].nodes[n].n_weights(); ++k) {
        const double w0 = ind.trees[t].nodes[n].weights[k];
        const double num = oracle::central_difference(
            [&](double v) {
              auto copy = ind;
              copy.trees[t].nodes[n].weights[k] = v;
              return batch_loss(copy, X, y);
            },
            w0);
        CAPTURE(t);
        CAPTURE(n);
        CHECK(oracle::relative_error(g[t][n][k], num) < 1e-4);
      }
}

TEST_CASE("sgd step hand example") {
  Matrix X(1, 1);
  X << 1;
  Vector y(1);
  y << 2;
  Individual ind = parse("[x0]");
  ind.beta = {1.0};
  ind.intercept = 0.0;
  const auto g = loss_gradient(ind, X, y);
  CHECK(g[0][0][0] == doctest::Approx(-2.0));
  sgd_step(ind, X, y, 0.1);
  CHECK(ind.trees[0].nodes[0].weights[0] == doctest::Approx(1.2));
  CHECK(ind.beta[0] == 1.0);
}

TEST_CASE("sgd leaves weights alone without a gradient") {
  std::mt19937_64 rng(5);
  const Matrix X = oracle::random_matrix(rng, 10, 2);
  Individual perfect = parse("[tanh(x0{0.5})]");
  perfect.beta = {2.0};
  perfect.intercept = 1.0;
  const Vector y = predict(perfect, X);
  const auto before = perfect.trees;
  sgd_step(perfect, X, y, 0.1);
  CHECK(perfect.trees == before);

  Individual zero = parse("[tanh(x0{0.5})][x1]");
  zero.beta = {0.0, 1.0};
  const Vector y2 = X.col(0) * 3.0;
  sgd_step(zero, X, y2, 0.1);
  CHECK(zero.trees[0] == parse_tree("tanh(x0{0.5})"));
  CHECK_FALSE(zero.trees[1] == parse_tree("x1"));
}

TEST_CASE("train edge cases") {
  std::mt19937_64 g(6);
  const Matrix X = oracle::random_matrix(g, 20, 2);
  const Vector y = X.col(0).array().tanh().matrix() * 2.0;
  Rng rng(1);
  auto ind = with_fit(parse("[tanh(x0{0.3})]"), X, y);
  SgdConfig none;
  none.iterations = 0;
  CHECK(train(ind, X, y, none, rng).trees == ind.trees);
  auto boolean = with_fit(parse("[(x0<x1)]"), X, y);
  CHECK_FALSE(has_trainable_weights(boolean));
  CHECK(train(boolean, X, y, SgdConfig{}, rng).trees == boolean.trees);
  const auto trained = train(ind, X, y, SgdConfig{}, rng);
  REQUIRE(trained.trees[0].size() == ind.trees[0].size());
  for (std::size_t i = 0; i < trained.trees[0].size(); ++i) CHECK(trained.trees[0].nodes[i].op == ind.trees[0].nodes[i].op);
}

TEST_CASE("train usually reduces training loss") {
  int improved = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 g(100 + s);
    const Matrix X = oracle::random_matrix(g, 200, 1);
    const Vector y = X.col(0).array().tanh().matrix() * 2.0;
    Rng rng = make_stream(s, {});
    const double w = std::uniform_real_distribution<double>(0.1, 1.0)(g);
    Individual ind = parse("[tanh(x0)]");
    ind.trees[0].nodes[1].weights[0] = w;
    ind = with_fit(ind, X, y);
    const double before = batch_loss(ind, X, y);
    const auto after = train(ind, X, y, SgdConfig{}, rng);
    if (batch_loss(after, X, y) < before) ++improved;
  }
  CHECK(improved >= 90);
}

TEST_CASE("train is reproducible for a fixed stream") {
  std::mt19937_64 g(7);
  const Matrix X = oracle::random_matrix(g, 3000, 2);
  const Vector y = (X.col(0).array().sin() + X.col(1).array()).matrix();
  auto ind = with_fit(parse("[sin(x0{0.2})][relu(x1{0.9})]"), X, y);
  Rng a(5), b(5);
  CHECK(train(ind, X, y, SgdConfig{}, a).trees == train(ind, X, y, SgdConfig{}, b).trees);
}
