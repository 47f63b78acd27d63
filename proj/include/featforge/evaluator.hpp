#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

#include "featforge/expr.hpp"
#include "featforge/rng.hpp"

namespace featforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// N x m matrix: column j holds tree j evaluated on every sample.
using ReprMatrix = Eigen::MatrixXd;

/// Magnitude beyond which node outputs are clamped.
inline constexpr double kValueLimit = 1e12;
/// Per-weight gradient clip.
inline constexpr double kGradientClip = 1e6;
/// Regularizer in protected division a*b / (b^2 + eps).
inline constexpr double kDivEpsilon = 1e-9;

struct SgdConfig {
  double learning_rate = 0.1;
  int iterations = 10;
  std::size_t batch_size = 1000;
};

/// Scalar view of one node: `args` are the raw child outputs (for a terminal,
/// the feature value). Weighted inputs u_i = w_i * a_i feed the node function.
double apply_node(Op op, std::span<const double> args, std::span<const double> weights);

struct NodeGradient {
  std::array<double, 2> d_args{0.0, 0.0};
  std::array<double, 2> d_weights{0.0, 0.0};
};
NodeGradient node_gradient(Op op, std::span<const double> args, std::span<const double> weights);

Eigen::ArrayXd evaluate(const Tree& tree, const Matrix& X);
/// Throws std::out_of_range when a terminal references a missing column.
ReprMatrix forward(const Individual& ind, const Matrix& X);

/// Phi * beta + intercept using the individual's stored output layer.
Vector predict(const Individual& ind, const Matrix& X);

/// (1/B) sum (y - phi^T beta - b)^2 with beta taken from the individual.
double batch_loss(const Individual& ind, const Matrix& X, const Vector& y);

/// dLoss/dw for every active weight, laid out [tree][node][weight].
using WeightGradients = std::vector<std::vector<std::array<double, 2>>>;
WeightGradients loss_gradient(const Individual& ind, const Matrix& X, const Vector& y);

/// One descent step on the differentiable weights; beta stays fixed and
/// boolean-rooted trees are skipped.
void sgd_step(Individual& ind, const Matrix& X, const Vector& y, double learning_rate);

/// Runs cfg.iterations steps over batches drawn without replacement. The step
/// size halves (and the step is undone) whenever a step raises batch loss.
Individual train(Individual ind, const Matrix& X, const Vector& y, const SgdConfig& cfg, Rng& rng);

bool has_trainable_weights(const Individual& ind);

}  // namespace featforge
