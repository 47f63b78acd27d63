#include "featforge/linear.hpp"

#include <cmath>
#include <stdexcept>

namespace featforge {

Standardizer standardize_fit(const Matrix& X) {
  if (X.size() == 0) throw std::invalid_argument("standardize_fit: empty matrix");
  if (X.rows() < 2) throw std::invalid_argument("standardize_fit: need at least two rows");
  Standardizer s;
  s.means = X.colwise().mean().transpose();
  s.stds.resize(X.cols());
  s.constant.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - s.means(j)).square().mean());
    const bool flat = !(sd > 1e-12 * std::max(1.0, std::abs(s.means(j))));
    s.constant[static_cast<std::size_t>(j)] = flat;
    s.stds(j) = flat ? 1.0 : sd;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& X) const {
  if (X.cols() != means.size())
    throw std::invalid_argument("standardize_apply: expected " + std::to_string(means.size()) + " columns, got " +
                                std::to_string(X.cols()));
  Matrix out = (X.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (constant[static_cast<std::size_t>(j)]) out.col(j).setZero();
  return out;
}

Matrix standardize_apply(const Standardizer& s, const Matrix& X) { return s.apply(X); }

std::optional<LinearModel> ridge_fit(const Matrix& phi, const Vector& y, double lambda) {
  if (phi.rows() != y.size() || phi.rows() == 0) throw std::invalid_argument("ridge_fit: shape mismatch");
  if (!phi.allFinite() || !y.allFinite()) return std::nullopt;
  const Eigen::Index m = phi.cols();
  const Vector col_mean = phi.colwise().mean().transpose();
  const double y_mean = y.mean();
  const Matrix centred = phi.rowwise() - col_mean.transpose();
  const Vector yc = y.array() - y_mean;

  Matrix gram = centred.transpose() * centred;
  gram.diagonal().array() += lambda;
  const Vector rhs = centred.transpose() * yc;

  Vector beta;
  Eigen::LDLT<Matrix> ldlt(gram);
  bool ok = false;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    beta = ldlt.solve(rhs);
    const double scale = rhs.norm() + gram.norm() * beta.norm();
    ok = beta.allFinite() && (gram * beta - rhs).norm() <= 1e-8 * scale + 1e-300;
  }
  if (!ok) {
    beta = Eigen::CompleteOrthogonalDecomposition<Matrix>(gram).solve(rhs);
    if (!beta.allFinite()) return std::nullopt;
  }
  LinearModel model;
  model.beta = beta;
  model.intercept = m > 0 ? y_mean - col_mean.dot(beta) : y_mean;
  model.ridge_lambda = lambda;
  if (!std::isfinite(model.intercept)) return std::nullopt;
  return model;
}

double mse(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size() || y.size() == 0) throw std::invalid_argument("mse: length mismatch");
  return (y - yhat).array().square().mean();
}

double r2_score(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size() || y.size() == 0) throw std::invalid_argument("r2_score: length mismatch");
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (ss_tot == 0.0) return 0.0;
  return 1.0 - (y - yhat).array().square().sum() / ss_tot;
}

std::vector<double> feedback_probs(std::span<const double> beta, double f) {
  const std::size_t m = beta.size();
  std::vector<double> pm(m);
  if (m == 0) return pm;
  double total = 0.0;
  for (double b : beta) total += std::abs(b);
  std::vector<double> s(m);
  double z = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double normed = total > 0.0 ? std::abs(beta[i]) / total : 1.0 / static_cast<double>(m);
    s[i] = std::exp(1.0 - normed);
    z += s[i];
  }
  for (std::size_t i = 0; i < m; ++i) pm[i] = f * s[i] / z + (1.0 - f) / static_cast<double>(m);
  return pm;
}

}  // namespace featforge
