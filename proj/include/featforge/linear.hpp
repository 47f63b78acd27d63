#pragma once

#include <optional>
#include <span>
#include <vector>

#include "featforge/evaluator.hpp"

namespace featforge {

struct Standardizer {
  Vector means;
  Vector stds;
  std::vector<bool> constant;  // columns with zero spread; their std is 1

  Matrix apply(const Matrix& X) const;
};

/// Population (1/N) standard deviation per column. Throws on fewer than two rows.
Standardizer standardize_fit(const Matrix& X);
Matrix standardize_apply(const Standardizer& s, const Matrix& X);

struct LinearModel {
  Vector beta;
  double intercept = 0.0;
  double ridge_lambda = 0.0;

  Vector predict(const Matrix& phi) const { return (phi * beta).array() + intercept; }
};

/// Ridge on column-centred phi and y; the intercept is not penalised. Falls
/// back to a pseudo-inverse when the normal equations are ill-posed. Returns
/// nullopt only when no finite solution exists.
std::optional<LinearModel> ridge_fit(const Matrix& phi, const Vector& y, double lambda);

double mse(const Vector& y, const Vector& yhat);
/// 1 - SS_res / SS_tot; 0 when y is constant.
double r2_score(const Vector& y, const Vector& yhat);

/// Mutation probability for each tree from its output coefficient: trees with
/// small |beta| are favoured, blended with uniform by (1 - f).
std::vector<double> feedback_probs(std::span<const double> beta, double f);

}  // namespace featforge
