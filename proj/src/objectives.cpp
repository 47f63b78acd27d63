#include "featforge/objectives.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "featforge/linear.hpp"

namespace featforge {

ObjectiveSet::ObjectiveSet(std::vector<Objective> items) : items_(std::move(items)) {
  if (items_.empty() || items_.front() != Objective::Mse)
    throw std::invalid_argument("objective set must start with mse");
}

ObjectiveSet ObjectiveSet::parse(std::string_view text) {
  std::vector<Objective> items;
  std::stringstream ss{std::string(text)};
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "mse")
      items.push_back(Objective::Mse);
    else if (tok == "complexity" || tok == "c")
      items.push_back(Objective::Complexity);
    else if (tok == "corr")
      items.push_back(Objective::Corr);
    else if (tok == "cn")
      items.push_back(Objective::CondNumber);
    else
      throw std::invalid_argument("unknown objective '" + tok + "'");
  }
  return ObjectiveSet(std::move(items));
}

std::string ObjectiveSet::to_string() const {
  std::string s;
  for (auto o : items_) {
    if (!s.empty()) s += ',';
    switch (o) {
      case Objective::Mse:
        s += "mse";
        break;
      case Objective::Complexity:
        s += "complexity";
        break;
      case Objective::Corr:
        s += "corr";
        break;
      case Objective::CondNumber:
        s += "cn";
        break;
    }
  }
  return s;
}

namespace {

// Centred columns scaled to unit population variance; constant columns -> 0.
Matrix standardized_columns(const ReprMatrix& phi, std::vector<bool>& constant) {
  Matrix z = phi.rowwise() - phi.colwise().mean();
  constant.assign(static_cast<std::size_t>(phi.cols()), false);
  const double n = static_cast<double>(phi.rows());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double sd = std::sqrt(z.col(j).squaredNorm() / n);
    const double scale = phi.col(j).cwiseAbs().maxCoeff();
    if (!(sd > 1e-12 * std::max(1.0, scale)) || !std::isfinite(sd)) {
      constant[static_cast<std::size_t>(j)] = true;
      z.col(j).setZero();
    } else {
      z.col(j) /= sd;
    }
  }
  return z;
}

}  // namespace

double corr_entanglement(const ReprMatrix& phi) {
  const Eigen::Index m = phi.cols();
  if (m < 2 || phi.rows() < 2) return 0.0;
  std::vector<bool> constant;
  const Matrix z = standardized_columns(phi, constant);
  const Matrix corr = (z.transpose() * z) / static_cast<double>(phi.rows());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) sum += std::min(1.0, corr(i, j) * corr(i, j));
  return sum / static_cast<double>(m * (m - 1));
}

double cond_number(const ReprMatrix& phi) {
  if (phi.cols() == 0 || phi.rows() < phi.cols() || !phi.allFinite()) return kCondSentinel;
  std::vector<bool> constant;
  const Matrix z = standardized_columns(phi, constant);
  const Vector sv = Eigen::JacobiSVD<Matrix>(z).singularValues();
  const double hi = sv.maxCoeff();
  const double lo = sv.minCoeff();
  if (!(hi > 0.0) || lo < 1e-12 * hi) return kCondSentinel;
  return std::max(1.0, hi / lo);
}

std::vector<double> objective_vector(const ObjectiveSet& set, double mse, long long complexity, const ReprMatrix& phi) {
  std::vector<double> f;
  f.reserve(set.size());
  for (auto o : set.items()) {
    switch (o) {
      case Objective::Mse:
        f.push_back(mse);
        break;
      case Objective::Complexity:
        f.push_back(static_cast<double>(complexity));
        break;
      case Objective::Corr:
        f.push_back(corr_entanglement(phi));
        break;
      case Objective::CondNumber:
        f.push_back(cond_number(phi));
        break;
    }
  }
  return f;
}

std::vector<double> worst_fitness(const ObjectiveSet& set) { return std::vector<double>(set.size(), kWorstFitness); }

std::vector<double> evaluate(const Individual& ind, const Matrix& X, const Vector& y, const ObjectiveSet& set,
                             const ComplexityTable& table) {
  try {
    const ReprMatrix phi = forward(ind, X);
    const Eigen::Map<const Vector> beta(ind.beta.data(), static_cast<Eigen::Index>(ind.beta.size()));
    if (beta.size() != phi.cols()) return worst_fitness(set);
    const double err = mse(y, (phi * beta).array() + ind.intercept);
    if (!std::isfinite(err)) return worst_fitness(set);
    return objective_vector(set, err, complexity(ind, table), phi);
  } catch (const std::exception&) {
    return worst_fitness(set);
  }
}

}  // namespace featforge
