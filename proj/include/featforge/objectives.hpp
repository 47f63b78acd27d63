#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "featforge/evaluator.hpp"

namespace featforge {

enum class Objective { Mse, Complexity, Corr, CondNumber };

/// Objectives to minimise; MSE always comes first.
class ObjectiveSet {
 public:
  ObjectiveSet() = default;
  explicit ObjectiveSet(std::vector<Objective> items);
  /// "mse,complexity[,corr|cn]"
  static ObjectiveSet parse(std::string_view text);

  const std::vector<Objective>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::string to_string() const;

 private:
  std::vector<Objective> items_{Objective::Mse, Objective::Complexity};
};

/// Returned for CN when the representation is (numerically) rank deficient.
inline constexpr double kCondSentinel = 1e12;
/// Objective value recorded for individuals whose evaluation failed.
inline constexpr double kWorstFitness = std::numeric_limits<double>::max();

/// Mean squared Pearson correlation over ordered column pairs; constant
/// columns correlate with nothing.
double corr_entanglement(const ReprMatrix& phi);

/// Largest over smallest singular value of the column-standardised matrix.
double cond_number(const ReprMatrix& phi);

std::vector<double> objective_vector(const ObjectiveSet& set, double mse, long long complexity, const ReprMatrix& phi);
std::vector<double> worst_fitness(const ObjectiveSet& set);

/// Scores an already fitted individual on (X, y).
std::vector<double> evaluate(const Individual& ind, const Matrix& X, const Vector& y, const ObjectiveSet& set,
                             const ComplexityTable& table = ComplexityTable::defaults());

}  // namespace featforge
