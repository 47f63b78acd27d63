#pragma once

#include <span>
#include <vector>

#include "featforge/evaluator.hpp"
#include "featforge/rng.hpp"

namespace featforge {

/// P x N per-sample squared errors, one row per pool member.
using CaseErrors = Eigen::MatrixXd;

/// Median absolute deviation of each case's errors across the pool.
std::vector<double> case_epsilons(const CaseErrors& errors);

struct LexicaseTrace {
  std::vector<Eigen::Index> cases;  // in the order they were applied
};

/// Epsilon-lexicase parent selection. Cases are visited in random order (a
/// random subset of `max_cases` when there are more); each keeps the survivors
/// within epsilon of the best survivor on that case.
std::size_t epsilon_lexicase_select(const CaseErrors& errors, std::span<const double> epsilons, Rng& rng,
                                    LexicaseTrace* trace = nullptr, std::size_t max_cases = 1000);

using FitnessView = std::span<const std::vector<double>>;

/// a dominates b: no worse everywhere, strictly better somewhere.
bool dominates(const std::vector<double>& a, const std::vector<double>& b);

/// Pareto rank per individual, 0 for the non-dominated front.
std::vector<int> fast_nondominated_sort(FitnessView fitness);

/// Crowding distance of each member of `front` (indices into fitness).
std::vector<double> crowding_distance(FitnessView fitness, std::span<const std::size_t> front);

struct SurvivalResult {
  std::vector<std::size_t> survivors;
  std::vector<int> rank;         // per candidate
  std::vector<double> crowding;  // per candidate
};

/// Whole fronts in rank order; the straddling front is truncated by
/// descending crowding distance, ties by index.
SurvivalResult nsga2_survive(FitnessView fitness, std::size_t survivors);

/// Binary tournament on (rank, crowding), used by the standalone NSGA2 strategy.
std::size_t crowded_tournament(std::span<const int> rank, std::span<const double> crowding, Rng& rng);

/// `losses` holds parents followed by offspring, `survivors` of each.
/// Offspring survive; the best parent replaces the worst offspring when it
/// beats every offspring.
std::vector<std::size_t> lex_survive(std::span<const double> losses, std::size_t survivors);

struct AnnealSchedule {
  double t0 = 10.0;
  double decay = 0.9;

  double temperature(int generation) const;
};

double anneal_probability(double f_parent, double f_offspring, double t);
bool anneal_accept(double f_parent, double f_offspring, double t, Rng& rng);

}  // namespace featforge
