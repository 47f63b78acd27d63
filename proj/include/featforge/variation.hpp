#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "featforge/expr.hpp"
#include "featforge/rng.hpp"

namespace featforge {

struct VariationConfig {
  double crossover_ratio = 0.5;
  double feedback = 0.5;
  /// point, insert, delete, insert/delete dimension
  std::array<double, 4> mutation_weights{1.0, 1.0, 1.0, 1.0};
  /// subtree, dimension
  std::array<double, 2> crossover_weights{1.0, 1.0};
};

/// What random trees may contain and how large individuals may grow.
struct SearchSpace {
  std::size_t n_features = 1;
  int max_depth = 10;
  std::size_t max_dim = 50;
  int min_init_depth = 1;
  int max_init_depth = 3;
  double boolean_root_rate = 0.1;
  double feedback = 0.5;

  Limits limits() const { return {max_depth, max_dim, n_features}; }
};

/// Weights for trainable edges on newly created nodes, uniform in (0, 1].
double initial_weight(Rng& rng);

/// Tree index drawn from the individual's feedback probabilities; uniform
/// when the individual has no fitted coefficients.
std::size_t choose_tree(const Individual& ind, double feedback, Rng& rng);

/// Grow-method tree of the given root type and depth at most `max_depth`.
/// `terminal_probs` weights feature choice (empty: uniform).
Tree random_tree(const SearchSpace& space, int max_depth, ValueType root, Rng& rng,
                 std::span<const double> terminal_probs = {});

/// Dimensionality uniform in [1, min(max_dim, 2d)], each tree grown to a depth
/// drawn uniformly from [min_init_depth, max_init_depth].
Individual random_individual(const SearchSpace& space, Rng& rng, std::span<const double> terminal_probs = {});

// Each operator returns nullopt when it cannot apply (the caller keeps the parent).
std::optional<Individual> point_mutation(const Individual& ind, const SearchSpace& space, Rng& rng);
std::optional<Individual> insert_mutation(const Individual& ind, const SearchSpace& space, Rng& rng);
std::optional<Individual> delete_mutation(const Individual& ind, const SearchSpace& space, Rng& rng);
std::optional<Individual> insert_dimension(const Individual& ind, const SearchSpace& space, Rng& rng);
std::optional<Individual> delete_dimension(const Individual& ind, const SearchSpace& space, Rng& rng);
std::optional<Individual> subtree_crossover(const Individual& a, const Individual& b, const SearchSpace& space,
                                            Rng& rng);
std::optional<Individual> dimension_crossover(const Individual& a, const Individual& b, const SearchSpace& space,
                                              Rng& rng);

enum class VariationKind { Point, Insert, Delete, InsertDimension, DeleteDimension, SubtreeCrossover, DimensionCrossover };

const char* to_string(VariationKind kind);

struct Offspring {
  Individual child;
  VariationKind kind = VariationKind::Point;
  bool changed = false;
  std::size_t parent_a = 0;  // index into the pool
  std::size_t parent_b = 0;  // equals parent_a for mutations
};

/// One variation event for child `index`. Its generator is derived from
/// (seed, generation, index), so children can be produced in any order.
Offspring vary_one(std::span<const Individual> pool, std::span<const std::size_t> parents, std::size_t index,
                   const VariationConfig& cfg, const SearchSpace& space, std::uint64_t seed, int generation);

/// `count` children; child k's primary parent is parents[k % parents.size()].
std::vector<Offspring> make_offspring(std::span<const Individual> pool, std::span<const std::size_t> parents,
                                      std::size_t count, const VariationConfig& cfg, const SearchSpace& space,
                                      std::uint64_t seed, int generation, int threads = 1);

}  // namespace featforge
