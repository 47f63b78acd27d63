#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "featforge/archive.hpp"
#include "featforge/dataset.hpp"
#include "featforge/evaluator.hpp"
#include "featforge/linear.hpp"
#include "featforge/objectives.hpp"
#include "featforge/selection.hpp"
#include "featforge/variation.hpp"

namespace featforge {

enum class Strategy { Lex, Nsga2, LexNsga2, SimAnneal, Random };

Strategy parse_strategy(std::string_view name);
const char* to_string(Strategy s);

struct RunConfig {
  std::size_t population = 500;
  int max_generations = 200;
  double time_budget_s = 3600.0;
  int stall_window = 50;
  int max_depth = 10;
  std::size_t max_dim = 50;
  ObjectiveSet objectives;
  Strategy strategy = Strategy::LexNsga2;
  SgdConfig sgd;
  VariationConfig variation;
  double ridge_lambda = 1e-3;
  std::uint64_t seed = 0;
  double val_fraction = 0.25;
  int threads = 1;
  ComplexityTable complexity = ComplexityTable::defaults();
  AnnealSchedule anneal;
  std::size_t lexicase_max_cases = 1000;

  /// Throws std::invalid_argument naming the offending field.
  void check() const;
};

struct Population {
  std::vector<Individual> members;
  int generation = 0;
};

/// Identity individual [x0]..[x{d-1}] with unit weights.
Individual identity_individual(std::size_t d);

/// Feature sampling weights proportional to |beta| (uniform if all zero).
std::vector<double> terminal_probabilities(std::span<const double> beta);

/// Individual 0 is the identity; the rest are random with terminals sampled in
/// proportion to an initial ridge fit on X. Nothing is evaluated yet.
Population initialize(const Matrix& X, const Vector& y, const RunConfig& cfg);

struct EvalData {
  const Matrix& X_train;
  const Vector& y_train;
  const Matrix& X_val;
  const Vector& y_val;
};

/// forward -> ridge -> SGD with beta frozen -> forward -> ridge refit ->
/// objectives. Failures leave worst-case fitness; nothing is thrown.
void evaluate_individual(Individual& ind, const EvalData& data, const RunConfig& cfg, Rng& rng);

enum class StopReason { None, Generations, TimeBudget, Stalled };
const char* to_string(StopReason r);

/// Evolutionary loop over standardised data. The validation split is used for
/// stall detection and final model selection only.
class Engine {
 public:
  Engine(Matrix X_train, Vector y_train, Matrix X_val, Vector y_val, RunConfig cfg);

  void initialize();
  void step();
  StopReason stop_reason() const;
  /// initialize, then step until a stop criterion holds; `on_generation`
  /// runs after initialisation and after every step.
  void run(const std::function<void(const Engine&)>& on_generation = {});

  /// Archive entries plus the initial linear model, scored on both splits;
  /// returns the lowest-validation-loss candidate.
  ArchiveEntry select_final(std::vector<ArchiveEntry>* scored_archive = nullptr) const;

  const Population& population() const { return pop_; }
  const ParetoArchive& archive() const { return archive_; }
  const Individual& baseline() const { return baseline_; }
  const RunConfig& config() const { return cfg_; }
  int generation() const { return pop_.generation; }
  double median_val_mse() const { return median_val_; }
  double elapsed_seconds() const;
  const SearchSpace& space() const { return space_; }

 private:
  EvalData data() const { return {X_train_, y_train_, X_val_, y_val_}; }
  void evaluate_all(std::vector<Individual>& inds, std::uint64_t stage);
  std::vector<std::size_t> select_parents();
  void survive(std::vector<Individual>& offspring, const std::vector<Offspring>& lineage);
  void assign_ranks();
  void track_stall();

  Matrix X_train_;
  Vector y_train_;
  Matrix X_val_;
  Vector y_val_;
  RunConfig cfg_;
  SearchSpace space_;
  std::vector<double> terminal_probs_;
  Population pop_;
  ParetoArchive archive_;
  Individual baseline_;
  double median_val_ = 0.0;
  double best_median_val_ = 0.0;
  int stall_ = 0;
  std::chrono::steady_clock::time_point started_;
};

struct RunSummary {
  int generations = 0;
  double runtime_s = 0.0;
  std::string stop_reason;
  double baseline_val_mse = 0.0;
  double final_val_mse = 0.0;
};

struct FeatModel {
  Individual model;  // operates on standardised features
  Standardizer standardizer;
  std::vector<ArchiveEntry> archive;
  std::vector<std::string> feature_names;
  std::string target_name;
  RunConfig config;
  RunSummary summary;

  /// Predictions on raw (unstandardised) features.
  Vector predict(const Matrix& X) const;
};

/// Splits off the last-drawn val_fraction of a seeded shuffle for validation;
/// returns (train rows, validation rows).
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> validation_split(std::size_t n, double fraction,
                                                                                 std::uint64_t seed);

FeatModel fit(const Dataset& data, const RunConfig& cfg, const std::function<void(const Engine&)>& on_generation = {});
Vector predict(const FeatModel& model, const Matrix& X);
double score(const FeatModel& model, const Matrix& X, const Vector& y);

}  // namespace featforge
