#include "featforge/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "featforge/parallel.hpp"

namespace featforge {

Strategy parse_strategy(std::string_view name) {
  if (name == "lex") return Strategy::Lex;
  if (name == "nsga2") return Strategy::Nsga2;
  if (name == "lexnsga2") return Strategy::LexNsga2;
  if (name == "simanneal") return Strategy::SimAnneal;
  if (name == "random") return Strategy::Random;
  throw std::invalid_argument("unknown strategy '" + std::string(name) +
                              "' (expected lex, nsga2, lexnsga2, simanneal, random)");
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Lex:
      return "lex";
    case Strategy::Nsga2:
      return "nsga2";
    case Strategy::LexNsga2:
      return "lexnsga2";
    case Strategy::SimAnneal:
      return "simanneal";
    case Strategy::Random:
      return "random";
  }
  return "unknown";
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::None:
      return "running";
    case StopReason::Generations:
      return "max_generations";
    case StopReason::TimeBudget:
      return "time_budget";
    case StopReason::Stalled:
      return "stalled";
  }
  return "unknown";
}

void RunConfig::check() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
  };
  require(population >= 1, "population must be >= 1");
  require(max_generations >= 0, "max_generations must be >= 0");
  require(time_budget_s > 0, "time budget must be positive");
  require(stall_window >= 1, "stall window must be >= 1");
  require(max_depth >= 1, "max depth must be >= 1");
  require(max_dim >= 1, "max dimensionality must be >= 1");
  require(sgd.learning_rate > 0, "learning rate must be positive");
  require(sgd.iterations >= 0, "sgd iterations must be >= 0");
  require(sgd.batch_size >= 1, "batch size must be >= 1");
  require(ridge_lambda >= 0, "ridge lambda must be >= 0");
  require(variation.crossover_ratio >= 0 && variation.crossover_ratio <= 1, "crossover ratio must be in [0,1]");
  require(variation.feedback >= 0 && variation.feedback <= 1, "feedback must be in [0,1]");
  require(val_fraction >= 0 && val_fraction < 1, "validation fraction must be in [0,1)");
  require(anneal.t0 > 0 && anneal.decay > 0 && anneal.decay < 1, "anneal schedule needs t0 > 0, 0 < decay < 1");
  require(threads >= 1, "threads must be >= 1");
  require(lexicase_max_cases >= 1, "lexicase case cap must be >= 1");
}

Individual identity_individual(std::size_t d) {
  Individual ind;
  for (std::size_t j = 0; j < d; ++j) ind.trees.push_back(Tree{{Node::terminal(static_cast<std::uint32_t>(j))}});
  return ind;
}

std::vector<double> terminal_probabilities(std::span<const double> beta) {
  std::vector<double> p(beta.size());
  double total = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j) total += (p[j] = std::isfinite(beta[j]) ? std::abs(beta[j]) : 0.0);
  if (!(total > 0.0)) std::fill(p.begin(), p.end(), 1.0);
  total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= total;
  return p;
}

namespace {

SearchSpace space_for(const RunConfig& cfg, std::size_t d) {
  SearchSpace s;
  s.n_features = d;
  s.max_depth = cfg.max_depth;
  // the identity representation must stay admissible
  s.max_dim = std::max(cfg.max_dim, d);
  s.max_init_depth = std::min(3, cfg.max_depth);
  s.feedback = cfg.variation.feedback;
  return s;
}

std::vector<double> initial_terminal_probs(const Matrix& X, const Vector& y, double lambda) {
  const auto lm = ridge_fit(X, y, lambda);
  if (!lm) return terminal_probabilities(std::vector<double>(static_cast<std::size_t>(X.cols()), 0.0));
  return terminal_probabilities(std::vector<double>(lm->beta.data(), lm->beta.data() + lm->beta.size()));
}

void mark_failed(Individual& ind, const RunConfig& cfg, std::size_t n_cases) {
  ind.fitness = worst_fitness(cfg.objectives);
  ind.train_mse = kWorstFitness;
  ind.val_mse = kWorstFitness;
  ind.case_errors.assign(n_cases, kWorstFitness);
  ind.beta.assign(ind.trees.size(), 0.0);
  ind.intercept = 0.0;
  ind.evaluated = true;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

std::size_t shared_trees(const Individual& a, const Individual& b) {
  std::size_t n = 0;
  for (const auto& t : a.trees)
    if (std::find(b.trees.begin(), b.trees.end(), t) != b.trees.end()) ++n;
  return n;
}

}  // namespace

Population initialize(const Matrix& X, const Vector& y, const RunConfig& cfg) {
  const auto d = static_cast<std::size_t>(X.cols());
  if (d == 0) throw std::invalid_argument("initialize: dataset has no features");
  const auto space = space_for(cfg, d);
  const auto probs = initial_terminal_probs(X, y, cfg.ridge_lambda);
  Population pop;
  pop.members.resize(cfg.population);
  pop.members[0] = identity_individual(d);
  for (std::size_t i = 1; i < cfg.population; ++i) {
    Rng rng = make_stream(cfg.seed, {stream::kInit, 0, i});
    pop.members[i] = random_individual(space, rng, probs);
  }
  return pop;
}

void evaluate_individual(Individual& ind, const EvalData& data, const RunConfig& cfg, Rng& rng) {
  const auto n_cases = static_cast<std::size_t>(data.X_train.rows());
  try {
    ReprMatrix phi = forward(ind, data.X_train);
    auto lm = ridge_fit(phi, data.y_train, cfg.ridge_lambda);
    if (!lm) return mark_failed(ind, cfg, n_cases);
    ind.beta.assign(lm->beta.data(), lm->beta.data() + lm->beta.size());
    ind.intercept = lm->intercept;

    ind = train(std::move(ind), data.X_train, data.y_train, cfg.sgd, rng);

    phi = forward(ind, data.X_train);
    lm = ridge_fit(phi, data.y_train, cfg.ridge_lambda);
    if (!lm) return mark_failed(ind, cfg, n_cases);
    ind.beta.assign(lm->beta.data(), lm->beta.data() + lm->beta.size());
    ind.intercept = lm->intercept;

    const Vector resid = data.y_train - lm->predict(phi);
    const Eigen::ArrayXd sq = resid.array().square();
    ind.case_errors.assign(sq.data(), sq.data() + sq.size());
    ind.train_mse = sq.mean();
    ind.complexity = complexity(ind, cfg.complexity);
    ind.val_mse = data.X_val.rows() > 0 ? mse(data.y_val, predict(ind, data.X_val)) : ind.train_mse;
    if (!std::isfinite(ind.train_mse) || !std::isfinite(ind.val_mse) || !sq.allFinite())
      return mark_failed(ind, cfg, n_cases);
    ind.fitness = objective_vector(cfg.objectives, ind.train_mse, ind.complexity, phi);
    ind.evaluated = true;
  } catch (const std::exception&) {
    ind.complexity = complexity(ind, cfg.complexity);
    mark_failed(ind, cfg, n_cases);
  }
}

Engine::Engine(Matrix X_train, Vector y_train, Matrix X_val, Vector y_val, RunConfig cfg)
    : X_train_(std::move(X_train)),
      y_train_(std::move(y_train)),
      X_val_(std::move(X_val)),
      y_val_(std::move(y_val)),
      cfg_(std::move(cfg)) {
  cfg_.check();
  if (X_train_.rows() != y_train_.size() || X_val_.rows() != y_val_.size())
    throw std::invalid_argument("Engine: X and y row counts differ");
  if (X_train_.rows() < 2) throw std::invalid_argument("Engine: need at least two training rows");
  if (X_val_.rows() > 0 && X_val_.cols() != X_train_.cols())
    throw std::invalid_argument("Engine: train and validation feature counts differ");
  space_ = space_for(cfg_, static_cast<std::size_t>(X_train_.cols()));
  started_ = std::chrono::steady_clock::now();
}

double Engine::elapsed_seconds() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
}

void Engine::evaluate_all(std::vector<Individual>& inds, std::uint64_t stage) {
  const auto d = data();
  parallel_for(inds.size(), cfg_.threads, [&](std::size_t i) {
    Rng rng = make_stream(cfg_.seed, {stream::kEval, stage, i});
    evaluate_individual(inds[i], d, cfg_, rng);
  });
}

void Engine::initialize() {
  started_ = std::chrono::steady_clock::now();
  terminal_probs_ = initial_terminal_probs(X_train_, y_train_, cfg_.ridge_lambda);
  pop_ = featforge::initialize(X_train_, y_train_, cfg_);
  evaluate_all(pop_.members, 0);
  baseline_ = pop_.members[0];
  assign_ranks();
  archive_.update(pop_.members);
  std::vector<double> vals;
  for (const auto& m : pop_.members) vals.push_back(m.val_mse);
  median_val_ = best_median_val_ = median(vals);
  stall_ = 0;
}

void Engine::assign_ranks() {
  std::vector<std::vector<double>> fit;
  fit.reserve(pop_.members.size());
  for (const auto& m : pop_.members) fit.push_back(m.fitness);
  const auto res = nsga2_survive(fit, fit.size());
  for (std::size_t i = 0; i < pop_.members.size(); ++i) {
    pop_.members[i].rank = res.rank[i];
    pop_.members[i].crowd_dist = res.crowding[i];
  }
}

std::vector<std::size_t> Engine::select_parents() {
  const std::size_t P = pop_.members.size();
  const auto gen = static_cast<std::uint64_t>(pop_.generation);
  std::vector<std::size_t> parents(P);
  switch (cfg_.strategy) {
    case Strategy::Lex:
    case Strategy::LexNsga2: {
      const auto n_cases = static_cast<Eigen::Index>(X_train_.rows());
      CaseErrors E(static_cast<Eigen::Index>(P), n_cases);
      for (std::size_t i = 0; i < P; ++i)
        E.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(pop_.members[i].case_errors.data(), n_cases);
      const auto eps = case_epsilons(E);
      parallel_for(P, cfg_.threads, [&](std::size_t k) {
        Rng rng = make_stream(cfg_.seed, {stream::kSelect, gen, k});
        parents[k] = epsilon_lexicase_select(E, eps, rng, nullptr, cfg_.lexicase_max_cases);
      });
      break;
    }
    case Strategy::Nsga2: {
      std::vector<int> rank(P);
      std::vector<double> crowd(P);
      for (std::size_t i = 0; i < P; ++i) {
        rank[i] = pop_.members[i].rank;
        crowd[i] = pop_.members[i].crowd_dist;
      }
      for (std::size_t k = 0; k < P; ++k) {
        Rng rng = make_stream(cfg_.seed, {stream::kSelect, gen, k});
        parents[k] = crowded_tournament(rank, crowd, rng);
      }
      break;
    }
    case Strategy::SimAnneal:
    case Strategy::Random:
      std::iota(parents.begin(), parents.end(), std::size_t{0});
      break;
  }
  return parents;
}

void Engine::survive(std::vector<Individual>& offspring, const std::vector<Offspring>& lineage) {
  const std::size_t P = pop_.members.size();
  std::vector<Individual> next;
  next.reserve(P);
  switch (cfg_.strategy) {
    case Strategy::Lex: {
      std::vector<double> losses;
      for (const auto& m : pop_.members) losses.push_back(m.train_mse);
      for (const auto& o : offspring) losses.push_back(o.train_mse);
      for (auto i : lex_survive(losses, P)) next.push_back(i < P ? pop_.members[i] : std::move(offspring[i - P]));
      break;
    }
    case Strategy::Nsga2:
    case Strategy::LexNsga2: {
      std::vector<std::vector<double>> fit;
      for (const auto& m : pop_.members) fit.push_back(m.fitness);
      for (const auto& o : offspring) fit.push_back(o.fitness);
      for (auto i : nsga2_survive(fit, P).survivors)
        next.push_back(i < P ? pop_.members[i] : std::move(offspring[i - P]));
      break;
    }
    case Strategy::SimAnneal: {
      const double t = cfg_.anneal.temperature(pop_.generation);
      const auto gen = static_cast<std::uint64_t>(pop_.generation);
      for (std::size_t k = 0; k < offspring.size(); ++k) {
        const auto& line = lineage[k];
        std::size_t rival = line.parent_a;
        if (line.parent_b != line.parent_a &&
            shared_trees(offspring[k], pop_.members[line.parent_b]) >
                shared_trees(offspring[k], pop_.members[line.parent_a]))
          rival = line.parent_b;
        Rng rng = make_stream(cfg_.seed, {stream::kSurvive, gen, k});
        const bool accept = anneal_accept(pop_.members[rival].train_mse, offspring[k].train_mse, t, rng);
        next.push_back(accept ? std::move(offspring[k]) : pop_.members[rival]);
      }
      break;
    }
    case Strategy::Random:
      next = std::move(offspring);
      break;
  }
  pop_.members = std::move(next);
}

void Engine::track_stall() {
  std::vector<double> vals;
  vals.reserve(pop_.members.size());
  for (const auto& m : pop_.members) vals.push_back(m.val_mse);
  median_val_ = median(vals);
  if (median_val_ < best_median_val_ - 1e-6 * std::abs(best_median_val_)) {
    best_median_val_ = median_val_;
    stall_ = 0;
  } else {
    ++stall_;
  }
}

void Engine::step() {
  if (pop_.members.empty()) throw std::logic_error("Engine::step before initialize");
  const std::size_t P = pop_.members.size();
  const auto stage = static_cast<std::uint64_t>(pop_.generation) + 1;
  std::vector<Individual> offspring;
  std::vector<Offspring> lineage;
  if (cfg_.strategy == Strategy::Random) {
    offspring.resize(P);
    for (std::size_t i = 0; i < P; ++i) {
      Rng rng = make_stream(cfg_.seed, {stream::kInit, stage, i});
      offspring[i] = random_individual(space_, rng, terminal_probs_);
    }
  } else {
    const auto parents = select_parents();
    lineage = make_offspring(pop_.members, parents, P, cfg_.variation, space_, cfg_.seed, pop_.generation,
                             cfg_.threads);
    offspring.reserve(P);
    for (auto& l : lineage) offspring.push_back(l.child);
  }
  evaluate_all(offspring, stage);
  archive_.update(offspring);
  survive(offspring, lineage);
  assign_ranks();
  ++pop_.generation;
  track_stall();
}

StopReason Engine::stop_reason() const {
  if (pop_.generation >= cfg_.max_generations) return StopReason::Generations;
  if (elapsed_seconds() >= cfg_.time_budget_s) return StopReason::TimeBudget;
  if (stall_ >= cfg_.stall_window) return StopReason::Stalled;
  return StopReason::None;
}

void Engine::run(const std::function<void(const Engine&)>& on_generation) {
  initialize();
  if (on_generation) on_generation(*this);
  while (stop_reason() == StopReason::None) {
    step();
    if (on_generation) on_generation(*this);
  }
}

ArchiveEntry Engine::select_final(std::vector<ArchiveEntry>* scored_archive) const {
  const bool has_val = X_val_.rows() > 0;
  const Matrix& Xv = has_val ? X_val_ : X_train_;
  const Vector& yv = has_val ? y_val_ : y_train_;
  std::vector<ArchiveEntry> entries = archive_.entries();
  ArchiveEntry base;
  base.model = baseline_;
  base.model.case_errors.clear();
  base.complexity = baseline_.complexity;
  entries.push_back(std::move(base));
  score_entries(entries, X_train_, y_train_, Xv, yv);
  const auto best = featforge::select_final(entries, Xv, yv);
  ArchiveEntry chosen = entries[best];
  if (scored_archive) {
    entries.pop_back();
    *scored_archive = std::move(entries);
  }
  return chosen;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.X = X(rows, Eigen::placeholders::all);
  out.y = y(rows);
  out.feature_names = feature_names;
  out.target_name = target_name;
  return out;
}

Dataset make_dataset(Matrix X, Vector y, std::vector<std::string> names, std::string target) {
  Dataset d;
  if (names.empty())
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
  if (static_cast<Eigen::Index>(names.size()) != X.cols() || X.rows() != y.size())
    throw std::invalid_argument("make_dataset: shape mismatch");
  d.X = std::move(X);
  d.y = std::move(y);
  d.feature_names = std::move(names);
  d.target_name = std::move(target);
  return d;
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> validation_split(std::size_t n, double fraction,
                                                                                 std::uint64_t seed) {
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_stream(seed, {stream::kSplit});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (fraction > 0 && n_val == 0) n_val = 1;
  n_val = std::min(n_val, n >= 2 ? n - 2 : 0);
  std::vector<Eigen::Index> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  return {std::move(train), std::move(val)};
}

FeatModel fit(const Dataset& data, const RunConfig& cfg, const std::function<void(const Engine&)>& on_generation) {
  cfg.check();
  if (data.X.rows() != data.y.size()) throw std::invalid_argument("fit: X and y row counts differ");
  if (data.X.cols() == 0) throw std::invalid_argument("fit: dataset has no features");
  if (data.X.rows() < 4) throw std::invalid_argument("fit: need at least 4 rows");
  FeatModel out;
  out.standardizer = standardize_fit(data.X);
  const Matrix Xs = out.standardizer.apply(data.X);
  const auto [train_rows, val_rows] = validation_split(data.rows(), cfg.val_fraction, cfg.seed);
  Engine engine(Xs(train_rows, Eigen::placeholders::all), data.y(train_rows), Xs(val_rows, Eigen::placeholders::all),
                data.y(val_rows), cfg);
  engine.run(on_generation);
  const ArchiveEntry chosen = engine.select_final(&out.archive);
  out.model = chosen.model;
  out.feature_names = data.feature_names;
  out.target_name = data.target_name;
  out.config = cfg;
  out.summary.generations = engine.generation();
  out.summary.runtime_s = engine.elapsed_seconds();
  out.summary.stop_reason = to_string(engine.stop_reason());
  out.summary.final_val_mse = chosen.val_mse;
  out.summary.baseline_val_mse = engine.baseline().val_mse;
  return out;
}

Vector FeatModel::predict(const Matrix& X) const { return featforge::predict(model, standardizer.apply(X)); }

Vector predict(const FeatModel& model, const Matrix& X) { return model.predict(X); }

double score(const FeatModel& model, const Matrix& X, const Vector& y) { return r2_score(y, model.predict(X)); }

}  // namespace featforge
