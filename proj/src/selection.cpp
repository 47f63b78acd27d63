#include "featforge/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace featforge {

namespace {

double median_inplace(std::vector<double>& v) {
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> case_epsilons(const CaseErrors& errors) {
  std::vector<double> eps(static_cast<std::size_t>(errors.cols()), 0.0);
  if (errors.rows() == 0) return eps;
  std::vector<double> col(static_cast<std::size_t>(errors.rows()));
  for (Eigen::Index c = 0; c < errors.cols(); ++c) {
    for (Eigen::Index r = 0; r < errors.rows(); ++r) col[static_cast<std::size_t>(r)] = errors(r, c);
    const double med = median_inplace(col);
    for (double& v : col) v = std::abs(v - med);
    eps[static_cast<std::size_t>(c)] = median_inplace(col);
  }
  return eps;
}

std::size_t epsilon_lexicase_select(const CaseErrors& errors, std::span<const double> epsilons, Rng& rng,
                                    LexicaseTrace* trace, std::size_t max_cases) {
  const auto pool = static_cast<std::size_t>(errors.rows());
  if (pool == 0) throw std::invalid_argument("epsilon_lexicase_select: empty pool");
  if (trace) trace->cases.clear();
  if (pool == 1) return 0;

  const auto n_cases = static_cast<std::size_t>(errors.cols());
  std::vector<Eigen::Index> order(n_cases);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t used = std::min(n_cases, max_cases);
  // partial Fisher-Yates: the first `used` entries are a uniform random subset in random order
  for (std::size_t i = 0; i < used; ++i) {
    const auto j = i + uniform_index(rng, n_cases - i);
    std::swap(order[i], order[j]);
  }

  std::vector<std::size_t> survivors(pool);
  std::iota(survivors.begin(), survivors.end(), std::size_t{0});
  std::vector<std::size_t> next;
  for (std::size_t k = 0; k < used && survivors.size() > 1; ++k) {
    const auto c = order[k];
    if (trace) trace->cases.push_back(c);
    double best = std::numeric_limits<double>::infinity();
    for (auto s : survivors) best = std::min(best, errors(static_cast<Eigen::Index>(s), c));
    const double bound = best + epsilons[static_cast<std::size_t>(c)];
    next.clear();
    for (auto s : survivors)
      if (errors(static_cast<Eigen::Index>(s), c) <= bound) next.push_back(s);
    survivors.swap(next);
  }
  return survivors[uniform_index(rng, survivors.size())];
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  bool strictly = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly = true;
  }
  return strictly;
}

std::vector<int> fast_nondominated_sort(FitnessView fitness) {
  const std::size_t n = fitness.size();
  std::vector<int> rank(n, 0);
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::size_t> front;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(fitness[p], fitness[q]))
        dominated[p].push_back(q);
      else if (dominates(fitness[q], fitness[p]))
        ++count[p];
    }
    if (count[p] == 0) front.push_back(p);
  }
  int r = 0;
  while (!front.empty()) {
    std::vector<std::size_t> next;
    for (auto p : front) {
      rank[p] = r;
      for (auto q : dominated[p])
        if (--count[q] == 0) next.push_back(q);
    }
    front.swap(next);
    ++r;
  }
  return rank;
}

std::vector<double> crowding_distance(FitnessView fitness, std::span<const std::size_t> front) {
  const std::size_t n = front.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, 0.0);
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), inf);
    return dist;
  }
  const std::size_t n_obj = fitness[front[0]].size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n_obj; ++k) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return fitness[front[a]][k] < fitness[front[b]][k]; });
    const double lo = fitness[front[order.front()]][k];
    const double hi = fitness[front[order.back()]][k];
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    const double range = hi - lo;
    if (!(range > 0.0) || !std::isfinite(range)) continue;
    for (std::size_t i = 1; i + 1 < n; ++i)
      dist[order[i]] += (fitness[front[order[i + 1]]][k] - fitness[front[order[i - 1]]][k]) / range;
  }
  return dist;
}

SurvivalResult nsga2_survive(FitnessView fitness, std::size_t survivors) {
  const std::size_t n = fitness.size();
  if (survivors > n) throw std::invalid_argument("nsga2_survive: fewer candidates than survivors");
  SurvivalResult out;
  out.rank = fast_nondominated_sort(fitness);
  out.crowding.assign(n, 0.0);
  const int max_rank = n ? *std::max_element(out.rank.begin(), out.rank.end()) : -1;
  std::vector<std::vector<std::size_t>> fronts(static_cast<std::size_t>(max_rank + 1));
  for (std::size_t i = 0; i < n; ++i) fronts[static_cast<std::size_t>(out.rank[i])].push_back(i);
  for (const auto& front : fronts) {
    const auto d = crowding_distance(fitness, front);
    for (std::size_t i = 0; i < front.size(); ++i) out.crowding[front[i]] = d[i];
  }
  for (auto& front : fronts) {
    if (out.survivors.size() + front.size() <= survivors) {
      out.survivors.insert(out.survivors.end(), front.begin(), front.end());
      continue;
    }
    std::stable_sort(front.begin(), front.end(),
                     [&](auto a, auto b) { return out.crowding[a] > out.crowding[b]; });
    front.resize(survivors - out.survivors.size());
    out.survivors.insert(out.survivors.end(), front.begin(), front.end());
    break;
  }
  return out;
}

std::size_t crowded_tournament(std::span<const int> rank, std::span<const double> crowding, Rng& rng) {
  const auto a = uniform_index(rng, rank.size());
  const auto b = uniform_index(rng, rank.size());
  if (rank[a] != rank[b]) return rank[a] < rank[b] ? a : b;
  if (crowding[a] != crowding[b]) return crowding[a] > crowding[b] ? a : b;
  return uniform01(rng) < 0.5 ? a : b;
}

std::vector<std::size_t> lex_survive(std::span<const double> losses, std::size_t survivors) {
  if (losses.size() < 2 * survivors) throw std::invalid_argument("lex_survive: expected parents then offspring");
  const std::size_t n_parents = losses.size() - survivors;
  std::vector<std::size_t> out(survivors);
  std::iota(out.begin(), out.end(), n_parents);
  if (survivors == 0) return out;
  const auto parents_end = losses.begin() + static_cast<std::ptrdiff_t>(n_parents);
  const auto best_parent = std::min_element(losses.begin(), parents_end);
  const auto best_child = std::min_element(parents_end, losses.end());
  if (best_parent != parents_end && *best_parent < *best_child) {
    const auto best = static_cast<std::size_t>(best_parent - losses.begin());
    const auto worst = std::max_element(out.begin(), out.end(), [&](auto a, auto b) { return losses[a] < losses[b]; });
    *worst = best;
  }
  return out;
}

double AnnealSchedule::temperature(int generation) const { return std::pow(decay, generation) * t0; }

double anneal_probability(double f_parent, double f_offspring, double t) {
  if (f_offspring <= f_parent) return 1.0;
  return std::exp((f_parent - f_offspring) / t);
}

bool anneal_accept(double f_parent, double f_offspring, double t, Rng& rng) {
  if (f_offspring <= f_parent) return true;
  return uniform01(rng) < anneal_probability(f_parent, f_offspring, t);
}

}  // namespace featforge
