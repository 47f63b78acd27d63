#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "featforge/engine.hpp"
#include "oracles.hpp"

using namespace featforge;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Collects failures for one criterion; the first message is reported.
struct Verdict {
  bool ok = true;
  std::string first_failure;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) first_failure = what;
    ok = false;
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict gradient_oracle() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.3, 2.0), w(0.5, 1.5), coin(0, 1);
  double worst = 0.0;
  int kinds = 0;
  for (const auto& k : node_kinds()) {
    if (!k.differentiable) continue;
    ++kinds;
    const std::size_t na = k.op == Op::Feature ? 1 : k.arity, nw = weight_count(k.op);
    for (int trial = 0; trial < 100; ++trial) {
      std::array<double, 2> a{}, ws{};
      do {
        for (auto& x : a) x = mag(rng) * (coin(rng) < 0.5 ? -1 : 1);
        for (auto& x : ws) x = w(rng);
      } while (k.op == Op::Relu && std::abs(a[0] * ws[0]) < 1e-3);
      const auto g = node_gradient(k.op, {a.data(), na}, {ws.data(), nw});
      for (std::size_t i = 0; i < na; ++i) {
        const double num = oracle::central_difference(
            [&](double x) {
              auto b = a;
              b[i] = x;
              return apply_node(k.op, {b.data(), na}, {ws.data(), nw});
            },
            a[i]);
        const double err = oracle::relative_error(g.d_args[i], num);
        worst = std::max(worst, err);
        v.expect(err < 1e-4, std::string(k.name) + " d/darg " + fmt("%.3g", err));
      }
      for (std::size_t i = 0; i < nw; ++i) {
        const double num = oracle::central_difference(
            [&](double x) {
              auto b = ws;
              b[i] = x;
              return apply_node(k.op, {a.data(), na}, {b.data(), nw});
            },
            ws[i]);
        const double err = oracle::relative_error(g.d_weights[i], num);
        worst = std::max(worst, err);
        v.expect(err < 1e-4, std::string(k.name) + " d/dw " + fmt("%.3g", err));
      }
    }
  }
  const double secs = seconds_since(t0);
  v.expect(secs < 10.0, fmt("runtime %.2f s", secs));
  v.detail = std::to_string(kinds) + " kinds x 100 points, max rel err " + fmt("%.2e, %.3f s", worst, secs);
  return v;
}

Verdict feedback_suite() {
  Verdict v;
  const auto hand = feedback_probs(std::vector<double>{0.0, 5.0}, 1.0);
  v.expect(std::abs(hand[0] - 0.73106) < 1e-4 && std::abs(hand[1] - 0.26894) < 1e-4,
           fmt("hand value [%.6f, %.6f]", hand[0], hand[1]));
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-50, 50), uf(0, 1), scale(0.01, 100);
  std::uniform_int_distribution<int> um(1, 20);
  double worst_sum = 0.0, worst_scale = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> beta(static_cast<std::size_t>(um(rng)));
    for (auto& b : beta) b = u(rng);
    const double f = uf(rng);
    const auto pm = feedback_probs(beta, f);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(pm.begin(), pm.end(), 0.0) - 1.0));
    for (std::size_t i = 0; i < pm.size(); ++i)
      for (std::size_t j = 0; j < pm.size(); ++j)
        if (std::abs(beta[i]) < std::abs(beta[j])) v.expect(pm[i] >= pm[j], "monotonicity");
    const double c = (uf(rng) < 0.5 ? -1 : 1) * scale(rng);
    auto scaled = beta;
    for (auto& b : scaled) b *= c;
    const auto ps = feedback_probs(scaled, f);
    for (std::size_t i = 0; i < pm.size(); ++i) worst_scale = std::max(worst_scale, std::abs(ps[i] - pm[i]));
  }
  v.expect(worst_sum < 1e-12, fmt("sum error %.2e", worst_sum));
  v.expect(worst_scale < 1e-12, fmt("scale error %.2e", worst_scale));
  v.detail = fmt("PM=[%.5f, %.5f], max |sum-1| %.1e", hand[0], hand[1], worst_sum) + fmt(", max scale drift %.1e", worst_scale);
  return v;
}

Verdict complexity_suite() {
  Verdict v;
  const std::vector<std::pair<const char*, long long>> hand{
      {"[x0]", 1}, {"[tanh((x0+x1))]", 8}, {"[(x0*x1)]", 4}, {"[(x0/x1)]", 6}, {"[((x0*x1)*(x2-x0))]", 12},
      {"[(x0^2)]", 3}, {"[x0][x1]", 2}, {"[(x0<x1)]", 4}, {"[not((x0<x1))]", 16}};
  for (const auto& [expr, c] : hand) {
    const auto got = complexity(parse(expr));
    v.expect(got == c, std::string(expr) + " = " + std::to_string(got) + ", expected " + std::to_string(c));
  }
  SearchSpace space;
  space.n_features = 5;
  int edits = 0;
  for (std::uint64_t i = 0; edits < 10000; ++i) {
    Rng rng = make_stream(13, {i});
    const auto ind = random_individual(space, rng);
    const auto child = insert_mutation(ind, space, rng);
    if (!child) continue;
    ++edits;
    v.expect(complexity(*child) >= complexity(ind), "insertion lowered complexity of " + to_string(ind));
  }
  v.detail = std::to_string(hand.size()) + " hand values, " + std::to_string(edits) + " insertions";
  return v;
}

Verdict entanglement_oracle() {
  Verdict v;
  std::mt19937_64 rng(14);
  double worst_corr = 0.0, worst_cn = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix m = oracle::random_matrix(rng, 50, 5);
    m.col(trial % 5) += 0.3 * (trial % 3) * m.col((trial + 1) % 5);
    worst_corr = std::max(worst_corr, std::abs(corr_entanglement(m) - oracle::corr_entanglement(m)));
    worst_cn = std::max(worst_cn, std::abs(cond_number(m) - oracle::cond_number(m)));
  }
  v.expect(worst_corr < 1e-9, fmt("corr error %.2e", worst_corr));
  v.expect(worst_cn < 1e-9, fmt("cn error %.2e", worst_cn));
  Matrix centered = oracle::random_matrix(rng, 50, 5);
  centered.rowwise() -= centered.colwise().mean();
  const Matrix q = centered.householderQr().householderQ() * Matrix::Identity(50, 5);
  const double cn = cond_number(q);
  v.expect(std::abs(cn - 1.0) < 1e-9, fmt("orthonormal CN %.12f", cn));
  v.detail = fmt("max |dCorr| %.1e, max |dCN| %.1e, orthonormal CN %.12f", worst_corr, worst_cn, cn);
  return v;
}

Verdict selection_suite() {
  Verdict v;
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> val(0, 7), size(1, 64);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> f(static_cast<std::size_t>(size(rng)), std::vector<double>(2 + trial % 2));
    for (auto& row : f)
      for (auto& x : row) x = val(rng);
    v.expect(fast_nondominated_sort(f) == oracle::pareto_ranks(f), "sort differs on population " + std::to_string(trial));
    if (f.size() >= 2) {
      const auto r = nsga2_survive(f, f.size() / 2);
      std::vector<bool> kept(f.size(), false);
      for (auto i : r.survivors) kept[i] = true;
      for (std::size_t i = 0; i < f.size(); ++i)
        for (std::size_t j = 0; j < f.size(); ++j)
          if (kept[i] && !kept[j]) v.expect(!oracle::dominates(f[j], f[i]), "survival kept a dominated member");
    }
  }

  // truncation through a front keeps the larger crowding distances
  {
    const std::vector<std::vector<double>> f{{0, 0}, {1, 9}, {2, 5}, {3, 4.5}, {9, 1}};
    auto r = nsga2_survive(f, 4);
    std::sort(r.survivors.begin(), r.survivors.end());
    v.expect(r.survivors == std::vector<std::size_t>{0, 1, 3, 4}, "straddling-front truncation");
    const std::vector<std::size_t> front{0, 1, 2};
    const auto d = crowding_distance(std::vector<std::vector<double>>{{0, 2}, {1, 1}, {2, 0}}, front);
    v.expect(std::isinf(d[0]) && std::isinf(d[2]) && std::abs(d[1] - 2.0) < 1e-12, "crowding example");
    const std::vector<std::vector<double>> exact{{1, 4}, {2, 3}, {3, 2}, {4, 1}, {5, 5}, {6, 6}};
    auto e = nsga2_survive(exact, 4);
    std::sort(e.survivors.begin(), e.survivors.end());
    v.expect(e.survivors == std::vector<std::size_t>{0, 1, 2, 3}, "exact-front truncation");
  }

  std::uniform_real_distribution<double> u(0, 1);
  const int events = 10000;
  for (std::uint64_t event = 0; event < events; ++event) {
    const int P = 2 + static_cast<int>(event % 31), N = 1 + static_cast<int>(event % 47);
    CaseErrors E(P, N);
    for (int i = 0; i < P; ++i)
      for (int j = 0; j < N; ++j) E(i, j) = std::floor(u(rng) * 4) * u(rng);
    const auto eps = case_epsilons(E);
    Rng r = make_stream(16, {event});
    LexicaseTrace trace;
    const auto pick = static_cast<Eigen::Index>(epsilon_lexicase_select(E, eps, r, &trace));
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(P));
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (auto c : trace.cases) {
      double best = std::numeric_limits<double>::infinity();
      for (auto i : pool) best = std::min(best, E(i, c));
      std::vector<Eigen::Index> next;
      for (auto i : pool)
        if (E(i, c) <= best + eps[static_cast<std::size_t>(c)]) next.push_back(i);
      pool = std::move(next);
    }
    v.expect(std::find(pool.begin(), pool.end(), pick) != pool.end(), "lexicase replay " + std::to_string(event));
  }

  double worst = 0.0;
  const int trials = 100000;
  const std::vector<std::array<double, 3>> cases{{1, 2, 1}, {1, 1.5, 2}, {0, 3, 10}, {2, 1, 1}, {1, 11, 5}};
  for (const auto& [fp, fo, t] : cases) {
    Rng r = make_stream(17, {static_cast<std::uint64_t>(fo * 100)});
    int acc = 0;
    for (int i = 0; i < trials; ++i) acc += anneal_accept(fp, fo, t, r);
    const double expected = std::min(1.0, std::exp((fp - fo) / t));
    worst = std::max(worst, std::abs(acc / double(trials) - expected));
  }
  v.expect(worst <= 0.01, fmt("anneal frequency off by %.4f", worst));
  v.detail = "100 sorts, " + std::to_string(events) + " lexicase replays, anneal max dev " + fmt("%.4f", worst);
  return v;
}

Verdict closure_and_determinism() {
  Verdict v;
  SearchSpace space;
  space.n_features = 5;
  space.max_depth = 10;
  space.max_dim = 50;
  const auto limits = space.limits();
  std::vector<Individual> pool;
  for (std::uint64_t i = 0; i < 64; ++i) {
    Rng rng = make_stream(18, {i});
    pool.push_back(random_individual(space, rng));
  }
  VariationConfig cfg;
  const int events = 100000;
  int max_depth = 0;
  std::size_t max_dim = 0;
  std::vector<std::size_t> parents(pool.size());
  std::iota(parents.begin(), parents.end(), std::size_t{0});
  for (int e = 0; e < events; ++e) {
    const auto idx = static_cast<std::size_t>(e) % pool.size();
    auto off = vary_one(pool, parents, idx, cfg, space, 19, e);
    const auto bad = validate(off.child, limits);
    v.expect(bad.empty(), "invalid child " + to_string(off.child) + (bad.empty() ? "" : ": " + bad.front().message));
    for (const auto& t : off.child.trees) max_depth = std::max(max_depth, depth(t));
    max_dim = std::max(max_dim, off.child.dim());
    pool[idx] = std::move(off.child);
  }

  std::mt19937_64 g(20);
  Matrix X = oracle::random_matrix(g, 150, 3);
  const Vector y = (X.col(0).array().tanh() + X.col(1).array() * X.col(2).array()).matrix();
  RunConfig rc;
  rc.population = 30;
  rc.max_generations = 8;
  rc.seed = 99;
  rc.threads = 1;
  auto run = [&] {
    const auto m = fit(make_dataset(X, y), rc);
    std::string out;
    for (const auto& e : m.archive) out += to_string(e.model, true) + fmt(" %.17g\n", e.train_mse);
    return out + to_string(m.model, true);
  };
  const auto a = run(), b = run();
  v.expect(a == b, "repeated single-worker runs differ");
  v.detail = std::to_string(events) + " events, max depth " + std::to_string(max_depth) + ", max dim " +
             std::to_string(max_dim) + ", repeat run identical: " + (a == b ? "yes" : "no");
  return v;
}

Verdict baseline_guarantee() {
  Verdict v;
  const std::vector<std::pair<const char*, std::function<double(const Matrix&, Eigen::Index)>>> targets{
      {"linear", [](const Matrix& X, Eigen::Index i) { return 2 * X(i, 0) - X(i, 1); }},
      {"nonlinear", [](const Matrix& X, Eigen::Index i) { return std::sin(2 * X(i, 0)) + X(i, 1) * X(i, 2); }},
      {"noise", [](const Matrix&, Eigen::Index) { return 0.0; }}};
  int runs = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (const auto& [name, target] : targets) {
    std::mt19937_64 g(21);
    std::normal_distribution<double> noise(0, 0.5);
    Matrix X = oracle::random_matrix(g, 80, 3);
    Vector y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y(i) = target(X, i) + noise(g);
    const auto data = make_dataset(X, y);
    for (auto s : {Strategy::Lex, Strategy::Nsga2, Strategy::LexNsga2, Strategy::SimAnneal, Strategy::Random})
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RunConfig rc;
        rc.population = 16;
        rc.max_generations = 4;
        rc.max_depth = 5;
        rc.max_dim = 6;
        rc.sgd.iterations = 3;
        rc.strategy = s;
        rc.seed = seed;
        const auto m = fit(data, rc);
        ++runs;
        const double gap = m.summary.final_val_mse - m.summary.baseline_val_mse;
        worst_gap = std::max(worst_gap, gap);
        v.expect(gap <= 0.0, std::string(name) + "/" + to_string(s) + "/seed " + std::to_string(seed) +
                                 fmt(": final %.6g > baseline %.6g", m.summary.final_val_mse, m.summary.baseline_val_mse));
      }
  }
  v.detail = std::to_string(runs) + " runs (5 strategies x 20 seeds x 3 datasets), max(final - baseline) " +
             fmt("%.3g", worst_gap);
  return v;
}

Matrix standard_normal(std::mt19937_64& g, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> z(0, 1);
  Matrix X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = z(g);
  return standardize_fit(X).apply(X);
}

Vector recovery_target(const Matrix& X, std::mt19937_64& g) {
  std::normal_distribution<double> eps(0, 0.01);
  Vector y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    y(i) = 3 * std::tanh(X(i, 0)) + 2 * X(i, 1) * X(i, 1) + X(i, 2) + eps(g);
  return y;
}

Verdict synthetic_recovery() {
  Verdict v;
  const auto t0 = Clock::now();
  std::vector<double> r2s, nodes;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 g(1000 + seed);
    const Matrix X = standard_normal(g, 1000, 5);
    const Vector y = recovery_target(X, g);
    const Matrix Xt = standard_normal(g, 1000, 5);
    const Vector yt = recovery_target(Xt, g);
    RunConfig rc;
    rc.population = 100;
    rc.max_generations = 50;
    rc.strategy = Strategy::LexNsga2;
    rc.seed = seed;
    const auto m = fit(make_dataset(X, y), rc);
    r2s.push_back(score(m, Xt, yt));
    nodes.push_back(double(node_count(m.model)));
    std::printf("  recovery seed %llu: held-out R2 %.5f, %zu nodes, %s\n", static_cast<unsigned long long>(seed),
                r2s.back(), node_count(m.model), to_string(m.model, false).c_str());
  }
  const double secs = seconds_since(t0);
  const double med_r2 = median(r2s), med_nodes = median(nodes);
  const double max_nodes = *std::max_element(nodes.begin(), nodes.end());
  v.expect(med_r2 >= 0.95, fmt("median R2 %.4f", med_r2));
  v.expect(med_nodes <= 25, fmt("median node_count %.0f", med_nodes));
  v.expect(secs < 300.0, fmt("runtime %.1f s", secs));
  v.detail = fmt("median held-out R2 %.5f, median node_count %.0f (max %.0f)", med_r2, med_nodes, max_nodes) +
             fmt(", %.1f s for 5 seeds", secs);
  return v;
}

Verdict archive_invariants() {
  Verdict v;
  std::mt19937_64 g(22);
  const Matrix X = oracle::random_matrix(g, 200, 3);
  const Vector y = (3 * X.col(0).array().tanh() + 2 * X.col(1).array().square() + X.col(2).array()).matrix();
  int generations = 0;
  double best = std::numeric_limits<double>::infinity();
  for (auto s : {Strategy::LexNsga2, Strategy::Lex, Strategy::SimAnneal}) {
    RunConfig rc;
    rc.population = 40;
    rc.max_generations = 15;
    rc.strategy = s;
    rc.seed = 5;
    best = std::numeric_limits<double>::infinity();
    const auto m = fit(make_dataset(X, y), rc, [&](const Engine& e) {
      ++generations;
      const auto& en = e.archive().entries();
      for (std::size_t i = 0; i < en.size(); ++i)
        for (std::size_t j = 0; j < en.size(); ++j)
          if (i != j)
            v.expect(!oracle::dominates({en[i].train_mse, double(en[i].complexity)},
                                        {en[j].train_mse, double(en[j].complexity)}),
                     "dominated archive entry at generation " + std::to_string(e.generation()));
      v.expect(e.archive().best_train_mse() <= best, "best train loss rose");
      best = e.archive().best_train_mse();
    });

    std::ostringstream jl;
    write_archive_jsonl(jl, m.archive);
    std::istringstream in(jl.str());
    std::string line;
    std::size_t i = 0;
    const Matrix Z = m.standardizer.apply(X);
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      auto back = parse(j.at("expression").get<std::string>());
      v.expect(back.trees == m.archive[i].model.trees, "exported expression does not parse back");
      back.beta = j.at("beta").get<std::vector<double>>();
      back.intercept = m.archive[i].model.intercept;
      const double diff = (predict(back, Z) - predict(m.archive[i].model, Z)).cwiseAbs().maxCoeff();
      v.expect(diff < 1e-9 * (1 + predict(m.archive[i].model, Z).cwiseAbs().maxCoeff()), "re-parsed model predicts differently");
      ++i;
    }
    v.expect(i == m.archive.size() && i > 0, "export line count");
  }
  v.detail = std::to_string(generations) + " generations checked over 3 strategies, exports re-parsed";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"feedback probabilities", feedback_suite},
      {"complexity", complexity_suite},
      {"corr/cn oracle", entanglement_oracle},
      {"selection", selection_suite},
      {"closure and determinism", closure_and_determinism},
      {"baseline guarantee", baseline_guarantee},
      {"synthetic recovery", synthetic_recovery},
      {"archive invariants", archive_invariants},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.ok = false;
      v.first_failure = std::string("exception: ") + e.what();
    }
    failed += !v.ok;
    std::printf("%s %s: %s%s%s\n", v.ok ? "PASS" : "FAIL", name, v.detail.c_str(), v.ok ? "" : " | first failure: ",
                v.ok ? "" : v.first_failure.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
