#include "featforge/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "featforge/linear.hpp"
#include "featforge/objectives.hpp"

namespace featforge {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string lower = cell;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == "na" || lower == "nan" || lower == "null";
}

std::optional<double> parse_number(const std::string& cell) {
  std::string_view s = cell;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> rejected;
};

// Only the columns in `keep` are parsed; others may hold anything.
RawTable read_table(std::istream& in,
                    const std::function<std::vector<std::size_t>(const std::vector<std::string>&)>& select) {
  RawTable t;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) break;
  if (trim(line).empty()) throw DataError("empty file: no header row");
  t.header = split_row(line);
  const auto keep = select(t.header);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != t.header.size())
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    std::vector<double> values;
    values.reserve(keep.size());
    bool missing = false;
    for (auto c : keep) {
      if (is_missing(cells[c])) {
        missing = true;
        continue;
      }
      const auto v = parse_number(cells[c]);
      if (!v)
        throw DataError("row " + std::to_string(row) + ", column '" + t.header[c] + "': non-numeric value '" +
                        cells[c] + "'");
      values.push_back(*v);
    }
    if (missing)
      t.rejected.push_back(row);
    else
      t.rows.push_back(std::move(values));
  }
  return t;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

Dataset read_csv(std::istream& in, const std::string& target, std::size_t min_rows) {
  std::size_t target_col = 0;
  const auto t = read_table(in, [&](const std::vector<std::string>& header) {
    const auto it = std::find(header.begin(), header.end(), target);
    if (it == header.end())
      throw DataError("target column '" + target + "' not found; available columns: " + join(header));
    if (header.size() < 2) throw DataError("no feature columns besides the target");
    target_col = static_cast<std::size_t>(it - header.begin());
    std::vector<std::size_t> keep(header.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    return keep;
  });
  if (t.rows.empty() && t.rejected.empty()) throw DataError("empty file: header but no data rows");
  Dataset d;
  d.target_name = target;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != target_col) d.feature_names.push_back(t.header[c]);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto p = static_cast<Eigen::Index>(d.feature_names.size());
  d.X.resize(n, p);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const double v = t.rows[static_cast<std::size_t>(i)][c];
      if (c == target_col)
        d.y(i) = v;
      else
        d.X(i, j++) = v;
    }
  }
  d.rejected_rows = t.rejected;
  if (d.rows() < min_rows)
    throw DataError("dataset has " + std::to_string(d.rows()) + " complete rows (" + std::to_string(t.rejected.size()) +
                    " rejected for missing values); at least " + std::to_string(min_rows) + " required");
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target, std::size_t min_rows) {
  auto in = open_input(path);
  return read_csv(in, target, min_rows);
}

Matrix load_features(const std::filesystem::path& path, const std::vector<std::string>& names) {
  auto in = open_input(path);
  const auto t = read_table(in, [&](const std::vector<std::string>& header) {
    std::vector<std::size_t> keep;
    for (const auto& n : names) {
      const auto it = std::find(header.begin(), header.end(), n);
      if (it == header.end()) throw DataError("feature column '" + n + "' not found; available columns: " + join(header));
      keep.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    return keep;
  });
  if (!t.rejected.empty())
    throw DataError("row " + std::to_string(t.rejected.front()) + " has a missing feature value");
  Matrix X(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
  return X;
}

// ---- configuration ----

json config_to_json(const RunConfig& cfg) {
  json complexity = json::object();
  for (const auto& k : node_kinds()) complexity[k.name] = cfg.complexity[k.op];
  return {
      {"population", cfg.population},
      {"max_generations", cfg.max_generations},
      {"time_budget_s", cfg.time_budget_s},
      {"stall_window", cfg.stall_window},
      {"max_depth", cfg.max_depth},
      {"max_dim", cfg.max_dim},
      {"objectives", cfg.objectives.to_string()},
      {"strategy", to_string(cfg.strategy)},
      {"learning_rate", cfg.sgd.learning_rate},
      {"sgd_iterations", cfg.sgd.iterations},
      {"batch_size", cfg.sgd.batch_size},
      {"crossover_ratio", cfg.variation.crossover_ratio},
      {"feedback", cfg.variation.feedback},
      {"mutation_weights", cfg.variation.mutation_weights},
      {"crossover_weights", cfg.variation.crossover_weights},
      {"ridge_lambda", cfg.ridge_lambda},
      {"seed", cfg.seed},
      {"val_fraction", cfg.val_fraction},
      {"threads", cfg.threads},
      {"anneal_t0", cfg.anneal.t0},
      {"anneal_decay", cfg.anneal.decay},
      {"lexicase_max_cases", cfg.lexicase_max_cases},
      {"complexity", complexity},
  };
}

RunConfig config_from_json(const json& j, RunConfig cfg) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "population")
      cfg.population = v.get<std::size_t>();
    else if (key == "max_generations")
      cfg.max_generations = v.get<int>();
    else if (key == "time_budget_s")
      cfg.time_budget_s = v.get<double>();
    else if (key == "stall_window")
      cfg.stall_window = v.get<int>();
    else if (key == "max_depth")
      cfg.max_depth = v.get<int>();
    else if (key == "max_dim")
      cfg.max_dim = v.get<std::size_t>();
    else if (key == "objectives")
      cfg.objectives = ObjectiveSet::parse(v.get<std::string>());
    else if (key == "strategy")
      cfg.strategy = parse_strategy(v.get<std::string>());
    else if (key == "learning_rate")
      cfg.sgd.learning_rate = v.get<double>();
    else if (key == "sgd_iterations")
      cfg.sgd.iterations = v.get<int>();
    else if (key == "batch_size")
      cfg.sgd.batch_size = v.get<std::size_t>();
    else if (key == "crossover_ratio")
      cfg.variation.crossover_ratio = v.get<double>();
    else if (key == "feedback")
      cfg.variation.feedback = v.get<double>();
    else if (key == "mutation_weights")
      cfg.variation.mutation_weights = v.get<std::array<double, 4>>();
    else if (key == "crossover_weights")
      cfg.variation.crossover_weights = v.get<std::array<double, 2>>();
    else if (key == "ridge_lambda")
      cfg.ridge_lambda = v.get<double>();
    else if (key == "seed")
      cfg.seed = v.get<std::uint64_t>();
    else if (key == "val_fraction")
      cfg.val_fraction = v.get<double>();
    else if (key == "threads")
      cfg.threads = v.get<int>();
    else if (key == "anneal_t0")
      cfg.anneal.t0 = v.get<double>();
    else if (key == "anneal_decay")
      cfg.anneal.decay = v.get<double>();
    else if (key == "lexicase_max_cases")
      cfg.lexicase_max_cases = v.get<std::size_t>();
    else if (key == "complexity") {
      for (const auto& [name, w] : v.items()) {
        const auto op = op_from_name(name);
        if (!op) throw DataError("config: unknown operator '" + name + "' in complexity table");
        cfg.complexity.set(*op, w.get<int>());
      }
    } else {
      throw DataError("config: unknown key '" + key + "'");
    }
  }
  cfg.check();
  return cfg;
}

// ---- model file ----

json model_to_json(const FeatModel& m) {
  json trees = json::array(), weights = json::array();
  for (const auto& t : m.model.trees) {
    trees.push_back(to_string(t, false));
    json per_node = json::array();
    for (const auto& n : t.nodes) {
      const auto w = n.active_weights();
      per_node.push_back(std::vector<double>(w.begin(), w.end()));
    }
    weights.push_back(std::move(per_node));
  }
  std::vector<bool> constant = m.standardizer.constant;
  return {
      {"format", "feat-forge-model"},
      {"version", kModelVersion},
      {"feature_names", m.feature_names},
      {"target_name", m.target_name},
      {"trees", trees},
      {"weights", weights},
      {"beta", m.model.beta},
      {"intercept", m.model.intercept},
      {"standardizer",
       {{"means", std::vector<double>(m.standardizer.means.data(), m.standardizer.means.data() + m.standardizer.means.size())},
        {"stds", std::vector<double>(m.standardizer.stds.data(), m.standardizer.stds.data() + m.standardizer.stds.size())},
        {"constant", constant}}},
      {"config", config_to_json(m.config)},
      {"summary",
       {{"generations", m.summary.generations},
        {"runtime_s", m.summary.runtime_s},
        {"stop_reason", m.summary.stop_reason},
        {"baseline_val_mse", m.summary.baseline_val_mse},
        {"final_val_mse", m.summary.final_val_mse}}},
  };
}

FeatModel model_from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "feat-forge-model") throw DataError("not a feat-forge model file");
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) throw DataError("unsupported model version " + std::to_string(version));
    FeatModel m;
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.target_name = j.at("target_name").get<std::string>();
    const auto& trees = j.at("trees");
    const auto& weights = j.at("weights");
    if (trees.size() != weights.size()) throw DataError("model file: trees and weights differ in length");
    for (std::size_t i = 0; i < trees.size(); ++i) {
      Tree t = parse_tree(trees[i].get<std::string>());
      const auto& per_node = weights[i];
      if (per_node.size() != t.size()) throw DataError("model file: weight list does not match tree " + std::to_string(i));
      for (std::size_t k = 0; k < t.size(); ++k) {
        const auto w = per_node[k].get<std::vector<double>>();
        auto slot = t.nodes[k].active_weights();
        if (w.size() != slot.size()) throw DataError("model file: wrong weight count in tree " + std::to_string(i));
        std::copy(w.begin(), w.end(), slot.begin());
      }
      m.model.trees.push_back(std::move(t));
    }
    m.model.beta = j.at("beta").get<std::vector<double>>();
    m.model.intercept = j.at("intercept").get<double>();
    if (m.model.beta.size() != m.model.trees.size()) throw DataError("model file: beta length differs from tree count");
    const auto& s = j.at("standardizer");
    const auto means = s.at("means").get<std::vector<double>>();
    const auto stds = s.at("stds").get<std::vector<double>>();
    m.standardizer.means = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    m.standardizer.stds = Eigen::Map<const Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    m.standardizer.constant = s.at("constant").get<std::vector<bool>>();
    if (means.size() != m.feature_names.size() || stds.size() != means.size() ||
        m.standardizer.constant.size() != means.size())
      throw DataError("model file: standardizer size differs from feature count");
    if (j.contains("config")) m.config = config_from_json(j.at("config"));
    m.model.complexity = complexity(m.model, m.config.complexity);
    m.model.evaluated = true;
    const auto violations = validate(m.model, {m.config.max_depth, std::max(m.config.max_dim, means.size()), means.size()});
    if (!violations.empty()) throw DataError("model file: invalid model: " + violations.front().message);
    if (j.contains("summary")) {
      const auto& r = j.at("summary");
      m.summary.generations = r.value("generations", 0);
      m.summary.runtime_s = r.value("runtime_s", 0.0);
      m.summary.stop_reason = r.value("stop_reason", std::string{});
      m.summary.baseline_val_mse = r.value("baseline_val_mse", 0.0);
      m.summary.final_val_mse = r.value("final_val_mse", 0.0);
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const FeatModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

FeatModel load_model(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

// ---- cross-validation ----

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double model_corr(const FeatModel& m, const Matrix& X_raw) {
  return corr_entanglement(forward(m.model, m.standardizer.apply(X_raw)));
}

}  // namespace

CvReport cross_validate(const Dataset& data, const RunConfig& cfg, int folds, int shuffles) {
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (shuffles < 1) throw std::invalid_argument("cross_validate: shuffles must be >= 1");
  const std::size_t n = data.rows();
  if (n < static_cast<std::size_t>(folds))
    throw std::invalid_argument("cross_validate: " + std::to_string(n) + " rows is fewer than " +
                                std::to_string(folds) + " folds");
  cfg.check();
  const auto start = std::chrono::steady_clock::now();
  CvReport report;
  report.folds = folds;
  report.shuffles = shuffles;
  const auto k = static_cast<std::size_t>(folds);
  for (int s = 0; s < shuffles; ++s) {
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng = make_stream(cfg.seed, {stream::kFold, static_cast<std::uint64_t>(s)});
    std::shuffle(order.begin(), order.end(), rng);
    Vector oof(static_cast<Eigen::Index>(n));
    bool small_fold = false;
    double r2_sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
      std::vector<Eigen::Index> test(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
      std::vector<Eigen::Index> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
      train.insert(train.end(), order.begin() + static_cast<std::ptrdiff_t>(hi), order.end());
      RunConfig fold_cfg = cfg;
      fold_cfg.seed = mix64(cfg.seed ^ mix64(stream::kFold + 1000003ULL * static_cast<std::uint64_t>(s) + f + 1));
      const Dataset tr = data.subset(train), te = data.subset(test);
      const FeatModel model = fit(tr, fold_cfg);
      const Vector yhat = model.predict(te.X);
      for (std::size_t i = 0; i < test.size(); ++i) oof(test[i]) = yhat(static_cast<Eigen::Index>(i));
      FoldResult r;
      r.shuffle = s;
      r.fold = static_cast<int>(f);
      r.test_rows = test.size();
      r.mse = mse(te.y, yhat);
      r.r2 = test.size() >= 2 ? r2_score(te.y, yhat) : std::numeric_limits<double>::quiet_NaN();
      small_fold = small_fold || test.size() < 2;
      r2_sum += r.r2;
      r.node_count = node_count(model.model);
      r.complexity = model.model.complexity;
      r.corr = model_corr(model, tr.X);
      r.expression = to_string(model.model, false);
      r.standardizer_means = model.standardizer.means;
      report.results.push_back(std::move(r));
    }
    report.shuffle_r2.push_back(small_fold ? r2_score(data.y, oof) : r2_sum / static_cast<double>(k));
  }
  std::vector<double> mses, nodes, comps, corrs;
  for (const auto& r : report.results) {
    mses.push_back(r.mse);
    nodes.push_back(static_cast<double>(r.node_count));
    comps.push_back(static_cast<double>(r.complexity));
    corrs.push_back(r.corr);
  }
  report.median_r2 = median_of(report.shuffle_r2);
  report.median_mse = median_of(mses);
  report.median_node_count = median_of(nodes);
  report.median_complexity = median_of(comps);
  report.median_corr = median_of(corrs);
  report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_num(double v) { return std::isfinite(v) ? json(v).dump() : std::string{}; }

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

json cv_to_json(const CvReport& report) {
  json folds = json::array();
  for (const auto& r : report.results)
    folds.push_back({{"shuffle", r.shuffle},
                     {"fold", r.fold},
                     {"test_rows", r.test_rows},
                     {"r2", num(r.r2)},
                     {"mse", num(r.mse)},
                     {"node_count", r.node_count},
                     {"complexity", r.complexity},
                     {"corr", num(r.corr)},
                     {"expression", r.expression}});
  json shuffle_r2 = json::array();
  for (double v : report.shuffle_r2) shuffle_r2.push_back(num(v));
  return {{"folds", report.folds},
          {"shuffles", report.shuffles},
          {"median_r2", num(report.median_r2)},
          {"median_mse", num(report.median_mse)},
          {"median_node_count", report.median_node_count},
          {"median_complexity", report.median_complexity},
          {"median_corr", num(report.median_corr)},
          {"runtime_s", report.runtime_s},
          {"shuffle_r2", shuffle_r2},
          {"results", folds}};
}

void write_cv_csv(std::ostream& os, const CvReport& report) {
  os << "shuffle,fold,test_rows,r2,mse,node_count,complexity,corr,expression\n";
  for (const auto& r : report.results)
    os << r.shuffle << ',' << r.fold << ',' << r.test_rows << ',' << csv_num(r.r2) << ',' << csv_num(r.mse) << ','
       << r.node_count << ',' << r.complexity << ',' << csv_num(r.corr) << ',' << csv_quote(r.expression) << '\n';
}

// ---- reports ----

ReportFormat parse_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("unknown format '" + std::string(name) + "' (expected json or csv)");
}

RunMetrics compute_metrics(const FeatModel& model, const Dataset& data) {
  RunMetrics m;
  const Matrix Xs = model.standardizer.apply(data.X);
  const auto [train_rows, val_rows] = validation_split(data.rows(), model.config.val_fraction, model.config.seed);
  const Matrix Xt = Xs(train_rows, Eigen::placeholders::all);
  m.train_r2 = r2_score(data.y(train_rows), predict(model.model, Xt));
  m.val_r2 = val_rows.empty() ? m.train_r2
                              : r2_score(data.y(val_rows), predict(model.model, Xs(val_rows, Eigen::placeholders::all)));
  m.node_count = node_count(model.model);
  m.complexity = complexity(model.model, model.config.complexity);
  m.corr = corr_entanglement(forward(model.model, Xt));
  m.runtime_s = model.summary.runtime_s;
  return m;
}

std::vector<SummaryRow> model_summary(const Individual& model) {
  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < model.trees.size(); ++i)
    rows.push_back({to_string(model.trees[i], false), i < model.beta.size() ? model.beta[i] : 0.0});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SummaryRow& a, const SummaryRow& b) { return std::abs(a.beta) > std::abs(b.beta); });
  return rows;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace

void emit_report(const RunMetrics& metrics, const FeatModel& model, const std::filesystem::path& dir,
                 ReportFormat format, bool plot_data) {
  if (model.archive.empty()) throw std::runtime_error("run produced no archive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());

  const bool as_json = format == ReportFormat::Json;
  {
    const auto path = dir / (as_json ? "archive.jsonl" : "archive.csv");
    auto out = open_output(path);
    if (as_json)
      write_archive_jsonl(out, model.archive);
    else
      write_archive_csv(out, model.archive);
    finish(out, path);
  }
  {
    const auto rows = model_summary(model.model);
    const auto path = dir / (as_json ? "model_summary.json" : "model_summary.csv");
    auto out = open_output(path);
    if (as_json) {
      json j = json::array();
      for (const auto& r : rows) j.push_back({{"feature", r.feature}, {"beta", r.beta}});
      json doc = {{"intercept", model.model.intercept}, {"features", j}};
      out << doc.dump(2) << '\n';
    } else {
      out << "feature,beta\n";
      out << csv_quote("(intercept)") << ',' << json(model.model.intercept).dump() << '\n';
      for (const auto& r : rows) out << csv_quote(r.feature) << ',' << json(r.beta).dump() << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = dir / "metrics.json";
    auto out = open_output(path);
    const json j = {{"train_r2", num(metrics.train_r2)},
                    {"val_r2", num(metrics.val_r2)},
                    {"node_count", metrics.node_count},
                    {"complexity", metrics.complexity},
                    {"corr", num(metrics.corr)},
                    {"runtime_s", metrics.runtime_s},
                    {"generations", model.summary.generations},
                    {"stop_reason", model.summary.stop_reason},
                    {"expression", to_string(model.model, false)}};
    out << j.dump(2) << '\n';
    finish(out, path);
  }
  save_model(model, dir / "model.json");
  if (plot_data) {
    const auto path = dir / "plot_data.csv";
    auto out = open_output(path);
    out << "complexity,train_r2,val_r2\n";
    for (const auto& e : model.archive)
      out << e.complexity << ',' << csv_num(e.train_r2) << ',' << csv_num(e.val_r2) << '\n';
    finish(out, path);
  }
}

}  // namespace featforge
