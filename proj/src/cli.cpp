#include "featforge/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "featforge/io.hpp"

namespace featforge::cli {

namespace {

struct RunFlags {
  std::string data;
  std::string target;
  std::string config_file;
  std::optional<std::string> strategy;
  std::optional<std::size_t> population;
  std::optional<int> generations;
  std::optional<double> time_budget;
  std::optional<std::string> objectives;
  std::optional<double> feedback;
  std::optional<double> xo_rate;
  std::optional<double> ridge;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> max_depth;
  std::optional<std::size_t> max_dim;
  std::optional<int> stall;
  std::optional<double> val_fraction;
  bool verbose = false;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--data", f.data, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  app->add_option("--target", f.target, "Name of the target column")->required();
  app->add_option("--config", f.config_file, "JSON run configuration; flags override it")->check(CLI::ExistingFile);
  app->add_option("--strategy", f.strategy, "lex, nsga2, lexnsga2, simanneal or random");
  app->add_option("--pop", f.population, "Population size");
  app->add_option("--gens", f.generations, "Maximum generations");
  app->add_option("--time-budget", f.time_budget, "Wall-clock budget in seconds");
  app->add_option("--objectives", f.objectives, "mse,complexity[,corr|cn]");
  app->add_option("--feedback", f.feedback, "Coefficient feedback f in [0,1]");
  app->add_option("--xo-rate", f.xo_rate, "Crossover ratio in [0,1]");
  app->add_option("--ridge", f.ridge, "Ridge penalty");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--threads", f.threads, "Worker threads");
  app->add_option("--max-depth", f.max_depth, "Maximum tree depth");
  app->add_option("--max-dim", f.max_dim, "Maximum number of trees per individual");
  app->add_option("--stall", f.stall, "Generations without validation improvement before stopping");
  app->add_option("--val-fraction", f.val_fraction, "Share of rows held out for model selection");
  app->add_flag("-v,--verbose", f.verbose, "Print one line per generation to stderr");
}

RunConfig build_config(const RunFlags& f) {
  RunConfig cfg;
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("'" + f.config_file + "' is not valid JSON: " + e.what());
    }
    cfg = config_from_json(j, cfg);
  }
  if (f.strategy) cfg.strategy = parse_strategy(*f.strategy);
  if (f.population) cfg.population = *f.population;
  if (f.generations) cfg.max_generations = *f.generations;
  if (f.time_budget) cfg.time_budget_s = *f.time_budget;
  if (f.objectives) cfg.objectives = ObjectiveSet::parse(*f.objectives);
  if (f.feedback) cfg.variation.feedback = *f.feedback;
  if (f.xo_rate) cfg.variation.crossover_ratio = *f.xo_rate;
  if (f.ridge) cfg.ridge_lambda = *f.ridge;
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.max_depth) cfg.max_depth = *f.max_depth;
  if (f.max_dim) cfg.max_dim = *f.max_dim;
  if (f.stall) cfg.stall_window = *f.stall;
  if (f.val_fraction) cfg.val_fraction = *f.val_fraction;
  cfg.check();
  return cfg;
}

Dataset read_data(const RunFlags& f) {
  Dataset d = load_csv(f.data, f.target);
  if (!d.rejected_rows.empty()) {
    std::cerr << "rejected " << d.rejected_rows.size() << " row(s) with missing values:";
    for (std::size_t i = 0; i < d.rejected_rows.size() && i < 20; ++i) std::cerr << ' ' << d.rejected_rows[i];
    if (d.rejected_rows.size() > 20) std::cerr << " ...";
    std::cerr << '\n';
  }
  return d;
}

std::function<void(const Engine&)> progress(bool verbose) {
  if (!verbose) return {};
  return [](const Engine& e) {
    std::cerr << "gen " << e.generation() << "  median val mse " << e.median_val_mse() << "  archive "
              << e.archive().size() << "  best train mse " << e.archive().best_train_mse() << '\n';
  };
}

int do_fit(const RunFlags& f, const std::string& out_dir, const std::string& format, bool plot_data) {
  const auto fmt = parse_format(format);
  const RunConfig cfg = build_config(f);
  const Dataset data = read_data(f);
  const FeatModel model = fit(data, cfg, progress(f.verbose));
  const RunMetrics metrics = compute_metrics(model, data);
  emit_report(metrics, model, out_dir, fmt, plot_data);
  std::cout << "model: " << to_string(model.model, false) << '\n'
            << "train R2 " << metrics.train_r2 << ", validation R2 " << metrics.val_r2 << ", nodes "
            << metrics.node_count << ", complexity " << metrics.complexity << '\n'
            << "generations " << model.summary.generations << " (" << model.summary.stop_reason << "), "
            << model.summary.runtime_s << " s\n"
            << "report written to " << out_dir << '\n';
  return 0;
}

int do_cv(const RunFlags& f, int folds, int shuffles, const std::string& out_dir, const std::string& format) {
  const auto fmt = parse_format(format);
  const RunConfig cfg = build_config(f);
  const Dataset data = read_data(f);
  const CvReport report = cross_validate(data, cfg, folds, shuffles);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const auto path = std::filesystem::path(out_dir) / (fmt == ReportFormat::Json ? "cv_report.json" : "cv_report.csv");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    if (fmt == ReportFormat::Json)
      out << cv_to_json(report).dump(2) << '\n';
    else
      write_cv_csv(out, report);
  }
  std::cout << folds << "-fold CV x " << shuffles << " shuffles: median R2 " << report.median_r2 << ", median MSE "
            << report.median_mse << ", median nodes " << report.median_node_count << ", " << report.runtime_s
            << " s\n";
  return 0;
}

int do_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path) {
  const FeatModel model = load_model(model_path);
  const Matrix X = load_features(data_path, model.feature_names);
  const Vector yhat = model.predict(X);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw DataError("cannot write '" + out_path + "'");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "prediction\n";
  for (Eigen::Index i = 0; i < yhat.size(); ++i) out << nlohmann::json(yhat(i)).dump() << '\n';
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Evolve engineered features for linear regression"};
  app.name("feat-forge");
  app.require_subcommand(1);

  RunFlags fit_flags;
  std::string fit_out, fit_format = "json";
  bool plot_data = false;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and write its report");
  add_run_flags(fit_cmd, fit_flags);
  fit_cmd->add_option("--out", fit_out, "Report directory")->required();
  fit_cmd->add_option("--format", fit_format, "Archive and summary encoding: json or csv");
  fit_cmd->add_flag("--plot-data", plot_data, "Also write plot_data.csv");

  RunFlags cv_flags;
  int folds = 10, shuffles = 5;
  std::string cv_out, cv_format = "json";
  auto* cv_cmd = app.add_subcommand("cv", "Shuffled k-fold cross-validation");
  add_run_flags(cv_cmd, cv_flags);
  cv_cmd->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1 << 30));
  cv_cmd->add_option("--shuffles", shuffles, "Number of reshuffled repetitions")->check(CLI::Range(1, 1 << 30));
  cv_cmd->add_option("--out", cv_out, "Directory for the CV report");
  cv_cmd->add_option("--format", cv_format, "json or csv");

  std::string model_path, data_path, pred_out;
  auto* pred_cmd = app.add_subcommand("predict", "Predict with a saved model");
  pred_cmd->add_option("--model", model_path, "model.json from a fit")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--data", data_path, "CSV with the model's feature columns")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", pred_out, "Write predictions here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (*fit_cmd) return do_fit(fit_flags, fit_out, fit_format, plot_data);
    if (*cv_cmd) return do_cv(cv_flags, folds, shuffles, cv_out, cv_format);
    if (*pred_cmd) return do_predict(model_path, data_path, pred_out);
  } catch (const std::exception& e) {
    std::cerr << "feat-forge: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace featforge::cli
