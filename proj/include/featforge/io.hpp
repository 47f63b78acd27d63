#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "featforge/dataset.hpp"
#include "featforge/engine.hpp"

namespace featforge {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMinRows = 10;

/// Header row required. Cells that are empty, "NA" or "nan" reject their row
/// (listed in Dataset::rejected_rows); any other non-numeric cell is an error.
/// Row numbers in messages count data rows from 1.
Dataset read_csv(std::istream& in, const std::string& target, std::size_t min_rows = kMinRows);
Dataset load_csv(const std::filesystem::path& path, const std::string& target, std::size_t min_rows = kMinRows);

/// Features for a stored model, picked from a CSV by name; a target column is
/// not required.
Matrix load_features(const std::filesystem::path& path, const std::vector<std::string>& names);

inline constexpr int kModelVersion = 1;

nlohmann::json config_to_json(const RunConfig& cfg);
/// Unknown keys are rejected; missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

nlohmann::json model_to_json(const FeatModel& model);
FeatModel model_from_json(const nlohmann::json& j);
void save_model(const FeatModel& model, const std::filesystem::path& path);
FeatModel load_model(const std::filesystem::path& path);

struct FoldResult {
  int shuffle = 0;
  int fold = 0;
  std::size_t test_rows = 0;
  double r2 = 0.0;
  double mse = 0.0;
  std::size_t node_count = 0;
  long long complexity = 0;
  double corr = 0.0;
  std::string expression;
  Vector standardizer_means;
};

struct CvReport {
  int folds = 0;
  int shuffles = 0;
  std::vector<FoldResult> results;
  /// One score per shuffle: mean fold R^2, or the pooled out-of-fold R^2 when
  /// some fold has fewer than two rows.
  std::vector<double> shuffle_r2;
  double median_r2 = 0.0;
  double median_mse = 0.0;
  double median_node_count = 0.0;
  double median_complexity = 0.0;
  double median_corr = 0.0;
  double runtime_s = 0.0;
};

CvReport cross_validate(const Dataset& data, const RunConfig& cfg, int folds = 10, int shuffles = 5);
nlohmann::json cv_to_json(const CvReport& report);
void write_cv_csv(std::ostream& os, const CvReport& report);

enum class ReportFormat { Json, Csv };
ReportFormat parse_format(std::string_view name);

struct RunMetrics {
  double train_r2 = 0.0;
  double val_r2 = 0.0;
  std::size_t node_count = 0;
  long long complexity = 0;
  double corr = 0.0;
  double runtime_s = 0.0;
};

/// Metrics of the selected model on the standardised training data it was fit on.
RunMetrics compute_metrics(const FeatModel& model, const Dataset& data);

struct SummaryRow {
  std::string feature;
  double beta = 0.0;
};
/// Selected-model features ordered by |beta| descending.
std::vector<SummaryRow> model_summary(const Individual& model);

/// Writes archive.{jsonl,csv}, model_summary.{json,csv}, metrics.json,
/// model.json and (optionally) plot_data.csv into `dir`.
void emit_report(const RunMetrics& metrics, const FeatModel& model, const std::filesystem::path& dir,
                 ReportFormat format, bool plot_data);

}  // namespace featforge
