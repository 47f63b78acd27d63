#pragma once

#include <string>
#include <vector>

#include "featforge/evaluator.hpp"

namespace featforge {

struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  /// 1-based data row numbers dropped at ingestion because of missing cells.
  std::vector<std::size_t> rejected_rows;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(X.cols()); }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

/// Names x0..x{d-1} when none are supplied.
Dataset make_dataset(Matrix X, Vector y, std::vector<std::string> names = {}, std::string target = "y");

}  // namespace featforge
