#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "featforge/evaluator.hpp"

namespace featforge {

struct ArchiveEntry {
  Individual model;
  double train_mse = 0.0;
  long long complexity = 0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  double train_r2 = std::numeric_limits<double>::quiet_NaN();
  double val_r2 = std::numeric_limits<double>::quiet_NaN();
};

/// Non-dominated set over (training loss, complexity). Entries are kept sorted
/// by complexity, so losses strictly decrease along the archive.
class ParetoArchive {
 public:
  /// Merges evaluated candidates; unevaluated or failed ones are ignored.
  void update(std::span<const Individual> candidates);

  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::vector<ArchiveEntry>& entries() { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  double best_train_mse() const;

 private:
  std::vector<ArchiveEntry> entries_;
};

/// Fills val_mse on every entry and returns the index of the lowest, ties
/// going to lower complexity. Throws on an empty archive.
std::size_t select_final(std::vector<ArchiveEntry>& entries, const Matrix& X_val, const Vector& y_val);

/// Fills train/val R^2 and MSE columns from the given splits.
void score_entries(std::vector<ArchiveEntry>& entries, const Matrix& X_train, const Vector& y_train,
                   const Matrix& X_val, const Vector& y_val);

/// One JSON object per line:
/// {complexity, train_mse, val_mse, train_r2, val_r2, expression, beta}
void write_archive_jsonl(std::ostream& os, std::span<const ArchiveEntry> entries);
void write_archive_csv(std::ostream& os, std::span<const ArchiveEntry> entries);

}  // namespace featforge
