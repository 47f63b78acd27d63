#include "featforge/archive.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "featforge/linear.hpp"
#include "featforge/objectives.hpp"

namespace featforge {

void ParetoArchive::update(std::span<const Individual> candidates) {
  std::vector<ArchiveEntry> pool = std::move(entries_);
  for (const auto& c : candidates) {
    if (!c.evaluated || !std::isfinite(c.train_mse) || c.train_mse >= kWorstFitness) continue;
    ArchiveEntry e;
    e.model = c;
    e.model.case_errors.clear();
    e.model.case_errors.shrink_to_fit();
    e.train_mse = c.train_mse;
    e.complexity = c.complexity;
    pool.push_back(std::move(e));
  }
  // existing entries come first, so stable ordering keeps them on exact ties
  std::stable_sort(pool.begin(), pool.end(), [](const ArchiveEntry& a, const ArchiveEntry& b) {
    if (a.complexity != b.complexity) return a.complexity < b.complexity;
    return a.train_mse < b.train_mse;
  });
  entries_.clear();
  for (auto& e : pool)
    if (entries_.empty() || e.train_mse < entries_.back().train_mse) {
      if (!entries_.empty() && entries_.back().complexity == e.complexity) continue;
      entries_.push_back(std::move(e));
    }
}

double ParetoArchive::best_train_mse() const {
  return entries_.empty() ? std::numeric_limits<double>::infinity() : entries_.back().train_mse;
}

std::size_t select_final(std::vector<ArchiveEntry>& entries, const Matrix& X_val, const Vector& y_val) {
  if (entries.empty()) throw std::runtime_error("select_final: empty archive");
  std::size_t best = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    const Vector yhat = predict(e.model, X_val);
    e.val_mse = yhat.allFinite() ? mse(y_val, yhat) : kWorstFitness;
    const auto& b = entries[best];
    if (e.val_mse < b.val_mse || (e.val_mse == b.val_mse && e.complexity < b.complexity)) best = i;
  }
  return best;
}

void score_entries(std::vector<ArchiveEntry>& entries, const Matrix& X_train, const Vector& y_train,
                   const Matrix& X_val, const Vector& y_val) {
  for (auto& e : entries) {
    const Vector tr = predict(e.model, X_train);
    e.train_mse = mse(y_train, tr);
    e.train_r2 = r2_score(y_train, tr);
    if (y_val.size() > 0) {
      const Vector va = predict(e.model, X_val);
      e.val_mse = mse(y_val, va);
      e.val_r2 = r2_score(y_val, va);
    }
  }
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void write_archive_jsonl(std::ostream& os, std::span<const ArchiveEntry> entries) {
  for (const auto& e : entries) {
    nlohmann::json j;
    j["complexity"] = e.complexity;
    j["train_mse"] = number_or_null(e.train_mse);
    j["val_mse"] = number_or_null(e.val_mse);
    j["train_r2"] = number_or_null(e.train_r2);
    j["val_r2"] = number_or_null(e.val_r2);
    j["expression"] = to_string(e.model, true);
    j["beta"] = e.model.beta;
    os << j.dump() << '\n';
  }
}

void write_archive_csv(std::ostream& os, std::span<const ArchiveEntry> entries) {
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v).dump() : std::string{}; };
  os << "complexity,train_mse,val_mse,train_r2,val_r2,expression,beta\n";
  for (const auto& e : entries) {
    std::string beta;
    for (std::size_t i = 0; i < e.model.beta.size(); ++i) beta += (i ? ";" : "") + nlohmann::json(e.model.beta[i]).dump();
    std::string expr = to_string(e.model, true);
    os << e.complexity << ',' << num(e.train_mse) << ',' << num(e.val_mse) << ',' << num(e.train_r2) << ','
       << num(e.val_r2) << ",\"" << expr << "\",\"" << beta << "\"\n";
  }
}

}  // namespace featforge
