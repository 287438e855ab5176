#pragma once

// Scoring of frame selections against the generator's extraneous labels.
// This is the only library module that reads GroundTruth.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "eil/domain.hpp"

namespace eil {

struct FilterRow {
  std::string label;
  std::size_t extraneous_kept = 0;
  std::size_t total_kept = 0;

  /// extraneous_kept / total_kept; 0 for an empty row.
  double fraction() const;
};

struct FilterReport {
  FilterRow original;  // every frame kept
  FilterRow filtered;
};

/// Every trajectory of `data` must have exactly one selection (matched by id).
FilterReport filter_report(const Dataset& data, const std::vector<Selection>& selections,
                           const std::string& label = "filtered");
FilterRow count_row(std::string label, std::size_t extraneous_kept, std::size_t total_kept);

struct PrecisionRecall {
  double task_recall = 1.0;         // kept task-relevant / all task-relevant
  double extraneous_rejection = 0.0;  // dropped extraneous / all extraneous
};
PrecisionRecall precision_recall(const Dataset& data, const std::vector<Selection>& selections);

/// One decimal place, e.g. "28.4%".
std::string format_percent(double fraction);

/// Aligned plain-text table. `header` names the columns; every row must have
/// the same width.
std::string text_table(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);
std::string filter_table(const std::vector<FilterRow>& rows);

/// One JSON record per row with full-precision fractions.
void save_filter_rows(const std::vector<FilterRow>& rows, const std::filesystem::path& path);

/// Per-frame alignment curve rows: trajectory, frame, kept, extraneous.
void save_alignment_curve(const Dataset& data, const std::vector<Selection>& selections,
                          const std::filesystem::path& path);

}  // namespace eil
