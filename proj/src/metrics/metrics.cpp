#include "eil/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "eil/error.hpp"

namespace eil {

double FilterRow::fraction() const {
  return total_kept == 0 ? 0.0 : static_cast<double>(extraneous_kept) / static_cast<double>(total_kept);
}

FilterRow count_row(std::string label, std::size_t extraneous_kept, std::size_t total_kept) {
  if (extraneous_kept > total_kept) throw DataError("extraneous count exceeds total count");
  return {std::move(label), extraneous_kept, total_kept};
}

namespace {

std::map<std::string, const Selection*> index_selections(const Dataset& data,
                                                         const std::vector<Selection>& selections) {
  std::map<std::string, const Selection*> by_id;
  for (const auto& s : selections) {
    if (!by_id.emplace(s.trajectory_id, &s).second) {
      throw DataError("duplicate selection for trajectory '" + s.trajectory_id + "'");
    }
  }
  for (const auto& t : data.trajectories) {
    const auto it = by_id.find(t.id);
    if (it == by_id.end()) throw DataError("no selection for trajectory '" + t.id + "'");
    validate_selection(*it->second, t.size());
  }
  return by_id;
}

}  // namespace

FilterReport filter_report(const Dataset& data, const std::vector<Selection>& selections,
                           const std::string& label) {
  const auto by_id = index_selections(data, selections);
  FilterReport r;
  r.original.label = "original";
  r.filtered.label = label;
  for (const auto& t : data.trajectories) {
    const auto& ext = t.truth.extraneous;
    r.original.total_kept += t.size();
    r.original.extraneous_kept += static_cast<std::size_t>(std::count(ext.begin(), ext.end(), true));
    for (std::size_t i : by_id.at(t.id)->kept) {
      ++r.filtered.total_kept;
      if (ext[i]) ++r.filtered.extraneous_kept;
    }
  }
  return r;
}

PrecisionRecall precision_recall(const Dataset& data, const std::vector<Selection>& selections) {
  const auto by_id = index_selections(data, selections);
  std::size_t relevant = 0, relevant_kept = 0, extraneous = 0, extraneous_kept = 0;
  for (const auto& t : data.trajectories) {
    const auto& ext = t.truth.extraneous;
    for (bool e : ext) (e ? extraneous : relevant) += 1;
    for (std::size_t i : by_id.at(t.id)->kept) (ext[i] ? extraneous_kept : relevant_kept) += 1;
  }
  PrecisionRecall pr;
  if (relevant > 0) pr.task_recall = static_cast<double>(relevant_kept) / static_cast<double>(relevant);
  if (extraneous > 0) {
    pr.extraneous_rejection =
        static_cast<double>(extraneous - extraneous_kept) / static_cast<double>(extraneous);
  }
  return pr;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

std::string text_table(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw UsageError("table row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "  ";
      // First column left-aligned, numbers right-aligned.
      const std::string pad(width[c] - cells[c].size(), ' ');
      out += c == 0 ? cells[c] + pad : pad + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
  for (const auto& row : rows) line(row);
  return out;
}

std::string filter_table(const std::vector<FilterRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.label, std::to_string(r.extraneous_kept), std::to_string(r.total_kept),
                     format_percent(r.fraction())});
  }
  return text_table({"method", "extraneous", "total", "extraneous %"}, cells);
}

void save_filter_rows(const std::vector<FilterRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& r : rows) {
    nlohmann::json j{{"method", r.label},
                     {"extraneous_kept", r.extraneous_kept},
                     {"total_kept", r.total_kept},
                     {"extraneous_fraction", r.fraction()}};
    out << j.dump() << '\n';
  }
}

void save_alignment_curve(const Dataset& data, const std::vector<Selection>& selections,
                          const std::filesystem::path& path) {
  const auto by_id = index_selections(data, selections);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "trajectory\tframe\tkept\textraneous\n";
  for (const auto& t : data.trajectories) {
    std::vector<bool> kept(t.size(), false);
    for (std::size_t i : by_id.at(t.id)->kept) kept[i] = true;
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << t.id << '\t' << i << '\t' << (kept[i] ? 1 : 0) << '\t' << (t.truth.extraneous[i] ? 1 : 0) << '\n';
    }
  }
}

}  // namespace eil
