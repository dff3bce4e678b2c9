#pragma once

// Text, JSON and CSV rendering of metric reports. Every floating-point value
// that leaves the program goes through `format_sig9` / `round_sig9` so that
// output is byte-stable across runs.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stateval/metrics.hpp"

namespace stateval {

inline std::string format_sig9(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline double round_sig9(double v) { return std::strtod(format_sig9(v).c_str(), nullptr); }

/// "ASE", or "C-ASE" when the reference velocity was synthesized from a
/// Chebyshev fit.
inline std::string metric_label(std::string_view metric, bool chebyshev_reference) {
  if (metric == "ase") return chebyshev_reference ? "C-ASE" : "ASE";
  if (metric == "ate") return "ATE";
  if (metric == "rpe") return "RPE";
  return std::string(metric);
}

inline nlohmann::ordered_json alignment_to_json(const SimilarityTransform& s) {
  const Eigen::Quaterniond q = s.rotation.quaternion();
  return {{"s", round_sig9(s.scale)},
          {"quat_xyzw", {round_sig9(q.x()), round_sig9(q.y()), round_sig9(q.z()), round_sig9(q.w())}},
          {"t", {round_sig9(s.translation.x()), round_sig9(s.translation.y()), round_sig9(s.translation.z())}}};
}

/// {"metric", "count", "rmse", "std", "median", "align", ["per_step"]}.
inline nlohmann::ordered_json report_to_json(std::string_view metric, const MetricReport& report,
                                             const SimilarityTransform& alignment, bool per_step) {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["count"] = report.count;
  j["rmse"] = round_sig9(report.rmse);
  j["std"] = round_sig9(report.std);
  j["median"] = round_sig9(report.median);
  j["align"] = alignment_to_json(alignment);
  if (per_step) {
    auto arr = nlohmann::ordered_json::array();
    for (double e : report.per_step) arr.push_back(round_sig9(e));
    j["per_step"] = std::move(arr);
  }
  return j;
}

/// Fixed-width table; `rows` are (name, cells...) with the header in `columns`.
inline std::string format_table(const std::vector<std::string>& columns,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += cells[c];
      if (c + 1 < cells.size()) out.append(width[c] - cells[c].size() + 2, ' ');
    }
    out += '\n';
  };
  emit(columns);
  for (const auto& row : rows) emit(row);
  return out;
}

}  // namespace stateval
