#pragma once

// Aligned-text and JSON renderings of the per-family statistics and of
// selector evaluations.

#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tspsel/metrics.hpp"
#include "tspsel/run_table.hpp"

namespace tspsel {

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string short_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Left-aligned first column, right-aligned others.
inline std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      if (c == 0)
        out << r[c] << pad;
      else
        out << "  " << pad << r[c];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace detail

/// Per-family Unique / Shared / Failed / PAR10 rows, one block per family
/// plus Total, followed by the VBS / SBS summary.
inline std::string format_family_report(const RunTable& table, const std::vector<FamilyStats>& stats,
                                        int digits = 6) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"family", "row"};
  header.insert(header.end(), table.solvers.begin(), table.solvers.end());
  header.push_back("VBS");
  rows.push_back(header);
  for (const auto& s : stats) {
    auto line = [&](const std::string& label, auto value_of, std::string vbs) {
      std::vector<std::string> r{s.family + " (" + std::to_string(s.instances) + ")", label};
      for (std::size_t j = 0; j < table.cols(); ++j) r.push_back(value_of(j));
      r.push_back(std::move(vbs));
      rows.push_back(std::move(r));
    };
    line("Unique", [&](std::size_t j) { return std::to_string(s.unique_by_solver[j]); }, std::to_string(s.unique));
    line("Shared", [&](std::size_t j) { return std::to_string(s.shared_by_solver[j]); }, std::to_string(s.shared));
    line("Failed", [&](std::size_t j) { return std::to_string(s.failed[j]); }, "-");
    line("PAR10", [&](std::size_t j) { return detail::fixed(s.par10[j], digits); },
         detail::fixed(s.vbs_par10, digits));
  }
  const auto best = vbs(table);
  const std::size_t single = sbs(table);
  std::ostringstream out;
  out << detail::render_grid(rows) << '\n';
  out << "instances " << table.rows() << ", solvers " << table.cols() << ", cutoff " << detail::short_real(table.cutoff)
      << ", penalty " << detail::short_real(table.penalty()) << '\n';
  out << "VBS PAR10 " << detail::fixed(best.par10, digits) << '\n';
  out << "SBS " << table.solvers[single] << " PAR10 " << detail::fixed(column_par10(table, single), digits) << '\n';
  return out.str();
}

inline nlohmann::json family_report_json(const RunTable& table, const std::vector<FamilyStats>& stats) {
  nlohmann::json fams = nlohmann::json::array();
  for (const auto& s : stats) {
    fams.push_back({{"family", s.family},
                    {"instances", s.instances},
                    {"unique", s.unique},
                    {"shared", s.shared},
                    {"unique_by_solver", s.unique_by_solver},
                    {"shared_by_solver", s.shared_by_solver},
                    {"failed", s.failed},
                    {"par10", s.par10},
                    {"vbs_par10", s.vbs_par10}});
  }
  const auto best = vbs(table);
  const std::size_t single = sbs(table);
  return {{"solvers", table.solvers},
          {"cutoff", table.cutoff},
          {"penalty_factor", table.penalty_factor},
          {"families", fams},
          {"vbs_par10", best.par10},
          {"sbs", table.solvers[single]},
          {"sbs_par10", column_par10(table, single)}};
}

/// One row per method: PAR10, Avg. Rank, Impro., Notwo., accuracy, timeouts.
inline std::string format_eval_report(const std::vector<std::pair<std::string, EvalReport>>& rows, int digits = 6) {
  std::vector<std::vector<std::string>> grid{{"method", "PAR10", "Avg. Rank", "Impro. %", "Notwo. %", "Acc. %",
                                              "Timeouts"}};
  for (const auto& [name, r] : rows)
    grid.push_back({name, detail::fixed(r.par10, digits), detail::fixed(r.avg_rank, 2), detail::fixed(r.impro_pct, 2),
                    detail::fixed(r.notwo_pct, 2), detail::fixed(r.accuracy_pct, 2), std::to_string(r.timeouts)});
  return detail::render_grid(grid);
}

inline nlohmann::json eval_report_json(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [name, r] : rows)
    out.push_back({{"method", name},
                   {"par10", r.par10},
                   {"avg_rank", r.avg_rank},
                   {"impro_pct", r.impro_pct},
                   {"notwo_pct", r.notwo_pct},
                   {"accuracy_pct", r.accuracy_pct},
                   {"timeouts", r.timeouts},
                   {"instances", r.instances}});
  return out;
}

/// Per-instance (sbs_time, vbs_time, alt_time) rows, where alt is the best
/// solver other than the SBS.
inline void write_scatter(const RunTable& table, std::ostream& out) {
  const std::size_t single = sbs(table);
  out << "instance_id,family,sbs_time,vbs_time,alt_time\n";
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const auto row = table.row(i);
    double best = row[0], alt = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < row.size(); ++j) {
      best = std::min(best, row[j]);
      if (j != single) alt = std::min(alt, row[j]);
    }
    if (table.cols() == 1) alt = row[0];
    out << table.instances[i] << ',' << to_string(table.families[i]) << ',' << format_real(row[single]) << ','
        << format_real(best) << ',' << format_real(alt) << '\n';
  }
}

}  // namespace tspsel
