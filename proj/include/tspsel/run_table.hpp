#pragma once

// Per-instance x per-solver median penalized runtimes and its CSV form.
//
// CSV: header "instance_id,family,solver_id,median_time_s,success", one row
// per (instance, solver), instances then solvers in lexicographic order,
// times with 17 significant digits, success as 0/1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tspsel/error.hpp"
#include "tspsel/instances.hpp"

namespace tspsel {

struct RunTable {
  std::vector<std::string> instances;
  std::vector<Family> families;  ///< parallel to instances
  std::vector<std::string> solvers;
  std::vector<double> t;               ///< row-major, instances x solvers
  std::vector<std::uint8_t> success;   ///< row-major, instances x solvers
  double cutoff = 900.0;
  double penalty_factor = 10.0;

  std::size_t rows() const noexcept { return instances.size(); }
  std::size_t cols() const noexcept { return solvers.size(); }
  double time(std::size_t i, std::size_t j) const { return t[i * cols() + j]; }
  bool ok(std::size_t i, std::size_t j) const { return success[i * cols() + j] != 0; }
  double penalty() const noexcept { return penalty_factor * cutoff; }

  std::vector<double> row(std::size_t i) const {
    return {t.begin() + static_cast<std::ptrdiff_t>(i * cols()),
            t.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols())};
  }

  /// Checks shapes and the penalty law.
  void validate() const {
    if (families.size() != instances.size() || t.size() != rows() * cols() || success.size() != t.size())
      throw ShapeError("run table shapes are inconsistent");
    if (cols() == 0 || rows() == 0) throw ShapeError("run table is empty");
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (success[k] ? !(t[k] >= 0.0 && t[k] <= cutoff) : t[k] != penalty())
        throw DomainError("penalty law violated at " + instances[k / cols()] + "/" + solvers[k % cols()]);
    }
  }

  friend bool operator==(const RunTable&, const RunTable&) = default;
};

/// Restriction of a table to the given rows (in the given order).
inline RunTable subset_rows(const RunTable& table, const std::vector<std::size_t>& rows) {
  RunTable out;
  out.solvers = table.solvers;
  out.cutoff = table.cutoff;
  out.penalty_factor = table.penalty_factor;
  for (std::size_t i : rows) {
    out.instances.push_back(table.instances.at(i));
    out.families.push_back(table.families.at(i));
    for (std::size_t j = 0; j < table.cols(); ++j) {
      out.t.push_back(table.time(i, j));
      out.success.push_back(table.success[i * table.cols() + j]);
    }
  }
  return out;
}

inline constexpr const char* kRunTableHeader = "instance_id,family,solver_id,median_time_s,success";

struct RunTableRow {
  std::string instance_id;
  Family family = Family::unknown;
  std::string solver_id;
  double median_time_s = 0.0;
  bool success = false;
};

inline std::string format_row(const RunTableRow& r) {
  return r.instance_id + "," + std::string(to_string(r.family)) + "," + r.solver_id + "," +
         format_real(r.median_time_s) + "," + (r.success ? "1" : "0");
}

inline void save_csv(const RunTable& table, std::ostream& out) {
  out << kRunTableHeader << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i)
    for (std::size_t j = 0; j < table.cols(); ++j)
      out << format_row({table.instances[i], table.families[i], table.solvers[j], table.time(i, j), table.ok(i, j)})
          << '\n';
  if (!out) throw IoError("failed to write run table");
}

inline void save_csv(const RunTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_csv(table, out);
}

/// Parses data rows (no header). `first_line` is the line number of the
/// first row, for error messages.
inline std::vector<RunTableRow> parse_rows(std::istream& in, std::size_t first_line) {
  std::vector<RunTableRow> rows;
  std::string raw;
  std::size_t line_no = first_line - 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 5) throw ParseError("expected 5 columns, found " + std::to_string(cells.size()), line_no);
    RunTableRow r;
    r.instance_id = std::string(detail::trim(cells[0]));
    r.solver_id = std::string(detail::trim(cells[2]));
    if (r.instance_id.empty() || r.solver_id.empty()) throw ParseError("empty identifier", line_no);
    const auto fam = parse_family(detail::trim(cells[1]));
    if (!fam) throw ParseError("unknown family '" + std::string(cells[1]) + "'", line_no);
    r.family = *fam;
    if (!detail::parse_number(detail::trim(cells[3]), r.median_time_s) || !std::isfinite(r.median_time_s))
      throw ParseError("non-numeric median_time_s", line_no);
    const auto flag = detail::trim(cells[4]);
    if (flag == "1" || flag == "true")
      r.success = true;
    else if (flag == "0" || flag == "false")
      r.success = false;
    else
      throw ParseError("success must be 0 or 1", line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Builds a canonical table from rows; every (instance, solver) pair must
/// appear exactly once.
inline RunTable assemble(const std::vector<RunTableRow>& rows, double cutoff, double penalty_factor) {
  std::map<std::string, Family> inst_family;
  std::set<std::string> solver_ids;
  for (const auto& r : rows) {
    auto [it, fresh] = inst_family.emplace(r.instance_id, r.family);
    if (!fresh && it->second != r.family) throw ParseError("conflicting family for " + r.instance_id, 0);
    solver_ids.insert(r.solver_id);
  }
  RunTable table;
  table.cutoff = cutoff;
  table.penalty_factor = penalty_factor;
  for (const auto& [id, fam] : inst_family) {
    table.instances.push_back(id);
    table.families.push_back(fam);
  }
  table.solvers.assign(solver_ids.begin(), solver_ids.end());
  std::map<std::string, std::size_t> ri, ci;
  for (std::size_t i = 0; i < table.rows(); ++i) ri[table.instances[i]] = i;
  for (std::size_t j = 0; j < table.cols(); ++j) ci[table.solvers[j]] = j;
  table.t.assign(table.rows() * table.cols(), 0.0);
  table.success.assign(table.t.size(), 0);
  std::vector<char> seen(table.t.size(), 0);
  for (const auto& r : rows) {
    const std::size_t k = ri[r.instance_id] * table.cols() + ci[r.solver_id];
    if (seen[k]) throw ParseError("duplicate row for " + r.instance_id + "/" + r.solver_id, 0);
    seen[k] = 1;
    table.t[k] = r.median_time_s;
    table.success[k] = r.success ? 1 : 0;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw ParseError("run table is missing (instance, solver) rows", 0);
  return table;
}

/// The CSV carries no cutoff; callers pass the one the table was produced with.
inline RunTable load_csv(std::istream& in, double cutoff = 900.0, double penalty_factor = 10.0) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty run table", 1);
  if (detail::trim(header) != kRunTableHeader) throw ParseError("unexpected header", 1);
  const auto rows = parse_rows(in, 2);
  if (rows.empty()) throw ParseError("run table has no rows", 2);
  return assemble(rows, cutoff, penalty_factor);
}

inline RunTable load_csv(const std::filesystem::path& path, double cutoff = 900.0, double penalty_factor = 10.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_csv(in, cutoff, penalty_factor);
}

}  // namespace tspsel
