#pragma once

// PAR10, virtual best / single best solver, per-family statistics and the
// selector evaluation metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tspsel/error.hpp"
#include "tspsel/run_table.hpp"

namespace tspsel {

/// Time charged to one run: its time when successful, factor * cutoff otherwise.
inline double penalized(double time_s, bool success, double cutoff, double factor = 10.0) {
  return success ? time_s : factor * cutoff;
}

/// Mean of already-penalized times.
inline double par10(std::span<const double> times) {
  if (times.empty()) throw DomainError("PAR10 of an empty set");
  return std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
}

inline std::vector<double> column(const RunTable& table, std::size_t j) {
  std::vector<double> col(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) col[i] = table.time(i, j);
  return col;
}

inline double column_par10(const RunTable& table, std::size_t j) { return par10(column(table, j)); }

/// Index of the smallest entry; ties go to the lowest index.
inline std::size_t argmin(std::span<const double> values) {
  return static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
}

struct VbsResult {
  double par10 = 0.0;
  std::vector<std::size_t> choice;  ///< per-instance best solver
};

inline VbsResult vbs(const RunTable& table) {
  VbsResult out;
  std::vector<double> best(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const auto row = table.row(i);
    out.choice.push_back(argmin(row));
    best[i] = row[out.choice.back()];
  }
  out.par10 = par10(best);
  return out;
}

/// Solver with the minimal column PAR10; ties go to the lowest index.
inline std::size_t sbs(const RunTable& table) {
  std::vector<double> scores(table.cols());
  for (std::size_t j = 0; j < table.cols(); ++j) scores[j] = column_par10(table, j);
  return argmin(scores);
}

struct FamilyStats {
  std::string family;  ///< family tag, or "Total"
  std::size_t instances = 0;
  std::size_t unique = 0;  ///< instances with exactly one best solver
  std::size_t shared = 0;  ///< instances where >= 2 solvers tie for best
  std::vector<std::size_t> unique_by_solver;
  std::vector<std::size_t> shared_by_solver;
  std::vector<std::size_t> failed;
  std::vector<double> par10;
  double vbs_par10 = 0.0;
};

/// Per-family rows in canonical family order, followed by a "Total" row.
/// A solver is among the best on an instance when its time is within
/// tie_tol (absolute) of the row minimum.
inline std::vector<FamilyStats> family_stats(const RunTable& table, double tie_tol = 0.0) {
  if (tie_tol < 0.0) throw DomainError("tie tolerance must be non-negative");
  const std::size_t m = table.cols();
  auto stats_for = [&](const std::vector<std::size_t>& rows, std::string name) {
    FamilyStats s;
    s.family = std::move(name);
    s.instances = rows.size();
    s.unique_by_solver.assign(m, 0);
    s.shared_by_solver.assign(m, 0);
    s.failed.assign(m, 0);
    s.par10.assign(m, 0.0);
    std::vector<double> best;
    for (std::size_t i : rows) {
      const auto row = table.row(i);
      const double lo = *std::min_element(row.begin(), row.end());
      best.push_back(lo);
      std::vector<std::size_t> winners;
      for (std::size_t j = 0; j < m; ++j)
        if (row[j] <= lo + tie_tol) winners.push_back(j);
      if (winners.size() == 1) {
        ++s.unique;
        ++s.unique_by_solver[winners[0]];
      } else {
        ++s.shared;
        for (std::size_t j : winners) ++s.shared_by_solver[j];
      }
      for (std::size_t j = 0; j < m; ++j)
        if (!table.ok(i, j)) ++s.failed[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> col;
      for (std::size_t i : rows) col.push_back(table.time(i, j));
      s.par10[j] = par10(col);
    }
    s.vbs_par10 = par10(best);
    return s;
  };

  std::vector<FamilyStats> out;
  for (Family f : {Family::rue, Family::explosion, Family::implosion, Family::expansion, Family::cluster,
                   Family::grid, Family::unknown}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < table.rows(); ++i)
      if (table.families[i] == f) rows.push_back(i);
    if (!rows.empty()) out.push_back(stats_for(rows, std::string(to_string(f))));
  }
  std::vector<std::size_t> all(table.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  out.push_back(stats_for(all, "Total"));
  return out;
}

struct EvalReport {
  double par10 = 0.0;
  double avg_rank = 0.0;
  double impro_pct = 0.0;    ///< chosen strictly faster than the SBS
  double notwo_pct = 0.0;    ///< chosen not slower than the SBS
  double accuracy_pct = 0.0; ///< chosen attains the row minimum
  std::size_t timeouts = 0;  ///< chosen solver failed
  std::size_t instances = 0;
};

/// Scores per-instance decisions. Cost per instance is t[i][d] + overhead[i];
/// overhead is added after penalization and never penalized itself. Ranks
/// use competition ranking: 1 + number of solvers strictly faster.
inline EvalReport evaluate_selector(const RunTable& table, std::span<const std::size_t> decisions,
                                    std::span<const double> overhead) {
  if (decisions.size() != table.rows() || overhead.size() != table.rows())
    throw DomainError("decisions and overhead must cover every instance");
  const std::size_t best_single = sbs(table);
  EvalReport r;
  r.instances = table.rows();
  std::vector<double> cost(table.rows());
  double rank_sum = 0.0;
  std::size_t better = 0, not_worse = 0, hits = 0;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const std::size_t d = decisions[i];
    if (d >= table.cols()) throw DomainError("decision index out of range");
    if (!(overhead[i] >= 0.0)) throw DomainError("overhead must be non-negative");
    const double chosen = table.time(i, d);
    cost[i] = chosen + overhead[i];
    std::size_t faster = 0;
    double lo = chosen;
    for (std::size_t j = 0; j < table.cols(); ++j) {
      if (table.time(i, j) < chosen) ++faster;
      lo = std::min(lo, table.time(i, j));
    }
    rank_sum += 1.0 + static_cast<double>(faster);
    if (chosen < table.time(i, best_single)) ++better;
    if (chosen <= table.time(i, best_single)) ++not_worse;
    if (chosen == lo) ++hits;
    if (!table.ok(i, d)) ++r.timeouts;
  }
  const double n = static_cast<double>(table.rows());
  r.par10 = par10(cost);
  r.avg_rank = rank_sum / n;
  r.impro_pct = 100.0 * static_cast<double>(better) / n;
  r.notwo_pct = 100.0 * static_cast<double>(not_worse) / n;
  r.accuracy_pct = 100.0 * static_cast<double>(hits) / n;
  return r;
}

inline EvalReport evaluate_selector(const RunTable& table, std::span<const std::size_t> decisions) {
  const std::vector<double> zero(table.rows(), 0.0);
  return evaluate_selector(table, decisions, zero);
}

}  // namespace tspsel
