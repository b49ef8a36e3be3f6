#pragma once

// Independent reference implementations of the metrics, written as plain
// nested loops over a random table, for equivalence tests.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "tspsel/random.hpp"
#include "tspsel/run_table.hpp"

namespace oracle {

/// Random table with m <= 4 solvers and n <= 6 instances, mixing failures
/// (penalized) and successes drawn from a few discrete values so ties occur.
inline tspsel::RunTable random_table(tspsel::Rng& rng, double cutoff = 900.0) {
  using namespace tspsel;
  RunTable t;
  const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(6);
  t.cutoff = cutoff;
  for (std::size_t j = 0; j < m; ++j) t.solvers.push_back("s" + std::to_string(j));
  const Family fams[] = {Family::rue, Family::cluster, Family::grid};
  for (std::size_t i = 0; i < n; ++i) {
    t.instances.push_back("i" + std::to_string(i));
    t.families.push_back(fams[rng.below(3)]);
    for (std::size_t j = 0; j < m; ++j) {
      const bool ok = rng.below(5) != 0;
      double v = ok ? (rng.coin() ? static_cast<double>(1 + rng.below(4)) : rng.uniform(0.0, cutoff)) : 10 * cutoff;
      t.t.push_back(v);
      t.success.push_back(ok ? 1 : 0);
    }
  }
  return t;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct Vbs {
  double par10;
  std::vector<std::size_t> choice;
};

inline Vbs vbs(const tspsel::RunTable& t) {
  Vbs r;
  std::vector<double> best;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < t.cols(); ++j)
      if (t.t[i * t.cols() + j] < t.t[i * t.cols() + arg]) arg = j;
    r.choice.push_back(arg);
    best.push_back(t.t[i * t.cols() + arg]);
  }
  r.par10 = mean(best);
  return r;
}

inline std::vector<double> column_means(const tspsel::RunTable& t) {
  std::vector<double> out;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < t.rows(); ++i) col.push_back(t.t[i * t.cols() + j]);
    out.push_back(mean(col));
  }
  return out;
}

inline std::size_t sbs(const tspsel::RunTable& t) {
  const auto means = column_means(t);
  std::size_t arg = 0;
  for (std::size_t j = 1; j < means.size(); ++j)
    if (means[j] < means[arg]) arg = j;
  return arg;
}

struct Counts {
  std::size_t unique = 0, shared = 0;
  std::vector<std::size_t> failed;
};

/// Unique/shared/failed over the given rows with an absolute tie tolerance.
inline Counts counts(const tspsel::RunTable& t, const std::vector<std::size_t>& rows, double tol) {
  Counts c;
  c.failed.assign(t.cols(), 0);
  for (std::size_t i : rows) {
    double lo = t.t[i * t.cols()];
    for (std::size_t j = 0; j < t.cols(); ++j) lo = std::min(lo, t.t[i * t.cols() + j]);
    std::size_t winners = 0;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (t.t[i * t.cols() + j] - lo <= tol) ++winners;
      if (!t.success[i * t.cols() + j]) ++c.failed[j];
    }
    (winners == 1 ? c.unique : c.shared)++;
  }
  return c;
}

struct Eval {
  double par10 = 0.0, avg_rank = 0.0, impro_pct = 0.0, notwo_pct = 0.0, accuracy_pct = 0.0;
  std::size_t timeouts = 0;
};

/// Selector scores from a sorted copy of each row: the competition rank is
/// one plus the position of the first entry equal to the chosen time.
inline Eval evaluate(const tspsel::RunTable& t, const std::vector<std::size_t>& d, const std::vector<double>& over) {
  Eval e;
  const std::size_t single = sbs(t), m = t.cols();
  std::vector<double> cost;
  double ranks = 0.0, better = 0.0, not_worse = 0.0, hits = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::vector<double> row(t.t.begin() + static_cast<std::ptrdiff_t>(i * m),
                            t.t.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
    const double chosen = row[d[i]];
    cost.push_back(chosen + over[i]);
    std::sort(row.begin(), row.end());
    ranks += 1.0 + static_cast<double>(std::lower_bound(row.begin(), row.end(), chosen) - row.begin());
    better += chosen < t.t[i * m + single];
    not_worse += chosen <= t.t[i * m + single];
    hits += chosen == row.front();
    e.timeouts += t.success[i * m + d[i]] == 0;
  }
  const double n = static_cast<double>(t.rows());
  e.par10 = mean(cost);
  e.avg_rank = ranks / n;
  e.impro_pct = 100.0 * better / n;
  e.notwo_pct = 100.0 * not_worse / n;
  e.accuracy_pct = 100.0 * hits / n;
  return e;
}

}  // namespace oracle
