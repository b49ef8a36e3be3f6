#pragma once

// Benchmark protocol: reference lengths, repeated seeded runs, per-run
// penalization, median aggregation.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tspsel/error.hpp"
#include "tspsel/external.hpp"
#include "tspsel/instances.hpp"
#include "tspsel/metrics.hpp"
#include "tspsel/random.hpp"
#include "tspsel/run_table.hpp"
#include "tspsel/solvers.hpp"

namespace tspsel {

enum class TimingMode { deterministic, wallclock };

struct RunConfig {
  std::size_t reps = 5;
  double cutoff_s = 900.0;
  double penalty_factor = 10.0;
  TimingMode mode = TimingMode::deterministic;
  std::uint64_t seed = 0;
  double cost_rate = 1e6;
  double epsilon = 0.0;  ///< success threshold is (1 + epsilon) * reference
  std::size_t workers = 1;
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();

  void validate() const {
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (!(cutoff_s > 0.0)) throw ConfigError("cutoff must be positive");
    if (!(penalty_factor >= 1.0)) throw ConfigError("penalty factor must be at least 1");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (mode == TimingMode::deterministic && !(cost_rate > 0.0)) throw ConfigError("cost rate must be positive");
  }
};

struct RunRecord {
  std::string instance_id;
  std::string solver_id;
  std::size_t rep = 0;
  bool success = false;
  double time_s = 0.0;
  double best_length = 0.0;
};

/// Seed of one run; depends on identifiers only, never on execution order.
inline std::uint64_t run_seed(std::uint64_t base, const std::string& instance_id, const std::string& solver_id,
                              std::uint64_t rep) {
  return derive_seed(base, {stable_hash(instance_id), stable_hash(solver_id), rep});
}

/// Calls task(k) for k in [0, count) on `workers` threads. Results must be
/// written to per-k slots; the first exception is rethrown after joining.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t k = next.fetch_add(1);
        if (k >= count) return;
        try {
          task(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline Budget make_budget(const RunConfig& config, double cutoff, double target) {
  Budget b;
  b.cutoff_s = cutoff;
  b.target_length = target;
  b.cost_rate = config.cost_rate;
  b.wallclock = config.mode == TimingMode::wallclock;
  return b;
}

/// Reference length per instance: exact_dp for n <= 13, otherwise the best
/// length seen when every solver runs once for multiplier * cutoff with an
/// unreachable target.
inline std::vector<double> oracle_pass(const std::vector<Instance>& instances, const std::vector<SolverSpec>& solvers,
                                       double budget_multiplier, const RunConfig& config) {
  config.validate();
  if (!(budget_multiplier >= 1.0)) throw ConfigError("budget multiplier must be at least 1");
  if (solvers.empty()) throw ConfigError("empty portfolio");
  const std::size_t m = solvers.size();
  std::vector<double> lengths(instances.size() * m, std::numeric_limits<double>::infinity());
  parallel_for(instances.size() * m, config.workers, [&](std::size_t k) {
    const Instance& inst = instances[k / m];
    const SolverSpec& spec = solvers[k % m];
    if (inst.size() <= kExactMaxCities) {
      if (k % m == 0) lengths[k] = exact_dp(inst).length;
      return;
    }
    const Budget budget = make_budget(config, config.cutoff_s * budget_multiplier, 0.0);
    lengths[k] = solve(inst, spec, budget, run_seed(config.seed, inst.id, spec.id, stable_hash("oracle")),
                       config.scratch_dir)
                     .best_length;
  });
  std::vector<double> refs(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i)
    refs[i] = *std::min_element(lengths.begin() + static_cast<std::ptrdiff_t>(i * m),
                                lengths.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
  return refs;
}

/// Median aggregation of penalized run times. For an even number of reps the
/// lower median is used, so the pair counts as successful exactly when at
/// least ceil(reps / 2) runs succeeded and the penalty law holds.
inline std::pair<double, bool> aggregate_runs(const std::vector<RunRecord>& runs, double cutoff, double factor) {
  if (runs.empty()) throw DomainError("no runs to aggregate");
  std::vector<std::pair<double, bool>> times;
  for (const auto& r : runs) times.emplace_back(penalized(r.time_s, r.success, cutoff, factor), r.success);
  std::sort(times.begin(), times.end());
  return times[(times.size() - 1) / 2];
}

using PairKey = std::pair<std::string, std::string>;  // (instance id, solver id)

struct PairResult {
  double median_time_s = 0.0;
  bool success = false;
};

struct PortfolioRun {
  RunTable table;
  std::vector<RunRecord> records;  ///< runs executed in this call (resumed pairs excluded)
};

/// Runs `reps` seeded repetitions of every (instance, solver) pair and
/// assembles the canonical table. Pairs found in `completed` are trusted and
/// skipped. `on_pair` (if set) is called under a lock as each pair finishes.
inline PortfolioRun run_portfolio(const std::vector<Instance>& instances, const std::vector<SolverSpec>& solvers,
                                  const RunConfig& config, const std::map<std::string, double>& references,
                                  const std::map<PairKey, PairResult>& completed = {},
                                  const std::function<void(const Instance&, const SolverSpec&, const PairResult&)>&
                                      on_pair = {}) {
  config.validate();
  if (instances.empty()) throw ConfigError("no instances to run");
  if (solvers.empty()) throw ConfigError("empty portfolio");
  {
    std::set<std::string> ids;
    for (const auto& s : solvers)
      if (!ids.insert(s.id).second) throw ConfigError("duplicate solver id " + s.id);
    ids.clear();
    for (const auto& inst : instances)
      if (!ids.insert(inst.id).second) throw ConfigError("duplicate instance id " + inst.id);
  }
  for (const auto& inst : instances)
    if (!references.contains(inst.id)) throw ConfigError("missing reference length for " + inst.id);

  const std::size_t m = solvers.size();
  std::vector<PairResult> results(instances.size() * m);
  std::vector<std::vector<RunRecord>> records(results.size());
  std::vector<std::size_t> todo;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto it = completed.find({instances[k / m].id, solvers[k % m].id});
    if (it != completed.end())
      results[k] = it->second;
    else
      todo.push_back(k);
  }

  std::mutex sink;
  parallel_for(todo.size(), config.workers, [&](std::size_t t) {
    const std::size_t k = todo[t];
    const Instance& inst = instances[k / m];
    const SolverSpec& spec = solvers[k % m];
    const Budget budget = make_budget(config, config.cutoff_s, (1.0 + config.epsilon) * references.at(inst.id));
    std::vector<RunRecord> runs;
    for (std::size_t rep = 0; rep < config.reps; ++rep) {
      const auto out = solve(inst, spec, budget, run_seed(config.seed, inst.id, spec.id, rep), config.scratch_dir);
      runs.push_back({inst.id, spec.id, rep, out.success, out.time_s, out.best_length});
    }
    const auto [median, ok] = aggregate_runs(runs, config.cutoff_s, config.penalty_factor);
    results[k] = {median, ok};
    records[k] = std::move(runs);
    if (on_pair) {
      std::lock_guard lock(sink);
      on_pair(inst, spec, results[k]);
    }
  });

  std::vector<RunTableRow> rows;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const Instance& inst = instances[k / m];
    rows.push_back({inst.id, inst.family, solvers[k % m].id, results[k].median_time_s, results[k].success});
  }
  PortfolioRun out;
  out.table = assemble(rows, config.cutoff_s, config.penalty_factor);
  for (auto& r : records)
    for (auto& rec : r) out.records.push_back(std::move(rec));
  return out;
}

}  // namespace tspsel
