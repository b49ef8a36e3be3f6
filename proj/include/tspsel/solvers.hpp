#pragma once

// Built-in heuristic portfolio with quality-target / cutoff termination, and
// the Held-Karp exact oracle.
//
// Deterministic cost model: every evaluated candidate move (and every
// candidate examined by a construction heuristic) costs one unit; virtual
// time is units / cost_rate. A run stops as soon as its best tour reaches the
// target length, or when the unit budget floor(cutoff * cost_rate) is spent.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tspsel/error.hpp"
#include "tspsel/instances.hpp"
#include "tspsel/random.hpp"

namespace tspsel {

/// Visiting order over city indices 0..n-1.
struct Tour {
  std::vector<std::size_t> order;

  std::size_t size() const noexcept { return order.size(); }
  friend bool operator==(const Tour&, const Tour&) = default;
};

inline bool is_permutation_of(std::span<const std::size_t> order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (std::size_t c : order) {
    if (c >= n || seen[c]) return false;
    seen[c] = 1;
  }
  return true;
}

namespace detail {

/// Length summed in a canonical orientation (from city 0 towards its smaller
/// neighbour). Rotations and reflections of a tour give bit-identical sums.
template <class Dist>
double canonical_length(std::span<const std::size_t> order, Dist&& dist) {
  const std::size_t n = order.size();
  std::size_t start = 0;
  while (order[start] != 0) ++start;
  const std::size_t next = order[(start + 1) % n];
  const std::size_t prev = order[(start + n - 1) % n];
  const bool forward = next < prev;
  double total = 0.0;
  std::size_t pos = start;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t nxt = forward ? (pos + 1) % n : (pos + n - 1) % n;
    total += dist(order[pos], order[nxt]);
    pos = nxt;
  }
  return total;
}

}  // namespace detail

/// Closed tour length under Euclidean distances.
inline double tour_length(const Instance& inst, const Tour& tour) {
  if (!is_permutation_of(tour.order, inst.size()))
    throw InvalidTourError("tour is not a permutation of the " + std::to_string(inst.size()) + " cities");
  return detail::canonical_length(tour.order,
                                  [&](std::size_t a, std::size_t b) { return distance(inst.points[a], inst.points[b]); });
}

// ---------------------------------------------------------------------------
// Exact oracle

inline constexpr std::size_t kExactMaxCities = 13;

struct ExactResult {
  double length = 0.0;
  Tour tour;
};

/// Held-Karp dynamic program. Provably optimal; n <= 13.
inline ExactResult exact_dp(const Instance& inst) {
  const std::size_t n = inst.size();
  if (n > kExactMaxCities) throw SizeError("exact_dp supports at most 13 cities, got " + std::to_string(n));
  if (n < 3) throw SizeError("exact_dp needs at least 3 cities");
  const std::size_t m = n - 1;  // city 0 is fixed as the start
  const std::size_t full = std::size_t{1} << m;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(full * m, inf);
  std::vector<std::uint8_t> parent(full * m, 0xff);
  auto d = [&](std::size_t a, std::size_t b) { return distance(inst.points[a], inst.points[b]); };

  for (std::size_t j = 0; j < m; ++j) cost[(std::size_t{1} << j) * m + j] = d(0, j + 1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      const double base = cost[mask * m + j];
      if (base == inf) continue;
      for (std::size_t k = 0; k < m; ++k) {
        if (mask & (std::size_t{1} << k)) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double cand = base + d(j + 1, k + 1);
        if (cand < cost[next * m + k]) {
          cost[next * m + k] = cand;
          parent[next * m + k] = static_cast<std::uint8_t>(j);
        }
      }
    }
  }
  double best = inf;
  std::size_t last = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double cand = cost[(full - 1) * m + j] + d(j + 1, 0);
    if (cand < best) {
      best = cand;
      last = j;
    }
  }
  ExactResult result;
  std::vector<std::size_t> rev;
  std::size_t mask = full - 1;
  std::size_t cur = last;
  while (true) {
    rev.push_back(cur + 1);
    const std::uint8_t p = parent[mask * m + cur];
    mask &= ~(std::size_t{1} << cur);
    if (p == 0xff) break;
    cur = p;
  }
  result.tour.order.push_back(0);
  result.tour.order.insert(result.tour.order.end(), rev.rbegin(), rev.rend());
  result.length = tour_length(inst, result.tour);
  return result;
}

// ---------------------------------------------------------------------------
// Portfolio specification

enum class SolverKind { nn2opt, greedy_oropt, rr2opt, anneal, external };

inline std::string_view to_string(SolverKind k) noexcept {
  switch (k) {
    case SolverKind::nn2opt: return "nn2opt";
    case SolverKind::greedy_oropt: return "greedy_oropt";
    case SolverKind::rr2opt: return "rr2opt";
    case SolverKind::anneal: return "anneal";
    case SolverKind::external: return "external";
  }
  return "external";
}

inline std::optional<SolverKind> parse_solver_kind(std::string_view s) noexcept {
  for (SolverKind k : {SolverKind::nn2opt, SolverKind::greedy_oropt, SolverKind::rr2opt, SolverKind::anneal,
                       SolverKind::external})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct SolverSpec {
  std::string id;
  SolverKind kind = SolverKind::nn2opt;
  std::map<std::string, double> params;
  /// kind == external: shell command with {instance_path} and {cutoff} placeholders.
  std::string command;

  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

/// Parameter defaults per kind. Unknown keys in a spec are rejected by solve().
inline std::map<std::string, double> default_solver_params(SolverKind k) {
  switch (k) {
    case SolverKind::nn2opt: return {{"neighbors", 10}, {"kick_segment", 10}};
    case SolverKind::greedy_oropt: return {{"neighbors", 10}, {"max_segment", 3}, {"kick_segment", 30}};
    case SolverKind::rr2opt: return {{"neighbors", 10}};
    case SolverKind::anneal:
      return {{"t0_factor", 0.1}, {"cooling", 0.999}, {"moves_per_step", 100}, {"freeze", 0.01}, {"neighbors", 10}};
    case SolverKind::external: return {};
  }
  return {};
}

/// The default four-solver portfolio.
inline std::vector<SolverSpec> default_portfolio() {
  return {{"anneal", SolverKind::anneal, {}, {}},
          {"greedy_oropt", SolverKind::greedy_oropt, {}, {}},
          {"nn2opt", SolverKind::nn2opt, {}, {}},
          {"rr2opt", SolverKind::rr2opt, {}, {}}};
}

struct Budget {
  double cutoff_s = 900.0;
  double target_length = 0.0;  ///< success iff best length <= target
  double cost_rate = 1e6;      ///< evaluated moves per virtual second
  bool wallclock = false;

  void validate() const {
    if (!(cutoff_s > 0.0)) throw ConfigError("cutoff must be positive");
    if (!(target_length >= 0.0)) throw ConfigError("target length must be non-negative");
    if (!wallclock && !(cost_rate > 0.0)) throw ConfigError("cost rate must be positive");
  }
};

struct TracePoint {
  double time_s = 0.0;
  double length = 0.0;
};

struct SolveOutcome {
  bool success = false;
  double time_s = 0.0;  ///< virtual seconds (deterministic) or wall seconds
  double best_length = std::numeric_limits<double>::infinity();
  Tour best_tour;
  std::uint64_t evaluated_moves = 0;
  std::vector<TracePoint> trace;  ///< every strict improvement of the best length
};

namespace detail {

struct Stop {};

class DistanceMatrix {
public:
  explicit DistanceMatrix(const Instance& inst) : n_(inst.size()), d_(n_ * n_) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) d_[i * n_ + j] = distance(inst.points[i], inst.points[j]);
  }
  double operator()(std::size_t a, std::size_t b) const noexcept { return d_[a * n_ + b]; }
  std::size_t size() const noexcept { return n_; }

private:
  std::size_t n_;
  std::vector<double> d_;
};

inline std::vector<std::vector<std::size_t>> neighbor_lists(const DistanceMatrix& d, std::size_t k) {
  const std::size_t n = d.size();
  k = std::min(k, n - 1);
  std::vector<std::vector<std::size_t>> lists(n);
  std::vector<std::size_t> idx(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto closer = [&](std::size_t x, std::size_t y) { return d(a, x) < d(a, y) || (d(a, x) == d(a, y) && x < y); };
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(a));
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
    lists[a].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    idx.resize(n);
  }
  return lists;
}

/// Shared bookkeeping for one run: move budget, best tour and stop signals.
class Search {
public:
  Search(const DistanceMatrix& d, const Budget& budget)
      : dist(d), budget_(budget), start_(std::chrono::steady_clock::now()) {
    const double units = std::floor(budget.cutoff_s * budget.cost_rate);
    limit_ = budget.wallclock ? std::numeric_limits<std::uint64_t>::max()
                              : static_cast<std::uint64_t>(std::max(1.0, std::min(units, 1.8e19)));
  }

  /// Accounts for `units` evaluated candidates; throws Stop when the budget is gone.
  void charge(std::uint64_t units = 1) {
    moves_ += units;
    if (moves_ >= limit_) throw Stop{};
    if (budget_.wallclock && (moves_ & 1023) < units && elapsed() >= budget_.cutoff_s) throw Stop{};
  }

  /// Offers a complete tour whose incrementally tracked length is `approx`.
  /// Recomputes the exact length for candidates that may beat the best.
  void offer(std::span<const std::size_t> order, double approx) {
    if (!(approx <= best_length * (1.0 + 1e-9))) return;
    const double exact = canonical_length(order, dist);
    if (exact < best_length) {
      best_length = exact;
      best.assign(order.begin(), order.end());
      trace.push_back({now(), exact});
      if (exact <= budget_.target_length) {
        success = true;
        success_time = now();
        throw Stop{};
      }
    }
  }

  double now() const {
    return budget_.wallclock ? elapsed() : static_cast<double>(moves_) / budget_.cost_rate;
  }
  std::uint64_t moves() const noexcept { return moves_; }

  const DistanceMatrix& dist;
  double best_length = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best;
  std::vector<TracePoint> trace;
  bool success = false;
  double success_time = 0.0;

private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  Budget budget_;
  std::uint64_t limit_ = 0;
  std::uint64_t moves_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// Array tour with position index and an incrementally maintained length.
class ArrayTour {
public:
  ArrayTour(std::vector<std::size_t> order, const DistanceMatrix& d) : order_(std::move(order)), pos_(order_.size()) {
    reindex();
    recompute(d);
  }

  std::size_t n() const noexcept { return order_.size(); }
  std::size_t at(std::size_t p) const noexcept { return order_[p]; }
  std::size_t pos(std::size_t city) const noexcept { return pos_[city]; }
  std::size_t succ(std::size_t city) const noexcept { return order_[(pos_[city] + 1) % order_.size()]; }
  std::size_t pred(std::size_t city) const noexcept {
    return order_[(pos_[city] + order_.size() - 1) % order_.size()];
  }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  double length = 0.0;

  void recompute(const DistanceMatrix& d) {
    length = 0.0;
    for (std::size_t i = 0; i < n(); ++i) length += d(order_[i], order_[(i + 1) % n()]);
  }

  /// Reverses the cyclic path of positions i..j (inclusive, walking forward),
  /// or the complementary path when that is shorter.
  void reverse_path(std::size_t i, std::size_t j) {
    const std::size_t size = n();
    std::size_t len = (j + size - i) % size + 1;
    if (2 * len > size) {
      const std::size_t ni = (j + 1) % size;
      const std::size_t nj = (i + size - 1) % size;
      i = ni;
      j = nj;
      len = size - len;
    }
    for (std::size_t k = 0; k < len / 2; ++k) {
      std::swap(order_[i], order_[j]);
      pos_[order_[i]] = i;
      pos_[order_[j]] = j;
      i = (i + 1) % size;
      j = (j + size - 1) % size;
    }
  }

  void assign(std::vector<std::size_t> order, const DistanceMatrix& d) {
    order_ = std::move(order);
    reindex();
    recompute(d);
  }

  /// Replaces the order without touching `length` (caller applies the delta).
  void reorder(std::vector<std::size_t> order) {
    order_ = std::move(order);
    reindex();
  }

private:
  void reindex() {
    for (std::size_t i = 0; i < order_.size(); ++i) pos_[order_[i]] = i;
  }

  std::vector<std::size_t> order_;
  std::vector<std::size_t> pos_;
};

inline std::vector<std::size_t> nearest_neighbor_tour(Search& s, std::size_t start) {
  const std::size_t n = s.dist.size();
  std::vector<char> used(n, 0);
  std::vector<std::size_t> order{start};
  used[start] = 1;
  std::size_t cur = start;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      s.charge();
      if (s.dist(cur, c) < best_d) {
        best_d = s.dist(cur, c);
        best = c;
      }
    }
    used[best] = 1;
    order.push_back(best);
    cur = best;
  }
  return order;
}

/// Greedy edge matching: shortest edges first, keeping degrees <= 2 and no
/// premature cycle; the resulting path fragments are closed into one tour.
inline std::vector<std::size_t> greedy_tour(Search& s) {
  const std::size_t n = s.dist.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  std::stable_sort(edges.begin(), edges.end(),
                   [&](const auto& x, const auto& y) { return s.dist(x.first, x.second) < s.dist(y.first, y.second); });

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::size_t> degree(n, 0);
  std::vector<std::vector<std::size_t>> adj(n);
  std::size_t added = 0;
  for (const auto& [a, b] : edges) {
    if (added == n - 1) break;
    s.charge();
    if (degree[a] >= 2 || degree[b] >= 2) continue;
    const std::size_t ra = find(a), rb = find(b);
    if (ra == rb) continue;
    parent[ra] = rb;
    ++degree[a];
    ++degree[b];
    adj[a].push_back(b);
    adj[b].push_back(a);
    ++added;
  }
  // n - 1 edges without cycles form a Hamiltonian path; walk it from an end.
  std::size_t cur = 0;
  while (degree[cur] != 1) ++cur;
  std::vector<std::size_t> order{cur};
  std::size_t prev = n;
  while (order.size() < n) {
    const std::size_t next = adj[cur][0] != prev ? adj[cur][0] : adj[cur][1];
    prev = cur;
    cur = next;
    order.push_back(cur);
  }
  return order;
}

inline std::vector<std::size_t> random_tour(Search& s, Rng& rng) {
  std::vector<std::size_t> order(s.dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  s.charge(order.size());
  rng.shuffle(std::span(order));
  return order;
}

/// Neighbour-list local search over 2-opt and (optionally) Or-opt moves.
/// First improvement; a queue of "dirty" cities plays the role of
/// don't-look bits. confirm() adds an exhaustive 2-opt scan so the result is
/// 2-opt optimal, not only optimal over the candidate lists.
class LocalSearch {
public:
  LocalSearch(const std::vector<std::vector<std::size_t>>& neighbors, double eps, std::size_t or_segment)
      : neighbors_(neighbors), eps_(eps), or_segment_(or_segment), queued_(neighbors.size(), 0) {}

  void mark(std::size_t city) {
    if (!queued_[city]) {
      queued_[city] = 1;
      queue_.push_back(city);
    }
  }
  void mark_all(const ArrayTour& t) {
    for (std::size_t p = 0; p < t.n(); ++p) mark(t.at(p));
  }

  /// Runs the candidate-list descent until the work queue is empty.
  void descend(Search& s, ArrayTour& t) {
    while (!queue_.empty()) {
      const std::size_t a = queue_.front();
      queue_.pop_front();
      queued_[a] = 0;
      if (two_opt_at(s, t, a) || (or_segment_ > 0 && or_opt_at(s, t, a))) mark(a);
    }
  }

  /// descend() plus exhaustive 2-opt scans until neither finds a move.
  void confirm(Search& s, ArrayTour& t) {
    descend(s, t);
    while (full_scan(s, t)) descend(s, t);
  }

private:
  bool two_opt_at(Search& s, ArrayTour& t, std::size_t a) {
    const auto& d = s.dist;
    for (int dir = 0; dir < 2; ++dir) {
      const std::size_t b = dir == 0 ? t.succ(a) : t.pred(a);
      const double d_ab = d(a, b);
      for (std::size_t c : neighbors_[a]) {
        s.charge();
        const double g = d_ab - d(a, c);
        if (g <= eps_) break;
        const std::size_t e = dir == 0 ? t.succ(c) : t.pred(c);
        if (c == b || e == a) continue;
        const double delta = d(a, c) + d(b, e) - d_ab - d(c, e);
        if (delta < -eps_) {
          if (dir == 0)
            t.reverse_path(t.pos(b), t.pos(c));
          else
            t.reverse_path(t.pos(a), t.pos(e));
          t.length += delta;
          mark(b);
          mark(c);
          mark(e);
          return true;
        }
      }
    }
    return false;
  }

  bool or_opt_at(Search& s, ArrayTour& t, std::size_t a) {
    const auto& d = s.dist;
    const std::size_t n = t.n();
    if (n < 6) return false;
    for (std::size_t len = 1; len <= or_segment_ && len + 3 <= n; ++len) {
      // Segments that start at a and that end at a.
      for (int anchor = 0; anchor < 2; ++anchor) {
        const std::size_t first_pos = anchor == 0 ? t.pos(a) : (t.pos(a) + n - (len - 1)) % n;
        const std::size_t first = t.at(first_pos);
        const std::size_t last = t.at((first_pos + len - 1) % n);
        const std::size_t p = t.at((first_pos + n - 1) % n);
        const std::size_t q = t.at((first_pos + len) % n);
        const double removal = d(p, first) + d(last, q) - d(p, q);
        if (removal <= eps_) continue;
        auto inside = [&](std::size_t city) { return (t.pos(city) + n - first_pos) % n < len; };
        for (std::size_t end : {first, last}) {
          for (std::size_t c : neighbors_[end]) {
            if (d(end, c) >= removal) break;
            if (inside(c)) continue;
            for (int side = 0; side < 2; ++side) {
              const std::size_t u = side == 0 ? c : t.pred(c);
              const std::size_t v = side == 0 ? t.succ(c) : c;
              if (inside(u) || inside(v)) continue;
              s.charge();
              const double keep = d(u, first) + d(last, v);
              const double flipped = d(u, last) + d(first, v);
              const double delta = std::min(keep, flipped) - d(u, v) - removal;
              if (delta < -eps_) {
                move_segment(t, first_pos, len, u, flipped < keep);
                t.length += delta;
                mark(p);
                mark(q);
                mark(u);
                mark(v);
                mark(first);
                mark(last);
                return true;
              }
            }
          }
        }
      }
    }
    return false;
  }

  static void move_segment(ArrayTour& t, std::size_t first_pos, std::size_t len, std::size_t after, bool reversed) {
    const std::size_t n = t.n();
    std::vector<std::size_t> segment(len);
    for (std::size_t m = 0; m < len; ++m) segment[m] = t.at((first_pos + m) % n);
    if (reversed) std::reverse(segment.begin(), segment.end());
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t m = 0; m < n - len; ++m) {
      const std::size_t city = t.at((first_pos + len + m) % n);
      order.push_back(city);
      if (city == after) order.insert(order.end(), segment.begin(), segment.end());
    }
    t.reorder(std::move(order));
  }

  bool full_scan(Search& s, ArrayTour& t) {
    const auto& d = s.dist;
    const std::size_t n = t.n();
    for (std::size_t i = 0; i + 2 < n; ++i) {
      const std::size_t a = t.at(i), b = t.at(i + 1);
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        s.charge();
        const std::size_t c = t.at(j), e = t.at((j + 1) % n);
        const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
        if (delta < -eps_) {
          t.reverse_path(i + 1, j);
          t.length += delta;
          mark(a);
          mark(b);
          mark(c);
          mark(e);
          return true;
        }
      }
    }
    return false;
  }

  const std::vector<std::vector<std::size_t>>& neighbors_;
  double eps_;
  std::size_t or_segment_;
  std::deque<std::size_t> queue_;
  std::vector<char> queued_;
};

/// Double bridge: swaps two adjacent random segments of length <= max_len.
/// Returns the cities whose tour neighbours changed.
inline std::vector<std::size_t> double_bridge(Search& s, ArrayTour& t, Rng& rng, std::size_t max_len) {
  const std::size_t n = t.n();
  max_len = std::max<std::size_t>(1, std::min(max_len, (n - 2) / 2));
  const std::size_t start = rng.below(n);
  const std::size_t l1 = 1 + rng.below(max_len);
  const std::size_t l2 = 1 + rng.below(max_len);
  s.charge();
  std::vector<std::size_t> seq(n);
  for (std::size_t k = 0; k < n; ++k) seq[k] = t.at((start + 1 + k) % n);
  std::vector<std::size_t> order;
  order.reserve(n);
  order.insert(order.end(), seq.begin() + static_cast<std::ptrdiff_t>(l1),
               seq.begin() + static_cast<std::ptrdiff_t>(l1 + l2));
  order.insert(order.end(), seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(l1));
  order.insert(order.end(), seq.begin() + static_cast<std::ptrdiff_t>(l1 + l2), seq.end());
  const std::vector<std::size_t> touched{seq[0], seq[l1 - 1], seq[l1], seq[l1 + l2 - 1], seq[(l1 + l2) % n],
                                         seq[n - 1]};
  t.assign(std::move(order), s.dist);
  return touched;
}

inline double tolerance_for(const Instance& inst) {
  double lo_x = inst.points[0].x, hi_x = lo_x, lo_y = inst.points[0].y, hi_y = lo_y;
  for (const Point& p : inst.points) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  return 1e-10 * std::max(1e-300, std::hypot(hi_x - lo_x, hi_y - lo_y));
}

/// Iterated local search: descend, kick the incumbent with a double bridge,
/// keep the result when it is no worse. Strict improvements are confirmed
/// 2-opt optimal before they are offered. Runs until the search throws Stop.
[[noreturn]] inline void iterated_local_search(Search& s, ArrayTour& t, Rng& rng, LocalSearch& ls,
                                               std::size_t kick_len, double eps) {
  ls.mark_all(t);
  ls.confirm(s, t);
  s.offer(t.order(), t.length);
  std::vector<std::size_t> incumbent = t.order();
  double incumbent_len = t.length;
  while (true) {
    if (t.n() < 8) {
      // Too small for a bridge kick: restart from a shuffled tour.
      std::vector<std::size_t> order = t.order();
      s.charge();
      rng.shuffle(std::span(order));
      t.assign(std::move(order), s.dist);
      ls.mark_all(t);
    } else {
      for (std::size_t c : double_bridge(s, t, rng, kick_len)) ls.mark(c);
    }
    ls.descend(s, t);
    if (t.length < incumbent_len - eps) {
      ls.confirm(s, t);
      s.offer(t.order(), t.length);
    }
    if (t.length <= incumbent_len + eps) {
      incumbent = t.order();
      incumbent_len = t.length;
    } else {
      t.assign(incumbent, s.dist);
      t.length = incumbent_len;
    }
  }
}

inline std::size_t int_param(const std::map<std::string, double>& p, const char* key, std::size_t min_value) {
  const double v = p.at(key);
  if (!(v >= static_cast<double>(min_value)) || v != std::floor(v))
    throw ParameterError(std::string("solver parameter '") + key + "' must be an integer >= " +
                         std::to_string(min_value));
  return static_cast<std::size_t>(v);
}

inline std::map<std::string, double> resolve_solver_params(const SolverSpec& spec) {
  auto params = default_solver_params(spec.kind);
  for (const auto& [k, v] : spec.params) {
    if (!params.contains(k)) throw ParameterError("unknown parameter '" + k + "' for solver " + spec.id);
    params[k] = v;
  }
  return params;
}

/// Nearest-neighbour construction from a random city, 2-opt, local kicks.
[[noreturn]] inline void run_nn2opt(Search& s, Rng& rng, const std::map<std::string, double>& p, double eps) {
  const auto nbrs = neighbor_lists(s.dist, int_param(p, "neighbors", 1));
  LocalSearch ls(nbrs, eps, 0);
  ArrayTour t(nearest_neighbor_tour(s, rng.below(s.dist.size())), s.dist);
  iterated_local_search(s, t, rng, ls, int_param(p, "kick_segment", 1), eps);
}

/// Greedy-edge construction, Or-opt plus 2-opt, wider kicks.
[[noreturn]] inline void run_greedy_oropt(Search& s, Rng& rng, const std::map<std::string, double>& p, double eps) {
  const auto nbrs = neighbor_lists(s.dist, int_param(p, "neighbors", 1));
  LocalSearch ls(nbrs, eps, int_param(p, "max_segment", 1));
  ArrayTour t(greedy_tour(s), s.dist);
  iterated_local_search(s, t, rng, ls, int_param(p, "kick_segment", 1), eps);
}

/// Random tour plus 2-opt, restarting from a fresh random tour at every
/// local optimum.
[[noreturn]] inline void run_rr2opt(Search& s, Rng& rng, const std::map<std::string, double>& p, double eps) {
  const auto nbrs = neighbor_lists(s.dist, int_param(p, "neighbors", 1));
  LocalSearch ls(nbrs, eps, 0);
  while (true) {
    ArrayTour t(random_tour(s, rng), s.dist);
    ls.mark_all(t);
    ls.descend(s, t);
    if (t.length < s.best_length * (1.0 + 1e-9)) ls.confirm(s, t);
    s.offer(t.order(), t.length);
  }
}

/// Simulated annealing over 2-opt moves drawn from the candidate lists,
/// geometric cooling every `moves_per_step` proposals. Below freeze * T0 the
/// walk is polished by local search and restarted from the best tour at T0.
[[noreturn]] inline void run_anneal(Search& s, Rng& rng, const std::map<std::string, double>& p, double eps) {
  const double t0_factor = p.at("t0_factor");
  const double cooling = p.at("cooling");
  const double freeze = p.at("freeze");
  const std::size_t per_step = int_param(p, "moves_per_step", 1);
  const std::size_t k = int_param(p, "neighbors", 1);
  if (!(t0_factor > 0.0) || !(cooling > 0.0 && cooling < 1.0) || !(freeze > 0.0 && freeze < 1.0))
    throw ParameterError("anneal needs t0_factor > 0 and cooling, freeze in (0, 1)");

  const std::size_t n = s.dist.size();
  const auto& d = s.dist;
  ArrayTour t(nearest_neighbor_tour(s, rng.below(n)), d);
  const double t0 = t0_factor * t.length / static_cast<double>(n);
  const auto nbrs = neighbor_lists(d, k);
  LocalSearch ls(nbrs, eps, 3);
  ls.mark_all(t);
  ls.confirm(s, t);
  s.offer(t.order(), t.length);
  if (n < 5) {
    while (true) s.charge();
  }

  double temperature = t0;
  std::size_t in_step = 0;
  while (true) {
    const std::size_t a = rng.below(n);
    const std::size_t c = nbrs[a][rng.below(nbrs[a].size())];
    const bool forward = rng.coin();
    s.charge();
    const std::size_t b = forward ? t.succ(a) : t.pred(a);
    const std::size_t e = forward ? t.succ(c) : t.pred(c);
    if (c != b && e != a) {
      const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
      if (delta < 0.0 || rng.uniform() < std::exp(-delta / temperature)) {
        if (forward)
          t.reverse_path(t.pos(b), t.pos(c));
        else
          t.reverse_path(t.pos(a), t.pos(e));
        t.length += delta;
      }
    }
    if (++in_step == per_step) {
      in_step = 0;
      temperature *= cooling;
      if (temperature < freeze * t0) {
        ls.mark_all(t);
        ls.confirm(s, t);
        s.offer(t.order(), t.length);
        t.assign(s.best, d);
        temperature = t0;
      }
    }
  }
}

}  // namespace detail

/// Runs one built-in solver. Deterministic mode: the outcome is a pure
/// function of (instance, spec, budget, seed). External solvers go through
/// solve_external() (see external.hpp).
inline SolveOutcome solve_builtin(const Instance& inst, const SolverSpec& spec, const Budget& budget,
                                  std::uint64_t seed) {
  budget.validate();
  if (spec.kind == SolverKind::external) throw ConfigError("solver " + spec.id + " is external");
  validate_points(inst.points);
  const auto params = detail::resolve_solver_params(spec);
  const detail::DistanceMatrix dist(inst);
  detail::Search search(dist, budget);
  Rng rng(seed);
  const double eps = detail::tolerance_for(inst);
  try {
    switch (spec.kind) {
      case SolverKind::nn2opt: detail::run_nn2opt(search, rng, params, eps);
      case SolverKind::greedy_oropt: detail::run_greedy_oropt(search, rng, params, eps);
      case SolverKind::rr2opt: detail::run_rr2opt(search, rng, params, eps);
      case SolverKind::anneal: detail::run_anneal(search, rng, params, eps);
      case SolverKind::external: break;
    }
  } catch (const detail::Stop&) {
  }
  SolveOutcome out;
  out.success = search.success;
  out.time_s = search.success ? search.success_time : budget.cutoff_s;
  out.best_length = search.best_length;
  out.best_tour.order = search.best;
  out.evaluated_moves = search.moves();
  out.trace = std::move(search.trace);
  return out;
}

}  // namespace tspsel
