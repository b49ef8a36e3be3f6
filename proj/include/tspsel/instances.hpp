#pragma once

// Euclidean TSP instances: the six generator families and a TSPLIB subset.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tspsel/error.hpp"
#include "tspsel/random.hpp"

namespace tspsel {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

enum class Family { rue, explosion, implosion, expansion, cluster, grid, unknown };

inline constexpr std::array<Family, 6> kGeneratedFamilies = {
    Family::rue, Family::explosion, Family::implosion, Family::expansion, Family::cluster, Family::grid};

inline std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::rue: return "rue";
    case Family::explosion: return "explosion";
    case Family::implosion: return "implosion";
    case Family::expansion: return "expansion";
    case Family::cluster: return "cluster";
    case Family::grid: return "grid";
    case Family::unknown: break;
  }
  return "unknown";
}

/// Parses a family tag; "portgen" is accepted as an alias of rue.
inline std::optional<Family> parse_family(std::string_view tag) noexcept {
  if (tag == "portgen") return Family::rue;
  for (Family f : kGeneratedFamilies)
    if (to_string(f) == tag) return f;
  if (tag == "unknown") return Family::unknown;
  return std::nullopt;
}

struct Instance {
  std::string id;
  Family family = Family::unknown;
  std::vector<Point> points;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return points.size(); }

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Throws DegenerateInputError unless points are finite, n >= 3 and not all equal.
inline void validate_points(const std::vector<Point>& points) {
  if (points.size() < 3) throw DegenerateInputError("instance needs at least 3 points");
  for (const Point& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateInputError("non-finite coordinate");
  const bool all_same = std::all_of(points.begin(), points.end(), [&](const Point& p) { return p == points.front(); });
  if (all_same) throw DegenerateInputError("all points coincide");
}

struct GenSpec {
  Family family = Family::rue;
  std::size_t count = 1;
  std::size_t n_min = 50;
  std::size_t n_max = 200;
  std::uint64_t seed = 0;
  /// Overrides for the family defaults returned by default_family_params().
  std::map<std::string, double> family_params;
};

/// Default point-process parameters per family.
inline std::map<std::string, double> default_family_params(Family f) {
  switch (f) {
    case Family::explosion: return {{"radius", 0.25}, {"mean_shift", 0.1}};
    case Family::implosion: return {{"radius", 0.3}, {"lambda", 0.3}};
    case Family::expansion: return {{"segment_length", 0.6}, {"half_width", 0.1}, {"mean_shift", 0.15}};
    case Family::cluster: return {{"k_min", 3}, {"k_max", 8}, {"sigma", 0.03}};
    case Family::grid: return {{"jitter", 0.1}};
    case Family::rue:
    case Family::unknown: break;
  }
  return {};
}

namespace detail {

inline constexpr double kBelowOne = 1.0 - 0x1.0p-53;

/// Rounds to the 2^-53 lattice inside [0, 1). On this lattice 1 - x is exact,
/// so axis mirrors of generated instances are exact isometries.
inline double snap_unit(double v) {
  v = std::ldexp(std::nearbyint(std::ldexp(v, 53)), -53);
  return std::clamp(v, 0.0, kBelowOne);
}

/// Folds a coordinate back into [0, 1) by mirror reflection at the borders.
inline double reflect_unit(double v) {
  v = std::fmod(std::fabs(v), 2.0);
  if (v >= 1.0) v = 2.0 - v;
  return snap_unit(v);
}

inline std::vector<Point> uniform_points(Rng& rng, std::size_t n) {
  std::vector<Point> pts(n);
  for (Point& p : pts) {
    p.x = rng.uniform();
    p.y = rng.uniform();
  }
  return pts;
}

inline void explode(Rng& rng, std::vector<Point>& pts, double radius, double mean_shift) {
  const Point c{rng.uniform(), rng.uniform()};
  for (Point& p : pts) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    const double r = std::hypot(dx, dy);
    if (r >= radius) continue;
    double ux = 1.0, uy = 0.0;
    if (r > 0.0) {
      ux = dx / r;
      uy = dy / r;
    }
    const double target = radius + rng.exponential(mean_shift);
    p.x = reflect_unit(c.x + ux * target);
    p.y = reflect_unit(c.y + uy * target);
  }
}

inline void implode(Rng& rng, std::vector<Point>& pts, double radius, double lambda) {
  const Point c{rng.uniform(), rng.uniform()};
  for (Point& p : pts) {
    if (distance(p, c) >= radius) continue;
    p.x = snap_unit(c.x + lambda * (p.x - c.x));
    p.y = snap_unit(c.y + lambda * (p.y - c.y));
  }
}

inline void expand(Rng& rng, std::vector<Point>& pts, double length, double half_width, double mean_shift) {
  const Point c{rng.uniform(), rng.uniform()};
  const double angle = rng.uniform() * std::numbers::pi;
  const double ux = std::cos(angle), uy = std::sin(angle);
  const double vx = -uy, vy = ux;
  for (Point& p : pts) {
    const double s = (p.x - c.x) * ux + (p.y - c.y) * uy;
    const double h = (p.x - c.x) * vx + (p.y - c.y) * vy;
    if (std::fabs(s) > 0.5 * length || std::fabs(h) >= half_width) continue;
    const double side = h < 0.0 ? -1.0 : 1.0;
    const double pushed = side * (half_width + rng.exponential(mean_shift));
    p.x = reflect_unit(c.x + s * ux + pushed * vx);
    p.y = reflect_unit(c.y + s * uy + pushed * vy);
  }
}

inline std::vector<Point> cluster_points(Rng& rng, std::size_t n, std::int64_t k_min, std::int64_t k_max, double sigma) {
  const auto k = static_cast<std::size_t>(rng.between(k_min, k_max));
  std::vector<Point> centers = uniform_points(rng, k);
  std::vector<Point> pts(n);
  for (Point& p : pts) {
    const Point& c = centers[rng.below(k)];
    do {
      p.x = c.x + sigma * rng.normal();
      p.y = c.y + sigma * rng.normal();
    } while (p.x < 0.0 || p.x >= 1.0 || p.y < 0.0 || p.y >= 1.0);
    p.x = snap_unit(p.x);
    p.y = snap_unit(p.y);
  }
  return pts;
}

inline std::vector<Point> grid_points(Rng& rng, std::size_t n, double jitter) {
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<std::size_t> cells(side * side);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  // Partial Fisher-Yates: the first n cells are a uniform sample without replacement.
  for (std::size_t i = 0; i < n; ++i) std::swap(cells[i], cells[i + rng.below(cells.size() - i)]);
  const double step = 1.0 / static_cast<double>(side);
  const double j = jitter * step;
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double gx = (static_cast<double>(cells[i] % side) + 0.5) * step;
    const double gy = (static_cast<double>(cells[i] / side) + 0.5) * step;
    pts[i].x = snap_unit(gx + rng.uniform(-j, j));
    pts[i].y = snap_unit(gy + rng.uniform(-j, j));
  }
  return pts;
}

inline std::map<std::string, double> resolve_params(const GenSpec& spec) {
  auto params = default_family_params(spec.family);
  for (const auto& [key, value] : spec.family_params) {
    if (!params.contains(key))
      throw ParameterError("unknown parameter '" + key + "' for family " + std::string(to_string(spec.family)));
    if (!std::isfinite(value)) throw ParameterError("parameter '" + key + "' is not finite");
    params[key] = value;
  }
  auto positive = [&](const char* key) {
    if (!(params.at(key) > 0.0)) throw ParameterError(std::string("parameter '") + key + "' must be positive");
  };
  switch (spec.family) {
    case Family::explosion:
      positive("radius");
      positive("mean_shift");
      break;
    case Family::implosion:
      positive("radius");
      if (!(params.at("lambda") > 0.0 && params.at("lambda") < 1.0))
        throw ParameterError("parameter 'lambda' must lie in (0, 1)");
      break;
    case Family::expansion:
      positive("segment_length");
      positive("half_width");
      positive("mean_shift");
      break;
    case Family::cluster:
      positive("sigma");
      if (params.at("k_min") < 1.0 || params.at("k_max") < params.at("k_min") ||
          params.at("k_min") != std::floor(params.at("k_min")) || params.at("k_max") != std::floor(params.at("k_max")))
        throw ParameterError("cluster count bounds must be integers with 1 <= k_min <= k_max");
      break;
    case Family::grid:
      if (params.at("jitter") < 0.0 || params.at("jitter") > 0.5)
        throw ParameterError("parameter 'jitter' must lie in [0, 0.5]");
      break;
    case Family::rue: break;
    case Family::unknown: throw SpecError("cannot generate instances of family 'unknown'");
  }
  return params;
}

}  // namespace detail

/// Identifier of the i-th instance generated by `spec`.
inline std::string instance_id(Family family, std::uint64_t seed, std::size_t index) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s-s%llu-%05zu", std::string(to_string(family)).c_str(),
                static_cast<unsigned long long>(seed), index);
  return buf;
}

/// Generates `spec.count` instances. Pure: the result depends only on `spec`.
/// Instance i draws from the stream derive_seed(spec.seed, {family, i}).
inline std::vector<Instance> generate(const GenSpec& spec) {
  if (spec.count < 1) throw SpecError("count must be at least 1");
  if (spec.n_min < 3) throw SpecError("n_min must be at least 3");
  if (spec.n_max < spec.n_min) throw SpecError("n_max must not be smaller than n_min");
  const auto params = detail::resolve_params(spec);

  std::vector<Instance> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Instance inst;
    inst.id = instance_id(spec.family, spec.seed, i);
    inst.family = spec.family;
    inst.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.family), i});
    Rng rng(inst.seed);
    const auto n = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(spec.n_min), static_cast<std::int64_t>(spec.n_max)));

    switch (spec.family) {
      case Family::rue: inst.points = detail::uniform_points(rng, n); break;
      case Family::explosion:
        inst.points = detail::uniform_points(rng, n);
        detail::explode(rng, inst.points, params.at("radius"), params.at("mean_shift"));
        break;
      case Family::implosion:
        inst.points = detail::uniform_points(rng, n);
        detail::implode(rng, inst.points, params.at("radius"), params.at("lambda"));
        break;
      case Family::expansion:
        inst.points = detail::uniform_points(rng, n);
        detail::expand(rng, inst.points, params.at("segment_length"), params.at("half_width"), params.at("mean_shift"));
        break;
      case Family::cluster:
        inst.points = detail::cluster_points(rng, n, static_cast<std::int64_t>(params.at("k_min")),
                                             static_cast<std::int64_t>(params.at("k_max")), params.at("sigma"));
        break;
      case Family::grid: inst.points = detail::grid_points(rng, n, params.at("jitter")); break;
      case Family::unknown: break;
    }
    validate_points(inst.points);
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TSPLIB subset: NAME, COMMENT, TYPE: TSP, DIMENSION, EDGE_WEIGHT_TYPE: EUC_2D,
// NODE_COORD_SECTION, EOF.

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_tsplib(const Instance& inst, std::ostream& out) {
  out << "NAME: " << inst.id << '\n'
      << "COMMENT: family=" << to_string(inst.family) << " seed=" << inst.seed << '\n'
      << "TYPE: TSP\n"
      << "DIMENSION: " << inst.points.size() << '\n'
      << "EDGE_WEIGHT_TYPE: EUC_2D\n"
      << "NODE_COORD_SECTION\n";
  for (std::size_t i = 0; i < inst.points.size(); ++i)
    out << (i + 1) << ' ' << format_real(inst.points[i].x) << ' ' << format_real(inst.points[i].y) << '\n';
  out << "EOF\n";
  if (!out) throw IoError("failed to write instance " + inst.id);
}

inline void write_tsplib(const Instance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tsplib(inst, out);
  out.close();
  if (!out) throw IoError("failed to write " + path.string());
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view text, T& value) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc{} && ptr == end;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) parts.push_back(s.substr(i, j - i));
    i = j;
  }
  return parts;
}

}  // namespace detail

/// Parses the supported TSPLIB subset. The family comes from a COMMENT line of
/// the form "family=<tag> seed=<u64>" and defaults to unknown.
inline Instance read_tsplib(std::istream& in, std::string fallback_name = "instance") {
  Instance inst;
  inst.id = std::move(fallback_name);
  std::optional<std::size_t> dimension;
  bool have_weight_type = false;
  bool in_coords = false;
  std::vector<std::optional<Point>> coords;
  std::size_t coord_lines = 0;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line == "EOF") break;

    if (in_coords) {
      const auto parts = detail::split_ws(line);
      std::size_t index = 0;
      Point p;
      if (parts.size() == 3 && detail::parse_number(parts[0], index)) {
        if (!detail::parse_number(parts[1], p.x) || !detail::parse_number(parts[2], p.y))
          throw ParseError("non-numeric coordinate", line_no);
        if (index < 1 || index > coords.size()) throw ParseError("node index out of range", line_no);
        if (coords[index - 1]) throw ParseError("duplicate node index " + std::to_string(index), line_no);
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ParseError("non-finite coordinate", line_no);
        coords[index - 1] = p;
        ++coord_lines;
        continue;
      }
      if (parts.size() == 3) throw ParseError("non-numeric node index", line_no);
      if (line.find(':') == std::string_view::npos && line.find("_SECTION") == std::string_view::npos)
        throw ParseError("malformed coordinate line", line_no);
      in_coords = false;  // another keyword follows the coordinates
    }

    if (line == "NODE_COORD_SECTION") {
      if (!dimension) throw ParseError("NODE_COORD_SECTION before DIMENSION", line_no);
      if (!have_weight_type) throw ParseError("NODE_COORD_SECTION before EDGE_WEIGHT_TYPE", line_no);
      coords.assign(*dimension, std::nullopt);
      in_coords = true;
      continue;
    }
    if (line.ends_with("_SECTION")) throw ParseError("unsupported section " + std::string(line), line_no);

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError("expected KEY: VALUE", line_no);
    const auto key = detail::trim(line.substr(0, colon));
    const auto value = detail::trim(line.substr(colon + 1));
    if (key == "NAME") {
      inst.id = std::string(value);
    } else if (key == "COMMENT") {
      for (auto token : detail::split_ws(value)) {
        if (token.starts_with("family=")) {
          if (auto f = parse_family(token.substr(7))) inst.family = *f;
        } else if (token.starts_with("seed=")) {
          std::uint64_t s = 0;
          if (detail::parse_number(token.substr(5), s)) inst.seed = s;
        }
      }
    } else if (key == "TYPE") {
      if (value != "TSP") throw ParseError("unsupported TYPE " + std::string(value), line_no);
    } else if (key == "DIMENSION") {
      std::size_t d = 0;
      if (!detail::parse_number(value, d)) throw ParseError("non-numeric DIMENSION", line_no);
      if (d < 3) throw ParseError("DIMENSION must be at least 3", line_no);
      dimension = d;
    } else if (key == "EDGE_WEIGHT_TYPE") {
      if (value != "EUC_2D") throw ParseError("unsupported EDGE_WEIGHT_TYPE " + std::string(value), line_no);
      have_weight_type = true;
    }
    // Other keywords (CAPACITY, DISPLAY_DATA_TYPE, ...) carry no geometry and are ignored.
  }

  if (!dimension) throw ParseError("missing DIMENSION", 0);
  if (!have_weight_type) throw ParseError("missing EDGE_WEIGHT_TYPE", 0);
  if (coords.empty()) throw ParseError("missing NODE_COORD_SECTION", 0);
  if (coord_lines != *dimension)
    throw ParseError("expected " + std::to_string(*dimension) + " coordinates, found " + std::to_string(coord_lines),
                     line_no);
  inst.points.reserve(coords.size());
  for (const auto& c : coords) inst.points.push_back(*c);
  validate_points(inst.points);
  return inst;
}

inline Instance read_tsplib(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tsplib(in, path.stem().string());
}

}  // namespace tspsel
