#pragma once

// Instance -> density-map image, plus the label-safe augmentations
// (axis mirrors and rotations about the centroid).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tspsel/error.hpp"
#include "tspsel/instances.hpp"
#include "tspsel/random.hpp"

namespace tspsel {

enum class NormalizeMode { isotropic, per_axis };

/// Square grid of counts, row-major; row index grows with y.
struct Image {
  std::size_t side = 0;
  std::vector<std::uint32_t> pixels;

  Image() = default;
  explicit Image(std::size_t s) : side(s), pixels(s * s, 0) {}

  std::uint32_t& at(std::size_t row, std::size_t col) { return pixels[row * side + col]; }
  std::uint32_t at(std::size_t row, std::size_t col) const { return pixels[row * side + col]; }

  std::uint64_t sum() const { return std::accumulate(pixels.begin(), pixels.end(), std::uint64_t{0}); }
  std::uint32_t max() const { return pixels.empty() ? 0 : *std::max_element(pixels.begin(), pixels.end()); }

  friend bool operator==(const Image&, const Image&) = default;
};

struct DensityMap {
  Image image;
  std::size_t n = 0;  ///< number of rasterized points; equals image.sum()

  std::size_t side() const noexcept { return image.side; }
};

struct RasterConfig {
  std::size_t c = 64;
  std::size_t upscale_factor = 4;
  NormalizeMode normalize_mode = NormalizeMode::isotropic;

  std::size_t image_side() const noexcept { return c * upscale_factor; }

  void validate() const {
    if (c < 2) throw ConfigError("raster grid needs at least 2 cells per side");
    if (upscale_factor < 1) throw ConfigError("upscale factor must be at least 1");
  }
};

struct AugmentConfig {
  bool flip_enabled = false;
  std::size_t d = 0;  ///< rotation directions; 0 disables rotation

  bool enabled() const noexcept { return flip_enabled || d > 0; }
};

/// Rescales into [0,1]^2. Isotropic mode divides both axes by the larger range
/// and centres the shorter axis; per-axis mode is classic min-max per axis
/// (an axis with zero range maps to 0.5).
inline std::vector<Point> normalize(std::span<const Point> points, NormalizeMode mode = NormalizeMode::isotropic) {
  if (points.empty()) throw DegenerateInputError("cannot normalize an empty point set");
  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const Point& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double rx = max_x - min_x;
  const double ry = max_y - min_y;
  if (!(rx > 0.0) && !(ry > 0.0)) throw DegenerateInputError("all points are identical");

  std::vector<Point> out(points.size());
  if (mode == NormalizeMode::isotropic) {
    const double range = std::max(rx, ry);
    const double off_x = 0.5 * (1.0 - rx / range);
    const double off_y = 0.5 * (1.0 - ry / range);
    for (std::size_t i = 0; i < points.size(); ++i) {
      out[i].x = std::clamp((points[i].x - min_x) / range + off_x, 0.0, 1.0);
      out[i].y = std::clamp((points[i].y - min_y) / range + off_y, 0.0, 1.0);
    }
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) {
      out[i].x = rx > 0.0 ? (points[i].x - min_x) / rx : 0.5;
      out[i].y = ry > 0.0 ? (points[i].y - min_y) / ry : 0.5;
    }
  }
  return out;
}

/// Counts points per cell of a c x c grid over [0,1]^2. Cell index per axis is
/// min(floor(coord * c), c - 1).
inline DensityMap rasterize(std::span<const Point> points, std::size_t c) {
  if (c < 2) throw DomainError("raster grid needs at least 2 cells per side");
  DensityMap map{Image(c), points.size()};
  const double cells = static_cast<double>(c);
  auto cell = [&](double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("coordinate outside [0, 1]: " + format_real(v));
    return std::min(static_cast<std::size_t>(v * cells), c - 1);
  };
  for (const Point& p : points) {
    const std::size_t col = cell(p.x);
    const std::size_t row = cell(p.y);
    ++map.image.at(row, col);
  }
  return map;
}

/// Nearest-neighbour up-scaling: every pixel becomes a k x k block.
inline Image upscale(const Image& src, std::size_t k) {
  if (k < 1) throw DomainError("upscale factor must be at least 1");
  if (k == 1) return src;
  Image out(src.side * k);
  for (std::size_t r = 0; r < out.side; ++r)
    for (std::size_t col = 0; col < out.side; ++col) out.at(r, col) = src.at(r / k, col / k);
  return out;
}

inline Image upscale(const DensityMap& map, std::size_t k) { return upscale(map.image, k); }

enum class FlipAxis { horizontal, vertical };

/// Mirror inside the unit square: horizontal maps x to 1 - x, vertical maps y
/// to 1 - y. Exact (and an exact involution) for coordinates on the 2^-53
/// lattice, which includes every generated instance.
inline std::vector<Point> flip(std::span<const Point> points, FlipAxis axis) {
  std::vector<Point> out(points.begin(), points.end());
  for (Point& p : out) {
    if (axis == FlipAxis::horizontal)
      p.x = 1.0 - p.x;
    else
      p.y = 1.0 - p.y;
  }
  return out;
}

/// Rigid rotation about the centroid of the raw coordinates, then normalize.
inline std::vector<Point> rotate(std::span<const Point> points, double angle,
                                 NormalizeMode mode = NormalizeMode::isotropic) {
  if (points.size() < 2) throw DegenerateInputError("rotation needs at least two points");
  double cx = 0.0, cy = 0.0;
  for (const Point& p : points) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(points.size());
  cy /= static_cast<double>(points.size());
  const double cs = std::cos(angle), sn = std::sin(angle);
  std::vector<Point> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dx = points[i].x - cx;
    const double dy = points[i].y - cy;
    out[i] = {cx + cs * dx - sn * dy, cy + sn * dx + cs * dy};
  }
  return normalize(out, mode);
}

/// Draw made by augment(); exposed so callers can replay or inspect it.
struct AugmentDraw {
  std::size_t rotation_steps = 0;  ///< angle = steps * 2*pi / d; 0 when rotation is off
  bool flip_horizontal = false;
  bool flip_vertical = false;
};

inline AugmentDraw draw_augmentation(const AugmentConfig& ac, Rng& rng) {
  AugmentDraw draw;
  if (ac.d > 0) draw.rotation_steps = 1 + static_cast<std::size_t>(rng.below(ac.d));
  if (ac.flip_enabled) {
    draw.flip_horizontal = rng.coin();
    draw.flip_vertical = rng.coin();
  }
  return draw;
}

/// Normalized point set after applying `draw`: normalize, mirror, rotate.
inline std::vector<Point> transform_points(std::span<const Point> raw, const AugmentDraw& draw, std::size_t d,
                                           NormalizeMode mode) {
  std::vector<Point> pts = normalize(raw, mode);
  if (draw.flip_horizontal) pts = flip(pts, FlipAxis::horizontal);
  if (draw.flip_vertical) pts = flip(pts, FlipAxis::vertical);
  if (draw.rotation_steps > 0 && d > 0) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(draw.rotation_steps) / static_cast<double>(d);
    pts = rotate(pts, angle, mode);
  }
  return pts;
}

/// The un-augmented pipeline: normalize, rasterize, upscale.
inline Image render(std::span<const Point> raw, const RasterConfig& rc) {
  rc.validate();
  const auto pts = normalize(raw, rc.normalize_mode);
  return upscale(rasterize(pts, rc.c), rc.upscale_factor);
}

/// Randomly mirrored and rotated image of `inst`. With augmentation disabled
/// the result equals render(inst.points, rc).
inline Image augment(const Instance& inst, const RasterConfig& rc, const AugmentConfig& ac, Rng& rng) {
  rc.validate();
  const AugmentDraw draw = draw_augmentation(ac, rng);
  const auto pts = transform_points(inst.points, draw, ac.d, rc.normalize_mode);
  return upscale(rasterize(pts, rc.c), rc.upscale_factor);
}

/// CNN input scaling: divide by the image maximum (all-zero stays zero).
inline std::vector<double> to_input(const Image& image) {
  std::vector<double> out(image.pixels.size(), 0.0);
  const double peak = image.max();
  if (peak <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image.pixels[i] / peak;
  return out;
}

/// Binary PGM (P5). maxval = min(image max, 255), at least 1; values above
/// maxval are clamped in the file only. Rows are written top (high y) first.
inline void write_pgm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint32_t maxval = std::max<std::uint32_t>(1, std::min<std::uint32_t>(image.max(), 255));
  out << "P5\n" << image.side << ' ' << image.side << '\n' << maxval << '\n';
  std::vector<char> row(image.side);
  for (std::size_t r = image.side; r-- > 0;) {
    for (std::size_t c = 0; c < image.side; ++c)
      row[c] = static_cast<char>(static_cast<unsigned char>(std::min(image.at(r, c), maxval)));
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed to write " + path.string());
}

inline nlohmann::json pgm_sidecar(const std::string& id, const RasterConfig& rc, std::size_t n, const Image& image) {
  return {{"id", id}, {"c", rc.c}, {"k", rc.upscale_factor}, {"n", n}, {"sum", image.sum()}};
}

}  // namespace tspsel
