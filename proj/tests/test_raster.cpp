#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "tspsel/raster.hpp"
#include "tspsel/solvers.hpp"

using namespace tspsel;

namespace {

void expect_points_near(const std::vector<Point>& a, const std::vector<Point>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].x, b[i].x, tol) << i;
    EXPECT_NEAR(a[i].y, b[i].y, tol) << i;
  }
}

Instance make_instance(Family f, std::size_t n, std::uint64_t seed) {
  GenSpec s;
  s.family = f;
  s.n_min = s.n_max = n;
  s.seed = seed;
  return generate(s)[0];
}

Image image_of(std::size_t side, std::vector<std::uint32_t> px) {
  Image img(side);
  img.pixels = std::move(px);
  return img;
}

}  // namespace

TEST(Normalize, Examples) {
  const std::vector<Point> diag{{2, 2}, {4, 4}};
  expect_points_near(normalize(diag), {{0, 0}, {1, 1}}, 0.0);
  const std::vector<Point> wide{{0, 0}, {2, 1}};
  expect_points_near(normalize(wide), {{0, 0.25}, {1, 0.75}}, 0.0);
  expect_points_near(normalize(wide, NormalizeMode::per_axis), {{0, 0}, {1, 1}}, 0.0);
}

TEST(Normalize, DegenerateInput) {
  const std::vector<Point> same{{1, 1}, {1, 1}};
  EXPECT_THROW(normalize(same), DegenerateInputError);
  EXPECT_THROW(normalize(std::vector<Point>{}), DegenerateInputError);
  const std::vector<Point> flat{{0, 3}, {2, 3}};
  expect_points_near(normalize(flat, NormalizeMode::per_axis), {{0, 0.5}, {1, 0.5}}, 0.0);
}

TEST(Normalize, OutputInUnitSquare) {
  for (Family f : kGeneratedFamilies) {
    const auto inst = make_instance(f, 80, 4);
    for (auto mode : {NormalizeMode::isotropic, NormalizeMode::per_axis})
      for (const Point& p : normalize(inst.points, mode)) {
        EXPECT_TRUE(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0);
      }
  }
}

TEST(Rasterize, Examples) {
  const std::vector<Point> one{{0.1, 0.1}};
  EXPECT_EQ(rasterize(one, 2).image.pixels, (std::vector<std::uint32_t>{1, 0, 0, 0}));
  const std::vector<Point> corners{{0, 0}, {1, 1}};
  EXPECT_EQ(rasterize(corners, 2).image.pixels, (std::vector<std::uint32_t>{1, 0, 0, 1}));
  // Row index grows with y.
  const std::vector<Point> high{{0.1, 0.9}};
  EXPECT_EQ(rasterize(high, 2).image.at(1, 0), 1u);
}

TEST(Rasterize, Conservation) {
  const auto inst = make_instance(Family::rue, 500, 1);
  const auto map = rasterize(normalize(inst.points), 64);
  EXPECT_EQ(map.image.sum(), 500u);
  EXPECT_EQ(map.n, 500u);
}

TEST(Rasterize, Errors) {
  const std::vector<Point> outside{{1.5, 0.1}};
  EXPECT_THROW(rasterize(outside, 2), DomainError);
  const std::vector<Point> ok{{0.5, 0.5}};
  EXPECT_THROW(rasterize(ok, 1), DomainError);
}

TEST(Upscale, Examples) {
  const auto src = image_of(2, {1, 0, 0, 2});
  EXPECT_EQ(upscale(src, 1), src);
  const auto big = upscale(src, 2);
  EXPECT_EQ(big.pixels, (std::vector<std::uint32_t>{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 2, 2, 0, 0, 2, 2}));
  EXPECT_EQ(upscale(Image(64), 4).side, 256u);
  EXPECT_THROW(upscale(src, 0), DomainError);
}

TEST(Upscale, ConservationScalesByKSquared) {
  const auto inst = make_instance(Family::cluster, 120, 3);
  const auto map = rasterize(normalize(inst.points), 16);
  for (std::size_t k : {1u, 2u, 3u, 4u}) EXPECT_EQ(upscale(map, k).sum(), k * k * 120);
}

TEST(Flip, MirrorAndInvolution) {
  const std::vector<Point> p{{0.2, 0.5}};
  EXPECT_EQ(flip(p, FlipAxis::horizontal)[0], (Point{0.8, 0.5}));
  EXPECT_EQ(flip(p, FlipAxis::vertical)[0], (Point{0.2, 0.5}));
  const auto inst = make_instance(Family::expansion, 100, 5);
  for (auto axis : {FlipAxis::horizontal, FlipAxis::vertical})
    EXPECT_EQ(flip(flip(inst.points, axis), axis), inst.points);
}

TEST(Flip, ExactIsometry) {
  const auto inst = make_instance(Family::rue, 60, 6);
  const auto f = flip(inst.points, FlipAxis::horizontal);
  for (std::size_t a = 0; a < f.size(); ++a)
    for (std::size_t b = 0; b < f.size(); ++b)
      ASSERT_EQ(distance(f[a], f[b]), distance(inst.points[a], inst.points[b]));
}

TEST(Rotate, Examples) {
  const std::vector<Point> seg{{0, 0}, {1, 0}};
  expect_points_near(rotate(seg, std::numbers::pi / 2), {{0.5, 0}, {0.5, 1}}, 1e-12);
  const auto inst = make_instance(Family::implosion, 70, 7);
  expect_points_near(rotate(inst.points, 2 * std::numbers::pi), normalize(inst.points), 1e-12);
  auto pts = normalize(inst.points);
  for (int i = 0; i < 4; ++i) pts = rotate(pts, std::numbers::pi / 2);
  expect_points_near(pts, normalize(inst.points), 1e-12);
  EXPECT_THROW(rotate(std::vector<Point>{{1, 1}}, 1.0), DegenerateInputError);
  EXPECT_THROW(rotate(std::vector<Point>{{1, 1}, {1, 1}}, 1.0), DegenerateInputError);
}

TEST(Rotate, PreservesDistanceRatios) {
  const auto inst = make_instance(Family::grid, 50, 8);
  const auto r = rotate(inst.points, 0.7);
  const double scale = distance(r[0], r[1]) / distance(inst.points[0], inst.points[1]);
  for (std::size_t a = 0; a < r.size(); ++a)
    for (std::size_t b = a + 1; b < r.size(); ++b) {
      const double orig = distance(inst.points[a], inst.points[b]);
      EXPECT_NEAR(distance(r[a], r[b]), scale * orig, 1e-9 * scale * orig);
    }
}

TEST(Augment, DisabledEqualsPlainPipeline) {
  const auto inst = make_instance(Family::rue, 90, 9);
  const RasterConfig rc{32, 2, NormalizeMode::isotropic};
  Rng rng(1);
  EXPECT_EQ(augment(inst, rc, AugmentConfig{}, rng), render(inst.points, rc));
}

TEST(Augment, RotationStepsAreMultiplesOfTwoPiOverD) {
  Rng rng(3);
  std::set<std::size_t> steps;
  for (int i = 0; i < 500; ++i) {
    const auto draw = draw_augmentation(AugmentConfig{false, 7}, rng);
    ASSERT_GE(draw.rotation_steps, 1u);
    ASSERT_LE(draw.rotation_steps, 7u);
    steps.insert(draw.rotation_steps);
  }
  EXPECT_EQ(steps.size(), 7u);
}

TEST(Augment, FlipsAreIndependentCoins) {
  Rng rng(4);
  int h = 0, v = 0, both = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto d = draw_augmentation(AugmentConfig{true, 0}, rng);
    EXPECT_EQ(d.rotation_steps, 0u);
    h += d.flip_horizontal;
    v += d.flip_vertical;
    both += d.flip_horizontal && d.flip_vertical;
  }
  EXPECT_NEAR(h, 2000, 150);
  EXPECT_NEAR(v, 2000, 150);
  EXPECT_NEAR(both, 1000, 120);
}

TEST(Augment, ConservationAndDeterminism) {
  const auto inst = make_instance(Family::explosion, 150, 10);
  const RasterConfig rc{16, 3, NormalizeMode::isotropic};
  const AugmentConfig ac{true, 7};
  for (int s = 0; s < 20; ++s) {
    Rng a(s), b(s);
    const auto img = augment(inst, rc, ac, a);
    EXPECT_EQ(img, augment(inst, rc, ac, b));
    EXPECT_EQ(img.sum(), 9u * 150u);
  }
}

TEST(Augment, TourLengthSafety) {
  const auto inst = make_instance(Family::cluster, 60, 11);
  Tour tour;
  for (std::size_t i = 0; i < inst.size(); ++i) tour.order.push_back((i * 7) % inst.size());
  const double base = tour_length(inst, tour);
  Rng rng(12);
  for (int s = 0; s < 30; ++s) {
    const auto draw = draw_augmentation(AugmentConfig{true, 7}, rng);
    const auto pts = transform_points(inst.points, draw, 7, NormalizeMode::isotropic);
    Instance moved = inst;
    moved.points = pts;
    // One global scale maps the original geometry onto the transformed one.
    const double scale = distance(pts[0], pts[1]) / distance(inst.points[0], inst.points[1]);
    EXPECT_NEAR(tour_length(moved, tour) / scale, base, 1e-9 * base);
  }
}

TEST(Augment, ImageFlipMatchesPointFlip) {
  // Even c, jittered points away from cell boundaries.
  const std::size_t c = 8;
  Rng rng(13);
  std::vector<Point> pts;
  for (int i = 0; i < 200; ++i) {
    const double cx = static_cast<double>(rng.below(c)), cy = static_cast<double>(rng.below(c));
    pts.push_back({(cx + rng.uniform(0.1, 0.9)) / c, (cy + rng.uniform(0.1, 0.9)) / c});
  }
  const auto base = rasterize(pts, c).image;
  const auto flipped = rasterize(flip(pts, FlipAxis::horizontal), c).image;
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t col = 0; col < c; ++col) EXPECT_EQ(flipped.at(r, col), base.at(r, c - 1 - col));
  const auto vflipped = rasterize(flip(pts, FlipAxis::vertical), c).image;
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t col = 0; col < c; ++col) EXPECT_EQ(vflipped.at(r, col), base.at(c - 1 - r, col));
}

TEST(ToInput, Examples) {
  EXPECT_EQ(to_input(image_of(2, {2, 0, 0, 4})), (std::vector<double>{0.5, 0, 0, 1}));
  EXPECT_EQ(to_input(Image(3)), std::vector<double>(9, 0.0));
  const auto inst = make_instance(Family::rue, 40, 14);
  const auto in = to_input(render(inst.points, RasterConfig{16, 1, NormalizeMode::isotropic}));
  EXPECT_EQ(*std::max_element(in.begin(), in.end()), 1.0);
}

TEST(Config, Validation) {
  EXPECT_THROW((RasterConfig{1, 1, NormalizeMode::isotropic}.validate()), ConfigError);
  EXPECT_THROW((RasterConfig{4, 0, NormalizeMode::isotropic}.validate()), ConfigError);
  EXPECT_EQ((RasterConfig{}.image_side()), 256u);
}

TEST(Pgm, HeaderClampAndSidecar) {
  const auto img = image_of(2, {300, 0, 1, 2});
  const auto path = std::filesystem::temp_directory_path() / "tspsel_test.pgm";
  write_pgm(img, path);
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_EQ(text.substr(0, 11), "P5\n2 2\n255\n");
  // Top row first: (1, 2), then (255 clamped, 0).
  EXPECT_EQ(static_cast<unsigned char>(text[11]), 1);
  EXPECT_EQ(static_cast<unsigned char>(text[12]), 2);
  EXPECT_EQ(static_cast<unsigned char>(text[13]), 255);
  EXPECT_EQ(static_cast<unsigned char>(text[14]), 0);
  std::filesystem::remove(path);
  const auto side = pgm_sidecar("x", RasterConfig{2, 1, NormalizeMode::isotropic}, 3, img);
  EXPECT_EQ(side["sum"], 303);
  EXPECT_EQ(side["n"], 3);
}
