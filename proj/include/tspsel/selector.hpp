#pragma once

// Dataset assembly, the classification and regression losses, the training
// loop, solver selection and the cheap-feature k-nearest-neighbour baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tspsel/error.hpp"
#include "tspsel/instances.hpp"
#include "tspsel/metrics.hpp"
#include "tspsel/nn.hpp"
#include "tspsel/random.hpp"
#include "tspsel/raster.hpp"
#include "tspsel/run_table.hpp"

namespace tspsel {

enum class Strategy { classification, regression };
enum class LabelMode { hard, soft };
enum class TargetTransform { raw, log10 };

inline std::string_view to_string(Strategy s) { return s == Strategy::classification ? "cla" : "reg"; }

inline Strategy parse_strategy(std::string_view s) {
  if (s == "cla" || s == "classification") return Strategy::classification;
  if (s == "reg" || s == "regression") return Strategy::regression;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected cla or reg)");
}

// ---------------------------------------------------------------------------
// Labels and losses

/// Hard: one-hot at argmin t (ties to the lowest index). Soft: p_j proportional
/// to exp(-t_j / tau).
inline std::vector<double> make_label(std::span<const double> t, LabelMode mode, double tau = 1.0) {
  if (t.empty()) throw DomainError("empty time vector");
  for (double v : t)
    if (!(v > 0.0)) throw DomainError("times must be strictly positive");
  std::vector<double> p(t.size(), 0.0);
  if (mode == LabelMode::hard) {
    p[argmin(t)] = 1.0;
    return p;
  }
  if (!(tau > 0.0)) throw ParameterError("soft-label temperature must be positive");
  const double lo = *std::min_element(t.begin(), t.end());
  double total = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) total += p[j] = std::exp(-(t[j] - lo) / tau);
  for (double& v : p) v /= total;
  return p;
}

/// w_j = t_j^alpha.
inline std::vector<double> time_weights(std::span<const double> t, double alpha) {
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be non-negative");
  std::vector<double> w(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) w[j] = std::pow(t[j], alpha);
  return w;
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  ///< d(loss)/d(input vector)
};

/// Weighted cross-entropy L = -sum_j w_j p_j log softmax(q)_j, computed with
/// log-sum-exp so it stays finite for any logits.
inline LossResult loss_ce(std::span<const double> logits, std::span<const double> p, std::span<const double> w) {
  if (logits.size() != p.size() || p.size() != w.size() || p.empty())
    throw ShapeError("cross-entropy inputs must share one length");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double q : logits) total += std::exp(q - peak);
  const double lse = peak + std::log(total);
  LossResult r;
  r.grad.assign(p.size(), 0.0);
  double mass = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double wp = w[j] * p[j];
    if (wp != 0.0) r.loss -= wp * (logits[j] - lse);
    mass += wp;
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double s = std::exp(logits[j] - lse);
    r.grad[j] = mass * s - w[j] * p[j];
  }
  return r;
}

inline double transform_target(double t, TargetTransform tt) { return tt == TargetTransform::log10 ? std::log10(t) : t; }

/// Weighted squared error L = sum_j w_j (q_j - t'_j)^2.
inline LossResult loss_mse(std::span<const double> q, std::span<const double> t, std::span<const double> w,
                           TargetTransform tt = TargetTransform::raw) {
  if (q.size() != t.size() || t.size() != w.size() || q.empty()) throw ShapeError("MSE inputs must share one length");
  LossResult r;
  r.grad.assign(q.size(), 0.0);
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double diff = q[j] - transform_target(t[j], tt);
    r.loss += w[j] * diff * diff;
    r.grad[j] = 2.0 * w[j] * diff;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dataset and split

struct LabeledExample {
  Instance instance;
  std::vector<double> t;  ///< penalized median times, one per solver
  std::vector<double> p;  ///< classification label
  std::vector<double> w;  ///< per-solver weights
  std::size_t best = 0;   ///< argmin t, ties to the lowest index
};

struct LabelConfig {
  LabelMode mode = LabelMode::hard;
  double tau = 1.0;
  double alpha = 0.5;
};

/// Pairs instances with their table rows (matched by id).
inline std::vector<LabeledExample> build_dataset(const std::vector<Instance>& instances, const RunTable& table,
                                                 const LabelConfig& lc = {}) {
  std::map<std::string, const Instance*> by_id;
  for (const auto& inst : instances) by_id[inst.id] = &inst;
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const auto it = by_id.find(table.instances[i]);
    if (it == by_id.end()) throw ConfigError("run table instance " + table.instances[i] + " is not in the corpus");
    LabeledExample ex;
    ex.instance = *it->second;
    ex.t = table.row(i);
    ex.p = make_label(ex.t, lc.mode, lc.tau);
    ex.w = time_weights(ex.t, lc.alpha);
    ex.best = argmin(ex.t);
    out.push_back(std::move(ex));
  }
  return out;
}

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  }
};

struct SplitResult {
  std::vector<std::size_t> train;  ///< ascending example indices
  std::vector<std::size_t> test;   ///< ascending example indices
  std::vector<std::string> warnings;
};

/// Stratified by best-solver index: each stratum sends round(fraction * size)
/// of its members, chosen by a seeded shuffle, to the training side. A
/// stratum of size 1 goes to training with a warning.
inline SplitResult split(std::span<const std::size_t> strata, const SplitSpec& spec) {
  spec.validate();
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
  SplitResult out;
  for (auto& [label, members] : groups) {
    if (members.size() == 1) {
      out.train.push_back(members[0]);
      out.warnings.push_back("stratum " + std::to_string(label) + " has a single example; placed in train");
      continue;
    }
    Rng rng(derive_seed(spec.seed, {stable_hash("split"), label}));
    rng.shuffle(std::span(members));
    const auto take = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(members.size()) + 0.5));
    for (std::size_t k = 0; k < members.size(); ++k) (k < take ? out.train : out.test).push_back(members[k]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline SplitResult split(const std::vector<LabeledExample>& examples, const SplitSpec& spec) {
  std::vector<std::size_t> strata;
  for (const auto& ex : examples) strata.push_back(ex.best);
  return split(strata, spec);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  Strategy strategy = Strategy::classification;
  std::size_t epochs = 50;
  std::size_t batch = 64;
  double lr = 1e-4;
  double decay_rate = 0.9;
  std::size_t patience = 10;
  TargetTransform target_transform = TargetTransform::log10;
  AugmentConfig augment{true, 7};
  RasterConfig raster{64, 1, NormalizeMode::isotropic};
  nn::ModelConfig model{};  ///< input_side and outputs are filled in by train()
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch < 1) throw ConfigError("batch size must be positive");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("decay rate must lie in (0, 1]");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    raster.validate();
  }
};

struct SelectorModel {
  nn::Model model;
  Strategy strategy = Strategy::classification;
  TargetTransform target_transform = TargetTransform::log10;
  RasterConfig raster{64, 1, NormalizeMode::isotropic};
  std::vector<std::string> solvers;
  std::vector<double> epoch_losses;
  std::size_t adam_steps = 0;
};

/// Raised when training produces a non-finite loss or gradient; carries the
/// model as it was after the last finite update.
class TrainingDiverged : public NumericError {
public:
  TrainingDiverged(const std::string& what, std::shared_ptr<const SelectorModel> last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const SelectorModel& last_good() const { return *last_good_; }

private:
  std::shared_ptr<const SelectorModel> last_good_;
};

/// Model input for one example under a given augmentation draw stream.
inline std::vector<double> example_input(const Instance& inst, const RasterConfig& rc, const AugmentConfig& ac,
                                         Rng& rng) {
  return to_input(augment(inst, rc, ac, rng));
}

/// Per-sample loss and d(loss)/d(outputs) for the configured strategy.
inline LossResult example_loss(const LabeledExample& ex, std::span<const double> out, Strategy strategy,
                               TargetTransform tt) {
  return strategy == Strategy::classification ? loss_ce(out, ex.p, ex.w) : loss_mse(out, ex.t, ex.w, tt);
}

using EpochCallback = std::function<void(std::size_t epoch, double loss, double lr)>;

/// Mini-batch Adam on the mean per-sample loss. The example order is
/// reshuffled each epoch and each sample gets a fresh augmentation draw; both
/// come from streams derived from (seed, epoch, example), so results do not
/// depend on batch composition or thread placement.
inline SelectorModel train(const std::vector<LabeledExample>& train_set, const std::vector<std::string>& solvers,
                           TrainConfig tc, const EpochCallback& on_epoch = {}) {
  tc.validate();
  if (train_set.empty()) throw DomainError("empty training set");
  const std::size_t m = train_set[0].t.size();
  if (m != solvers.size()) throw ShapeError("time vectors do not match the solver list");
  for (const auto& ex : train_set)
    if (ex.t.size() != m || ex.p.size() != m || ex.w.size() != m)
      throw ShapeError("examples disagree on the number of solvers");

  tc.model.input_side = tc.raster.image_side();
  tc.model.outputs = m;
  SelectorModel sm;
  sm.model = nn::Model(tc.model, derive_seed(tc.seed, {stable_hash("init")}));
  sm.strategy = tc.strategy;
  sm.target_transform = tc.target_transform;
  sm.raster = tc.raster;
  sm.solvers = solvers;

  nn::AdamState adam;
  adam.lr = tc.lr;
  adam.decay_rate = tc.decay_rate;
  adam.decay_patience = tc.patience;

  // Without augmentation every epoch sees the same images.
  std::vector<std::vector<double>> fixed;
  if (!tc.augment.enabled()) {
    Rng unused(0);
    for (const auto& ex : train_set) fixed.push_back(example_input(ex.instance, tc.raster, tc.augment, unused));
  }

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  nn::SampleCache cache;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(tc.seed, {stable_hash("shuffle"), epoch}));
    shuffle_rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += tc.batch) {
      const std::size_t stop = std::min(n, start + tc.batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      nn::Gradients grads = sm.model.zero_gradients();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        const auto& ex = train_set[idx];
        std::vector<double> input;
        if (fixed.empty()) {
          Rng aug_rng(derive_seed(tc.seed, {stable_hash("augment"), epoch, idx}));
          input = example_input(ex.instance, tc.raster, tc.augment, aug_rng);
        }
        sm.model.forward_sample(fixed.empty() ? std::span<const double>(input) : std::span<const double>(fixed[idx]),
                                cache);
        LossResult lr = example_loss(ex, cache.logits, tc.strategy, tc.target_transform);
        if (!std::isfinite(lr.loss))
          throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch + 1),
                                 std::make_shared<SelectorModel>(sm));
        epoch_loss += lr.loss;
        for (double& g : lr.grad) g *= scale;
        sm.model.backward_sample(cache, lr.grad, grads);
      }
      try {
        nn::adam_step(sm.model, grads, adam);
      } catch (const NumericError& e) {
        throw TrainingDiverged(e.what(), std::make_shared<SelectorModel>(sm));
      }
      ++sm.adam_steps;
    }
    sm.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    nn::decay_on_plateau(adam, sm.epoch_losses);
    if (on_epoch) on_epoch(epoch + 1, sm.epoch_losses.back(), adam.lr);
  }
  return sm;
}

/// Raw model outputs (logits or predicted transformed times), no augmentation.
inline std::vector<double> predict_outputs(const SelectorModel& sm, const Instance& inst) {
  const auto input = to_input(render(inst.points, sm.raster));
  if (input.size() != sm.model.config().input_side * sm.model.config().input_side)
    throw ShapeError("raster side does not match the model input");
  return sm.model.predict(input);
}

/// Classification: argmax of the logits. Regression: argmin of predicted
/// times. Ties go to the lowest index.
inline std::size_t choose(std::span<const double> outputs, Strategy strategy) {
  if (outputs.empty()) throw ShapeError("no outputs to choose from");
  if (strategy == Strategy::regression) return argmin(outputs);
  return static_cast<std::size_t>(std::max_element(outputs.begin(), outputs.end()) - outputs.begin());
}

inline std::size_t select(const SelectorModel& sm, const Instance& inst) {
  return choose(predict_outputs(sm, inst), sm.strategy);
}

inline nlohmann::json selector_metadata(const SelectorModel& sm) {
  return {{"strategy", to_string(sm.strategy)},
          {"target_transform", sm.target_transform == TargetTransform::log10 ? "log10" : "raw"},
          {"raster",
           {{"c", sm.raster.c},
            {"k", sm.raster.upscale_factor},
            {"normalize", sm.raster.normalize_mode == NormalizeMode::isotropic ? "isotropic" : "per_axis"}}},
          {"solvers", sm.solvers},
          {"epoch_losses", sm.epoch_losses},
          {"adam_steps", sm.adam_steps}};
}

inline void save_selector(const SelectorModel& sm, const std::filesystem::path& path) {
  nn::save_checkpoint(sm.model, selector_metadata(sm).dump(), path);
}

inline SelectorModel load_selector(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  SelectorModel sm;
  sm.model = std::move(ck.model);
  try {
    const auto meta = nlohmann::json::parse(ck.metadata);
    sm.strategy = parse_strategy(meta.at("strategy").get<std::string>());
    sm.target_transform =
        meta.at("target_transform").get<std::string>() == "log10" ? TargetTransform::log10 : TargetTransform::raw;
    const auto& r = meta.at("raster");
    sm.raster.c = r.at("c").get<std::size_t>();
    sm.raster.upscale_factor = r.at("k").get<std::size_t>();
    sm.raster.normalize_mode =
        r.at("normalize").get<std::string>() == "per_axis" ? NormalizeMode::per_axis : NormalizeMode::isotropic;
    sm.solvers = meta.at("solvers").get<std::vector<std::string>>();
    sm.epoch_losses = meta.value("epoch_losses", std::vector<double>{});
    sm.adam_steps = meta.value("adam_steps", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint metadata: ") + e.what(), 0);
  }
  if (sm.solvers.size() != sm.model.config().outputs) throw ParseError("checkpoint solver list does not match", 0);
  return sm;
}

// ---------------------------------------------------------------------------
// Cheap features and the k-nearest-neighbour baseline

inline constexpr std::size_t kFeatureCount = 16;

inline const std::array<const char*, kFeatureCount>& feature_names() {
  static const std::array<const char*, kFeatureCount> names{
      "n",         "bbox_aspect", "centroid_offset", "nn_mean",    "nn_std",      "nn_min",
      "nn_max",    "pair_mean",   "pair_std",        "hull_frac",  "occupied_16", "max_cell_16",
      "dist_cv",   "x_std",       "y_std",           "centroid_dist"};
  return names;
}

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  double time_s = 0.0;  ///< virtual cost of computing the features
};

namespace detail {

/// Number of strict convex-hull vertices (collinear boundary points excluded).
inline std::size_t hull_size(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts.size();
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  return k - 1;
}

inline std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace detail

/// Sixteen scale-free features on the isotropically normalized instance.
/// The feature time counts distance evaluations and point visits, divided by
/// cost_rate, mirroring the solvers' virtual clock.
inline FeatureVector cheap_features(const Instance& inst, double cost_rate = 1e6) {
  const std::size_t n = inst.size();
  if (n < 3) throw DomainError("features need at least 3 cities");
  if (!(cost_rate > 0.0)) throw ConfigError("cost rate must be positive");
  const auto pts = normalize(inst.points, NormalizeMode::isotropic);
  std::uint64_t work = n;
  FeatureVector fv;
  auto& f = fv.values;

  double min_x = pts[0].x, max_x = min_x, min_y = pts[0].y, max_y = min_y, cx = 0.0, cy = 0.0;
  for (const Point& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  const double wx = max_x - min_x, wy = max_y - min_y;
  f[0] = static_cast<double>(n);
  f[1] = std::max(wx, wy) > 0.0 ? std::min(wx, wy) / std::max(wx, wy) : 0.0;
  f[2] = std::hypot(cx - 0.5 * (min_x + max_x), cy - 0.5 * (min_y + max_y));

  // All pairs: nearest-neighbour distances and the distance distribution.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double dab = distance(pts[a], pts[b]);
      nearest[a] = std::min(nearest[a], dab);
      nearest[b] = std::min(nearest[b], dab);
      sum += dab;
      sum_sq += dab * dab;
    }
  }
  work += n * (n - 1) / 2;
  const auto [nn_mean, nn_std] = detail::mean_std(nearest);
  f[3] = nn_mean;
  f[4] = nn_std;
  f[5] = *std::min_element(nearest.begin(), nearest.end());
  f[6] = *std::max_element(nearest.begin(), nearest.end());

  // Pairwise statistics on an evenly strided subsample of at most 100 points.
  const std::size_t sub = std::min<std::size_t>(n, 100);
  std::vector<double> sub_d;
  for (std::size_t a = 0; a < sub; ++a)
    for (std::size_t b = a + 1; b < sub; ++b) sub_d.push_back(distance(pts[a * n / sub], pts[b * n / sub]));
  work += sub_d.size();
  const auto [pair_mean, pair_std] = detail::mean_std(sub_d);
  f[7] = pair_mean;
  f[8] = pair_std;

  f[9] = static_cast<double>(detail::hull_size(pts)) / static_cast<double>(n);
  work += n * static_cast<std::uint64_t>(std::ceil(std::log2(static_cast<double>(n))));

  const DensityMap grid = rasterize(pts, 16);
  std::size_t occupied = 0;
  for (auto v : grid.image.pixels) occupied += v > 0 ? 1 : 0;
  f[10] = static_cast<double>(occupied) / 256.0;
  f[11] = grid.image.max();
  work += n + 256;

  const double pairs = static_cast<double>(n * (n - 1) / 2);
  const double mean_d = sum / pairs;
  const double var_d = std::max(0.0, sum_sq / pairs - mean_d * mean_d);
  f[12] = mean_d > 0.0 ? std::sqrt(var_d) / mean_d : 0.0;

  std::vector<double> xs, ys, dc;
  for (const Point& p : pts) {
    xs.push_back(p.x);
    ys.push_back(p.y);
    dc.push_back(std::hypot(p.x - cx, p.y - cy));
  }
  f[13] = detail::mean_std(xs).second;
  f[14] = detail::mean_std(ys).second;
  f[15] = detail::mean_std(dc).first;
  work += n;

  fv.time_s = static_cast<double>(work) / cost_rate;
  return fv;
}

/// z-scored Euclidean k-NN regression of the time vectors.
class KnnBaseline {
public:
  KnnBaseline(std::vector<std::array<double, kFeatureCount>> features, std::vector<std::vector<double>> times,
              std::size_t k)
      : features_(std::move(features)), times_(std::move(times)), k_(k) {
    if (features_.empty()) throw DomainError("empty training set");
    if (features_.size() != times_.size()) throw ShapeError("features and times differ in length");
    if (k_ < 1 || k_ > features_.size()) throw ParameterError("k must lie in [1, training size]");
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      std::vector<double> col;
      for (const auto& row : features_) col.push_back(row[f]);
      const auto [mean, sd] = detail::mean_std(col);
      mean_[f] = mean;
      scale_[f] = sd > 0.0 ? sd : 1.0;
    }
    for (auto& row : features_)
      for (std::size_t f = 0; f < kFeatureCount; ++f) row[f] = (row[f] - mean_[f]) / scale_[f];
  }

  /// Mean time vector of the k nearest training examples (ties by index).
  std::vector<double> predict(const std::array<double, kFeatureCount>& query) const {
    std::array<double, kFeatureCount> z;
    for (std::size_t f = 0; f < kFeatureCount; ++f) z[f] = (query[f] - mean_[f]) / scale_[f];
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < features_.size(); ++i) {
      double s = 0.0;
      for (std::size_t f = 0; f < kFeatureCount; ++f) s += (features_[i][f] - z[f]) * (features_[i][f] - z[f]);
      dist.emplace_back(s, i);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    std::vector<double> out(times_[0].size(), 0.0);
    for (std::size_t r = 0; r < k_; ++r)
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += times_[dist[r].second][j];
    for (double& v : out) v /= static_cast<double>(k_);
    return out;
  }

  std::size_t select(const std::array<double, kFeatureCount>& query) const { return argmin(predict(query)); }

private:
  std::vector<std::array<double, kFeatureCount>> features_;
  std::vector<std::vector<double>> times_;
  std::size_t k_;
  std::array<double, kFeatureCount> mean_{}, scale_{};
};

// ---------------------------------------------------------------------------
// Prediction files

struct Prediction {
  std::string instance_id;
  std::string chosen_solver;
  std::string strategy;
  double overhead_s = 0.0;
};

inline constexpr const char* kPredictionHeader = "instance_id,chosen_solver,strategy,overhead_s";

inline void write_predictions(const std::vector<Prediction>& preds, std::ostream& out) {
  out << kPredictionHeader << '\n';
  for (const auto& p : preds)
    out << p.instance_id << ',' << p.chosen_solver << ',' << p.strategy << ',' << format_real(p.overhead_s) << '\n';
  if (!out) throw IoError("failed to write predictions");
}

inline std::vector<Prediction> read_predictions(std::istream& in) {
  std::string raw;
  if (!std::getline(in, raw) || detail::trim(raw) != kPredictionHeader)
    throw ParseError("expected header " + std::string(kPredictionHeader), 1);
  std::vector<Prediction> out;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.emplace_back(detail::trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 4) throw ParseError("expected 4 columns", line_no);
    Prediction p{cells[0], cells[1], cells[2], 0.0};
    if (!detail::parse_number(cells[3], p.overhead_s) || !(p.overhead_s >= 0.0))
      throw ParseError("overhead_s must be a non-negative number", line_no);
    out.push_back(std::move(p));
  }
  return out;
}

/// Decisions and overheads aligned with the rows of `table`.
inline std::pair<std::vector<std::size_t>, std::vector<double>> align_predictions(const RunTable& table,
                                                                                 const std::vector<Prediction>& preds) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : preds)
    if (!by_id.emplace(p.instance_id, &p).second) throw ConfigError("duplicate prediction for " + p.instance_id);
  std::vector<std::size_t> decisions;
  std::vector<double> overhead;
  for (const auto& id : table.instances) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ConfigError("no prediction for " + id);
    const auto s = std::find(table.solvers.begin(), table.solvers.end(), it->second->chosen_solver);
    if (s == table.solvers.end()) throw ConfigError("unknown solver " + it->second->chosen_solver);
    decisions.push_back(static_cast<std::size_t>(s - table.solvers.begin()));
    overhead.push_back(it->second->overhead_s);
  }
  return {decisions, overhead};
}

}  // namespace tspsel
