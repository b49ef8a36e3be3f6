#pragma once

// Compact residual CNN with hand-written backpropagation and Adam.
//
// Architecture: 3x3 stem conv + ReLU; three stages of residual blocks (two
// 3x3 convs and a skip); the first block of stages 2 and 3 uses stride 2 and
// a 1x1 projection skip; global average pool; affine head. No normalization
// layers, so every sample is processed independently of its batch.
//
// Everything is double precision. Samples are processed one at a time and
// gradients are accumulated in sample order, so results are bit-identical for
// a given batch regardless of how the caller groups work.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tspsel/error.hpp"
#include "tspsel/random.hpp"

namespace tspsel::nn {

/// Dense (batch, channels, height, width) tensor, row-major.
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> values;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
      : n(n_), c(c_), h(h_), w(w_), values(n_ * c_ * h_ * w_, 0.0) {}

  std::size_t sample_size() const noexcept { return c * h * w; }
  double* sample(std::size_t i) { return values.data() + i * sample_size(); }
  const double* sample(std::size_t i) const { return values.data() + i * sample_size(); }
  double& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) {
    return values[((i * c + ch) * h + y) * w + x];
  }
};

struct ModelConfig {
  std::size_t input_side = 64;
  std::size_t input_channels = 1;
  std::array<std::size_t, 3> channels{16, 32, 64};
  std::size_t blocks = 2;  ///< residual blocks per stage
  std::size_t outputs = 2;

  void validate() const {
    if (input_side < 4 || input_side % 4 != 0) throw ConfigError("input side must be a positive multiple of 4");
    if (outputs < 2) throw ConfigError("model needs at least 2 outputs");
    if (blocks < 1) throw ConfigError("each stage needs at least one block");
    if (input_channels < 1) throw ConfigError("input needs at least one channel");
    for (std::size_t c : channels)
      if (c < 1) throw ConfigError("stage width must be positive");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Closed-form number of scalar parameters.
inline std::size_t parameter_count(const ModelConfig& cfg) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; };
  std::size_t total = conv(cfg.input_channels, cfg.channels[0], 3);
  std::size_t in = cfg.channels[0];
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t out = cfg.channels[s];
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      const std::size_t block_in = b == 0 ? in : out;
      const bool project = b == 0 && (s > 0 || block_in != out);
      total += conv(block_in, out, 3) + conv(out, out, 3) + (project ? conv(block_in, out, 1) : 0);
    }
    in = out;
  }
  return total + cfg.channels[2] * cfg.outputs + cfg.outputs;
}

struct Param {
  std::string name;
  std::vector<double> values;
};

using Gradients = std::vector<std::vector<double>>;

namespace detail {

struct ConvSpec {
  std::size_t in = 0, out = 0, kernel = 3, stride = 1, pad = 1;
  std::size_t weight = 0, bias = 0;  ///< parameter indices

  std::size_t out_side(std::size_t side) const { return (side + 2 * pad - kernel) / stride + 1; }
};

struct BlockSpec {
  ConvSpec conv1, conv2;
  bool project = false;
  ConvSpec proj;
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void im2col(const ConvSpec& cs, const double* x, std::size_t side, std::size_t out_side, RowMat& cols) {
  const std::size_t k = cs.kernel;
  cols.resize(static_cast<Eigen::Index>(cs.in * k * k), static_cast<Eigen::Index>(out_side * out_side));
  double* dst = cols.data();
  const auto s = static_cast<std::ptrdiff_t>(side);
  for (std::size_t ci = 0; ci < cs.in; ++ci) {
    const double* plane = x + ci * side * side;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        for (std::size_t oy = 0; oy < out_side; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * cs.stride + ky) - static_cast<std::ptrdiff_t>(cs.pad);
          for (std::size_t ox = 0; ox < out_side; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * cs.stride + kx) - static_cast<std::ptrdiff_t>(cs.pad);
            *dst++ = (iy >= 0 && iy < s && ix >= 0 && ix < s) ? plane[iy * s + ix] : 0.0;
          }
        }
      }
    }
  }
}

inline void col2im(const ConvSpec& cs, const RowMat& cols, std::size_t side, std::size_t out_side, double* dx) {
  const std::size_t k = cs.kernel;
  const double* src = cols.data();
  const auto s = static_cast<std::ptrdiff_t>(side);
  for (std::size_t ci = 0; ci < cs.in; ++ci) {
    double* plane = dx + ci * side * side;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        for (std::size_t oy = 0; oy < out_side; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * cs.stride + ky) - static_cast<std::ptrdiff_t>(cs.pad);
          for (std::size_t ox = 0; ox < out_side; ++ox, ++src) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * cs.stride + kx) - static_cast<std::ptrdiff_t>(cs.pad);
            if (iy >= 0 && iy < s && ix >= 0 && ix < s) plane[iy * s + ix] += *src;
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Activations of one sample, kept for the backward pass.
struct SampleCache {
  std::uint64_t model_version = 0;
  std::vector<double> input;
  std::vector<double> stem_out;  ///< post-ReLU
  struct Block {
    std::vector<double> h1;   ///< post-ReLU output of conv1
    std::vector<double> out;  ///< post-ReLU block output
  };
  std::vector<Block> blocks;
  std::vector<double> pooled;
  std::vector<double> logits;
};

struct BatchCache {
  std::vector<SampleCache> samples;
};

class Model {
public:
  Model() = default;

  /// He-normal convolution weights, zero biases; the affine head is zero
  /// unless `zero_head` is false (then He-normal as well).
  explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0, bool zero_head = true) : cfg_(cfg) {
    cfg_.validate();
    build();
    Rng rng(seed);
    for (std::size_t p = 0; p < params_.size(); ++p) {
      const bool is_weight = params_[p].name.ends_with(".w");
      if (!is_weight) continue;
      if (params_[p].name == "head.w" && zero_head) continue;
      const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in_[p]));
      for (double& v : params_[p].values) v = std_dev * rng.normal();
    }
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }
  std::uint64_t version() const noexcept { return version_; }
  /// Invalidates outstanding caches; call after changing parameters.
  void touch() noexcept { ++version_; }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.values.size();
    return total;
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto& p : params_) g.emplace_back(p.values.size(), 0.0);
    return g;
  }

  /// Spatial side of the final feature map.
  std::size_t feature_side() const { return cfg_.input_side / 4; }

  /// Forward pass of one sample of input_channels * side * side values.
  void forward_sample(std::span<const double> x, SampleCache& cache) const {
    const std::size_t side0 = cfg_.input_side;
    if (x.size() != cfg_.input_channels * side0 * side0) throw ShapeError("input does not match model input side");
    cache.model_version = version_;
    cache.input.assign(x.begin(), x.end());
    cache.stem_out = conv_forward(stem_, cache.input.data(), side0);
    relu(cache.stem_out);

    cache.blocks.resize(blocks_.size());
    const std::vector<double>* a = &cache.stem_out;
    std::size_t side = side0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& bs = blocks_[b];
      auto& bc = cache.blocks[b];
      bc.h1 = conv_forward(bs.conv1, a->data(), side);
      relu(bc.h1);
      const std::size_t out_side = bs.conv1.out_side(side);
      bc.out = conv_forward(bs.conv2, bc.h1.data(), out_side);
      if (bs.project) {
        const auto skip = conv_forward(bs.proj, a->data(), side);
        for (std::size_t i = 0; i < bc.out.size(); ++i) bc.out[i] += skip[i];
      } else {
        for (std::size_t i = 0; i < bc.out.size(); ++i) bc.out[i] += (*a)[i];
      }
      relu(bc.out);
      a = &bc.out;
      side = out_side;
    }

    const std::size_t channels = cfg_.channels[2];
    const std::size_t area = side * side;
    cache.pooled.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < area; ++i) s += (*a)[c * area + i];
      cache.pooled[c] = s / static_cast<double>(area);
    }
    const auto& w = params_[head_w_].values;
    const auto& bias = params_[head_b_].values;
    cache.logits.assign(cfg_.outputs, 0.0);
    for (std::size_t o = 0; o < cfg_.outputs; ++o) {
      double s = bias[o];
      for (std::size_t c = 0; c < channels; ++c) s += w[o * channels + c] * cache.pooled[c];
      cache.logits[o] = s;
    }
  }

  /// Accumulates d(loss)/d(params) for one sample into `grads`.
  void backward_sample(const SampleCache& cache, std::span<const double> dlogits, Gradients& grads) const {
    if (cache.model_version != version_ || cache.logits.size() != cfg_.outputs)
      throw ContractError("backward called with a cache from a different forward pass");
    if (dlogits.size() != cfg_.outputs) throw ShapeError("dlogits has the wrong length");
    if (grads.size() != params_.size()) throw ShapeError("gradient set does not match the model");

    const std::size_t channels = cfg_.channels[2];
    const std::size_t side_f = feature_side();
    const std::size_t area = side_f * side_f;
    const auto& w = params_[head_w_].values;
    std::vector<double> dpooled(channels, 0.0);
    for (std::size_t o = 0; o < cfg_.outputs; ++o) {
      grads[head_b_][o] += dlogits[o];
      for (std::size_t c = 0; c < channels; ++c) {
        grads[head_w_][o * channels + c] += dlogits[o] * cache.pooled[c];
        dpooled[c] += dlogits[o] * w[o * channels + c];
      }
    }
    std::vector<double> da(channels * area);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < area; ++i) da[c * area + i] = dpooled[c] / static_cast<double>(area);

    std::size_t side = side_f;
    for (std::size_t b = blocks_.size(); b-- > 0;) {
      const auto& bs = blocks_[b];
      const auto& bc = cache.blocks[b];
      const std::vector<double>& a_in = b == 0 ? cache.stem_out : cache.blocks[b - 1].out;
      const std::size_t in_side = bs.conv1.stride == 2 ? side * 2 : side;
      // Through the output ReLU.
      for (std::size_t i = 0; i < da.size(); ++i)
        if (bc.out[i] <= 0.0) da[i] = 0.0;
      std::vector<double> dh1 = conv_backward(bs.conv2, bc.h1.data(), side, da, grads);
      for (std::size_t i = 0; i < dh1.size(); ++i)
        if (bc.h1[i] <= 0.0) dh1[i] = 0.0;
      std::vector<double> dx = conv_backward(bs.conv1, a_in.data(), in_side, dh1, grads);
      if (bs.project) {
        const auto dskip = conv_backward(bs.proj, a_in.data(), in_side, da, grads);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dskip[i];
      } else {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += da[i];
      }
      da = std::move(dx);
      side = in_side;
    }
    for (std::size_t i = 0; i < da.size(); ++i)
      if (cache.stem_out[i] <= 0.0) da[i] = 0.0;
    conv_backward(stem_, cache.input.data(), cfg_.input_side, da, grads, false);
  }

  /// Batched forward: logits (batch x outputs, row-major) plus caches.
  std::vector<double> forward(const Tensor4& batch, BatchCache& cache) const {
    if (batch.c != cfg_.input_channels || batch.h != cfg_.input_side || batch.w != cfg_.input_side)
      throw ShapeError("batch spatial shape does not match the model");
    cache.samples.resize(batch.n);
    std::vector<double> logits;
    logits.reserve(batch.n * cfg_.outputs);
    for (std::size_t i = 0; i < batch.n; ++i) {
      forward_sample({batch.sample(i), batch.sample_size()}, cache.samples[i]);
      logits.insert(logits.end(), cache.samples[i].logits.begin(), cache.samples[i].logits.end());
    }
    return logits;
  }

  /// Gradients of sum_i <dlogits_i, logits_i> over the batch.
  Gradients backward(const BatchCache& cache, std::span<const double> dlogits) const {
    if (dlogits.size() != cache.samples.size() * cfg_.outputs) throw ShapeError("dlogits does not match the batch");
    Gradients g = zero_gradients();
    for (std::size_t i = 0; i < cache.samples.size(); ++i)
      backward_sample(cache.samples[i], dlogits.subspan(i * cfg_.outputs, cfg_.outputs), g);
    return g;
  }

  /// Logits of one sample (no cache kept).
  std::vector<double> predict(std::span<const double> x) const {
    SampleCache cache;
    forward_sample(x, cache);
    return cache.logits;
  }

  /// Shapes of the stage outputs, for inspection: (channels, side) per block.
  std::vector<std::pair<std::size_t, std::size_t>> block_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t side = cfg_.input_side;
    for (const auto& b : blocks_) {
      side = b.conv1.out_side(side);
      out.emplace_back(b.conv2.out, side);
    }
    return out;
  }

private:
  std::size_t add_param(std::string name, std::size_t size, std::size_t fan_in) {
    params_.push_back({std::move(name), std::vector<double>(size, 0.0)});
    fan_in_.push_back(fan_in);
    return params_.size() - 1;
  }

  detail::ConvSpec add_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                            std::size_t stride) {
    detail::ConvSpec cs;
    cs.in = in;
    cs.out = out;
    cs.kernel = k;
    cs.stride = stride;
    cs.pad = k / 2;
    cs.weight = add_param(name + ".w", out * in * k * k, in * k * k);
    cs.bias = add_param(name + ".b", out, 1);
    return cs;
  }

  void build() {
    params_.clear();
    fan_in_.clear();
    blocks_.clear();
    stem_ = add_conv("stem", cfg_.input_channels, cfg_.channels[0], 3, 1);
    std::size_t in = cfg_.channels[0];
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t out = cfg_.channels[s];
      for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
        const std::size_t block_in = b == 0 ? in : out;
        const std::size_t stride = (b == 0 && s > 0) ? 2 : 1;
        detail::BlockSpec bs;
        bs.conv1 = add_conv(name + ".conv1", block_in, out, 3, stride);
        bs.conv2 = add_conv(name + ".conv2", out, out, 3, 1);
        bs.project = b == 0 && (s > 0 || block_in != out);
        if (bs.project) bs.proj = add_conv(name + ".proj", block_in, out, 1, stride);
        blocks_.push_back(bs);
      }
      in = out;
    }
    head_w_ = add_param("head.w", cfg_.outputs * cfg_.channels[2], cfg_.channels[2]);
    head_b_ = add_param("head.b", cfg_.outputs, 1);
  }

  static void relu(std::vector<double>& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  }

  std::vector<double> conv_forward(const detail::ConvSpec& cs, const double* x, std::size_t side) const {
    const std::size_t out_side = cs.out_side(side);
    const auto hw = static_cast<Eigen::Index>(out_side * out_side);
    std::vector<double> y(cs.out * out_side * out_side);
    Eigen::Map<const detail::RowMat> w(params_[cs.weight].values.data(), static_cast<Eigen::Index>(cs.out),
                                       static_cast<Eigen::Index>(cs.in * cs.kernel * cs.kernel));
    Eigen::Map<detail::RowMat> out(y.data(), static_cast<Eigen::Index>(cs.out), hw);
    if (cs.kernel == 1 && cs.stride == 1) {
      Eigen::Map<const detail::RowMat> in(x, static_cast<Eigen::Index>(cs.in), hw);
      out.noalias() = w * in;
    } else {
      detail::RowMat cols;
      detail::im2col(cs, x, side, out_side, cols);
      out.noalias() = w * cols;
    }
    const auto& bias = params_[cs.bias].values;
    for (std::size_t o = 0; o < cs.out; ++o) out.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    return y;
  }

  /// Accumulates weight/bias gradients; returns d(loss)/d(input) unless
  /// `want_input` is false.
  std::vector<double> conv_backward(const detail::ConvSpec& cs, const double* x, std::size_t side,
                                    const std::vector<double>& dy, Gradients& grads, bool want_input = true) const {
    const std::size_t out_side = cs.out_side(side);
    const auto hw = static_cast<Eigen::Index>(out_side * out_side);
    const auto rows = static_cast<Eigen::Index>(cs.in * cs.kernel * cs.kernel);
    Eigen::Map<const detail::RowMat> dout(dy.data(), static_cast<Eigen::Index>(cs.out), hw);
    Eigen::Map<const detail::RowMat> w(params_[cs.weight].values.data(), static_cast<Eigen::Index>(cs.out), rows);
    Eigen::Map<detail::RowMat> dw(grads[cs.weight].data(), static_cast<Eigen::Index>(cs.out), rows);
    auto& db = grads[cs.bias];
    // Plain loop: a vectorized reduction would make the summation order
    // depend on the buffer's alignment.
    for (std::size_t o = 0; o < cs.out; ++o) {
      const double* row = dy.data() + o * static_cast<std::size_t>(hw);
      double total = 0.0;
      for (Eigen::Index k = 0; k < hw; ++k) total += row[k];
      db[o] += total;
    }

    detail::RowMat cols;
    detail::im2col(cs, x, side, out_side, cols);
    dw.noalias() += dout * cols.transpose();
    std::vector<double> dx;
    if (!want_input) return dx;
    dx.assign(cs.in * side * side, 0.0);
    detail::RowMat dcols = w.transpose() * dout;
    detail::col2im(cs, dcols, side, out_side, dx.data());
    return dx;
  }

  ModelConfig cfg_;
  std::vector<Param> params_;
  std::vector<std::size_t> fan_in_;
  detail::ConvSpec stem_;
  std::vector<detail::BlockSpec> blocks_;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::uint64_t version_ = 0;
};

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  double peak = logits[0];
  for (double v : logits) peak = std::max(peak, v);
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += out[i] = std::exp(logits[i] - peak);
  for (double& v : out) v /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  double lr = 1e-4;
  double decay_rate = 0.9;
  std::size_t decay_patience = 10;
  // Plateau tracking.
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  std::size_t epochs_seen = 0;
};

/// One bias-corrected Adam update. Throws NumericError on non-finite gradients
/// before touching any parameter.
inline void adam_step(std::vector<Param>& params, const Gradients& grads, AdamState& state) {
  if (grads.size() != params.size()) throw ShapeError("gradient set does not match parameters");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (grads[p].size() != params[p].values.size()) throw ShapeError("gradient shape mismatch for " + params[p].name);
    for (double g : grads[p])
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + params[p].name);
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.values.size(), 0.0);
      state.v.emplace_back(p.values.size(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& values = params[p].values;
    auto& m = state.m[p];
    auto& v = state.v[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

inline void adam_step(Model& model, const Gradients& grads, AdamState& state) {
  adam_step(model.params(), grads, state);
  model.touch();
}

/// Consumes the epoch losses not yet seen. When the best loss has not
/// improved by more than 1e-12 for `decay_patience` consecutive epochs, the
/// learning rate is multiplied by `decay_rate` and the counter restarts.
inline AdamState& decay_on_plateau(AdamState& state, std::span<const double> epoch_losses) {
  if (epoch_losses.empty()) throw DomainError("loss history is empty");
  for (std::size_t e = state.epochs_seen; e < epoch_losses.size(); ++e) {
    if (epoch_losses[e] < state.best_loss - 1e-12) {
      state.best_loss = epoch_losses[e];
      state.bad_epochs = 0;
    } else if (++state.bad_epochs >= state.decay_patience) {
      state.lr *= state.decay_rate;
      state.bad_epochs = 0;
    }
  }
  state.epochs_seen = epoch_losses.size();
  return state;
}

// ---------------------------------------------------------------------------
// Checkpoints: "TSPSELCK", u32 version, config (u32 fields), u32 metadata
// length + bytes, u32 parameter count, then per parameter: u32 name length,
// name, u64 value count, values as little-endian IEEE-754 doubles.

inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'P', 'S', 'E', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated checkpoint", 0);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated checkpoint", 0);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Model& model, const std::string& metadata, std::ostream& out) {
  const auto& cfg = model.config();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  for (std::size_t v : {cfg.input_side, cfg.input_channels, cfg.channels[0], cfg.channels[1], cfg.channels[2],
                        cfg.blocks, cfg.outputs})
    detail::put_u32(out, static_cast<std::uint32_t>(v));
  detail::put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::put_u64(out, p.values.size());
    for (double v : p.values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed to write checkpoint");
}

struct LoadedCheckpoint {
  Model model;
  std::string metadata;
};

inline LoadedCheckpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError("not a model checkpoint", 0);
  const std::uint32_t version = detail::get_u32(in);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  ModelConfig cfg;
  cfg.input_side = detail::get_u32(in);
  cfg.input_channels = detail::get_u32(in);
  for (auto& c : cfg.channels) c = detail::get_u32(in);
  cfg.blocks = detail::get_u32(in);
  cfg.outputs = detail::get_u32(in);
  LoadedCheckpoint out{Model(cfg), {}};
  out.metadata.resize(detail::get_u32(in));
  if (!in.read(out.metadata.data(), static_cast<std::streamsize>(out.metadata.size())))
    throw ParseError("truncated checkpoint metadata", 0);
  const std::uint32_t count = detail::get_u32(in);
  auto& params = out.model.params();
  if (count != params.size()) throw ParseError("checkpoint parameter count does not match its config", 0);
  for (auto& p : params) {
    std::string name(detail::get_u32(in), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) throw ParseError("truncated checkpoint", 0);
    if (name != p.name) throw ParseError("unexpected parameter " + name + ", wanted " + p.name, 0);
    if (detail::get_u64(in) != p.values.size()) throw ParseError("size mismatch for parameter " + name, 0);
    for (double& v : p.values) v = std::bit_cast<double>(detail::get_u64(in));
  }
  out.model.touch();
  return out;
}

inline void save_checkpoint(const Model& model, const std::string& metadata, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_checkpoint(model, metadata, out);
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace tspsel::nn
