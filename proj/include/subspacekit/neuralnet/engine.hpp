#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/network_spec.hpp"
#include "subspacekit/neuralnet/params.hpp"
#include "subspacekit/neuralnet/tensor.hpp"
#include "subspacekit/numkernel/parallel.hpp"

// Layer-wise forward and reverse-mode passes. `forward` records every layer
// input (plus batch-norm intermediates) on a tape; `backward` replays the tape
// in reverse and returns gradients for every trainable block together with
// the gradient with respect to the network input.

namespace subspacekit::neuralnet {

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

template <class T>
struct LayerRecord {
  Tensor<T> input;                // input as seen by the layer (after an input-site bias)
  Tensor<T> normalized;           // batch norm: x_hat
  std::vector<T> inv_std;         // batch norm: 1 / sqrt(var + eps) per channel
};

template <class T>
struct Tape {
  NetworkSpec spec;
  Mode mode = Mode::Train;
  std::vector<LayerRecord<T>> records;
  std::size_t batch = 0;
  const NetworkParams<T>* params = nullptr;
  std::uint64_t params_version = 0;
  bool consumed = false;
};

template <class T>
struct ForwardResult {
  Tensor<T> output;
  Tape<T> tape;
  // New running statistics from train-mode batch normalization; apply with
  // commit_running_stats.
  std::vector<ParamBlock<T>> running_updates;
};

template <class T>
struct BackwardResult {
  GradientSet<T> gradients;
  Tensor<T> input_gradient;
};

namespace detail {

struct ConvGeometry {
  std::size_t big_h, big_w, small_h, small_w, pad_top, pad_left;
};

// For a plain convolution the input is the "big" grid and the output the
// "small" one; a transposed convolution swaps the roles.
inline ConvGeometry conv_geometry(const Conv2D& c, const SampleShape& in, const SampleShape& out) {
  ConvGeometry g{};
  if (c.transposed) {
    g.big_h = out.height;
    g.big_w = out.width;
    g.small_h = in.height;
    g.small_w = in.width;
  } else {
    g.big_h = in.height;
    g.big_w = in.width;
    g.small_h = out.height;
    g.small_w = out.width;
  }
  const auto pad_total = [&](std::size_t small, std::size_t big, std::size_t k) -> std::size_t {
    const std::size_t span = (small - 1) * c.stride + k;
    return span > big ? span - big : 0;
  };
  g.pad_top = pad_total(g.small_h, g.big_h, c.kernel_h) / 2;
  g.pad_left = pad_total(g.small_w, g.big_w, c.kernel_w) / 2;
  return g;
}

// Calls f(sh, sw, bh, bw, ky, kx) for every kernel tap that lands inside the
// big grid.
template <class F>
void for_each_tap(const Conv2D& c, const ConvGeometry& g, F&& f) {
  for (std::size_t sh = 0; sh < g.small_h; ++sh) {
    for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
      const std::ptrdiff_t bh = static_cast<std::ptrdiff_t>(sh * c.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
      if (bh < 0 || bh >= static_cast<std::ptrdiff_t>(g.big_h)) continue;
      for (std::size_t sw = 0; sw < g.small_w; ++sw) {
        for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
          const std::ptrdiff_t bw =
              static_cast<std::ptrdiff_t>(sw * c.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (bw < 0 || bw >= static_cast<std::ptrdiff_t>(g.big_w)) continue;
          f(sh, sw, static_cast<std::size_t>(bh), static_cast<std::size_t>(bw), ky, kx);
        }
      }
    }
  }
}

template <class T>
Tensor<T> conv_forward(const Conv2D& c, const Tensor<T>& x, const SampleShape& out_shape, const std::vector<T>& kernel) {
  Tensor<T> y(x.batch(), out_shape);
  const auto g = conv_geometry(c, x.shape(), out_shape);
  const std::size_t ci = c.in_channels, co = c.out_channels;
  numkernel::parallel_for(x.batch(), y.sample_size() * c.kernel_h * c.kernel_w * ci, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      for_each_tap(c, g, [&](std::size_t sh, std::size_t sw, std::size_t bh, std::size_t bw, std::size_t ky, std::size_t kx) {
        const T* w = kernel.data() + (ky * c.kernel_w + kx) * ci * co;
        if (!c.transposed) {
          T* out = &y.at(n, sh, sw, 0);
          const T* in = &x.at(n, bh, bw, 0);
          for (std::size_t i = 0; i < ci; ++i) {
            const T xi = in[i];
            const T* wrow = w + i * co;
            for (std::size_t o = 0; o < co; ++o) out[o] += xi * wrow[o];
          }
        } else {
          T* out = &y.at(n, bh, bw, 0);
          const T* in = &x.at(n, sh, sw, 0);
          for (std::size_t i = 0; i < ci; ++i) {
            const T xi = in[i];
            const T* wrow = w + i * co;
            for (std::size_t o = 0; o < co; ++o) out[o] += xi * wrow[o];
          }
        }
      });
    }
  });
  return y;
}

template <class T>
void conv_backward(const Conv2D& c, const Tensor<T>& x, const Tensor<T>& dy, const std::vector<T>& kernel,
                   Tensor<T>& dx, std::vector<T>& dkernel) {
  const auto g = conv_geometry(c, x.shape(), dy.shape());
  const std::size_t ci = c.in_channels, co = c.out_channels;
  const std::size_t taps = c.kernel_h * c.kernel_w;
  // input gradient: each sample owned by one worker
  numkernel::parallel_for(x.batch(), dy.sample_size() * taps * ci, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      for_each_tap(c, g, [&](std::size_t sh, std::size_t sw, std::size_t bh, std::size_t bw, std::size_t ky, std::size_t kx) {
        const T* w = kernel.data() + (ky * c.kernel_w + kx) * ci * co;
        const T* grad_out = c.transposed ? &dy.at(n, bh, bw, 0) : &dy.at(n, sh, sw, 0);
        T* grad_in = c.transposed ? &dx.at(n, sh, sw, 0) : &dx.at(n, bh, bw, 0);
        for (std::size_t i = 0; i < ci; ++i) {
          const T* wrow = w + i * co;
          T s{0};
          for (std::size_t o = 0; o < co; ++o) s += grad_out[o] * wrow[o];
          grad_in[i] += s;
        }
      });
    }
  });
  // kernel gradient: each (tap, input channel) row owned by one worker, batch
  // summed in order
  numkernel::parallel_for(taps * ci, x.batch() * dy.sample_size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = 0; n < x.batch(); ++n) {
      for_each_tap(c, g, [&](std::size_t sh, std::size_t sw, std::size_t bh, std::size_t bw, std::size_t ky, std::size_t kx) {
        const std::size_t tap = ky * c.kernel_w + kx;
        const std::size_t row_lo = tap * ci;
        const std::size_t row_hi = row_lo + ci;
        if (row_hi <= lo || row_lo >= hi) return;
        const T* grad_out = c.transposed ? &dy.at(n, bh, bw, 0) : &dy.at(n, sh, sw, 0);
        const T* in = c.transposed ? &x.at(n, sh, sw, 0) : &x.at(n, bh, bw, 0);
        for (std::size_t i = std::max(row_lo, lo) - row_lo; i < std::min(row_hi, hi) - row_lo; ++i) {
          T* drow = dkernel.data() + (tap * ci + i) * co;
          const T xi = in[i];
          for (std::size_t o = 0; o < co; ++o) drow[o] += xi * grad_out[o];
        }
      });
    }
  });
}

template <class T>
std::vector<T> channel_sums(const Tensor<T>& t) {
  const std::size_t ch = t.shape().channels;
  std::vector<T> s(ch, T{0});
  const auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) s[i % ch] += v[i];
  return s;
}

}  // namespace detail

/// Runs the network on a batch. Eval mode uses the stored running statistics;
/// train mode normalizes with batch statistics and reports updated running
/// statistics in `running_updates` without modifying `params`. The tape keeps
/// a pointer to `params`, which must outlive it.
template <class T>
ForwardResult<T> forward(const NetworkSpec& spec, const NetworkParams<T>& params, const Tensor<T>& input, Mode mode) {
  const auto shapes = spec.shapes();
  if (input.shape() != spec.input)
    fail(ErrorCode::ShapeMismatch,
         spec.name + ": input shape " + input.shape().to_string() + " does not match " + spec.input.to_string());
  if (input.batch() == 0) fail(ErrorCode::ShapeMismatch, spec.name + ": empty batch");

  ForwardResult<T> result;
  result.tape.spec = spec;
  result.tape.mode = mode;
  result.tape.params = &params;
  result.tape.params_version = params.version();
  result.tape.records.resize(spec.layers.size());
  result.tape.batch = input.batch();

  Tensor<T> x = input;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const Layer& layer = spec.layers[li];
    LayerRecord<T>& rec = result.tape.records[li];
    const SampleShape& out_shape = shapes[li + 1];

    if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      const bool input_bias = !c->has_batchnorm && c->has_bias && c->bias_site == BiasSite::Input;
      if (input_bias) {
        const auto& b = params.block(layer.name + "/bias").values;
        auto v = x.values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += b[i % c->in_channels];
      }
      Tensor<T> y = detail::conv_forward(*c, x, out_shape, params.block(layer.name + "/kernel").values);
      if (c->has_batchnorm) {
        const std::size_t ch = c->out_channels;
        const auto& gamma = params.block(layer.name + "/gamma").values;
        const auto& beta = params.block(layer.name + "/beta").values;
        std::vector<T> mean(ch), var(ch);
        const double count = static_cast<double>(y.size() / ch);
        if (mode == Mode::Train) {
          std::vector<double> sum(ch, 0.0), sq(ch, 0.0);
          const auto v = y.values();
          for (std::size_t i = 0; i < v.size(); ++i) sum[i % ch] += static_cast<double>(v[i]);
          for (std::size_t k = 0; k < ch; ++k) mean[k] = static_cast<T>(sum[k] / count);
          for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = static_cast<double>(v[i] - mean[i % ch]);
            sq[i % ch] += d * d;
          }
          for (std::size_t k = 0; k < ch; ++k) var[k] = static_cast<T>(sq[k] / count);
          ParamBlock<T> rm = params.block(layer.name + "/moving_mean");
          ParamBlock<T> rv = params.block(layer.name + "/moving_variance");
          const double unbias = count > 1 ? count / (count - 1) : 1.0;
          for (std::size_t k = 0; k < ch; ++k) {
            rm.values[k] = static_cast<T>(kBatchNormMomentum * rm.values[k] + (1 - kBatchNormMomentum) * mean[k]);
            rv.values[k] =
                static_cast<T>(kBatchNormMomentum * rv.values[k] + (1 - kBatchNormMomentum) * unbias * var[k]);
          }
          result.running_updates.push_back(std::move(rm));
          result.running_updates.push_back(std::move(rv));
        } else {
          mean = params.block(layer.name + "/moving_mean").values;
          var = params.block(layer.name + "/moving_variance").values;
        }
        rec.inv_std.resize(ch);
        for (std::size_t k = 0; k < ch; ++k)
          rec.inv_std[k] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[k]) + kBatchNormEpsilon));
        rec.normalized = Tensor<T>(y.batch(), y.shape());
        auto yv = y.values();
        auto nv = rec.normalized.values();
        for (std::size_t i = 0; i < yv.size(); ++i) {
          const std::size_t k = i % ch;
          nv[i] = (yv[i] - mean[k]) * rec.inv_std[k];
          yv[i] = gamma[k] * nv[i] + beta[k];
        }
      } else if (c->has_bias && c->bias_site == BiasSite::Output) {
        const auto& b = params.block(layer.name + "/bias").values;
        auto v = y.values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += b[i % c->out_channels];
      }
      rec.input = std::move(x);
      x = std::move(y);
    } else if (const auto* d = std::get_if<Dense>(&layer.kind)) {
      const auto& w = params.block(layer.name + "/kernel").values;
      Tensor<T> y(x.batch(), out_shape);
      const std::size_t in_dim = d->in_dim, out_dim = d->out_dim;
      numkernel::parallel_for(x.batch(), in_dim * out_dim, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n) {
          const auto xin = x.sample(n);
          auto out = y.sample(n);
          for (std::size_t i = 0; i < in_dim; ++i) {
            const T xi = xin[i];
            const T* wrow = w.data() + i * out_dim;
            for (std::size_t o = 0; o < out_dim; ++o) out[o] += xi * wrow[o];
          }
        }
      });
      if (d->has_bias) {
        const auto& b = params.block(layer.name + "/bias").values;
        for (std::size_t n = 0; n < y.batch(); ++n) {
          auto out = y.sample(n);
          for (std::size_t o = 0; o < out_dim; ++o) out[o] += b[o];
        }
      }
      rec.input = std::move(x);
      x = std::move(y);
    } else if (holds<Activation>(layer)) {
      rec.input = x;
      for (T& v : x.values()) v = v > T{0} ? v : T{0};
    } else if (holds<StopGradientMarker>(layer)) {
      // value passes through unchanged
    } else if (const auto* s = std::get_if<SelfExpressive>(&layer.kind)) {
      if (x.batch() != s->n)
        fail(ErrorCode::ShapeMismatch, layer.name + ": batch of " + std::to_string(x.batch()) +
                                           " samples but the layer was built for " + std::to_string(s->n));
      const auto& theta = params.block(layer.name + "/coefficients").values;
      Tensor<T> y(x.batch(), x.shape());
      const std::size_t n = s->n, f = x.sample_size();
      numkernel::parallel_for(n, n * f, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          auto out = y.sample(i);
          for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const T t = theta[i * n + j];
            if (t == T{0}) continue;
            const auto zj = x.sample(j);
            for (std::size_t k = 0; k < f; ++k) out[k] += t * zj[k];
          }
        }
      });
      rec.input = std::move(x);
      x = std::move(y);
    }
  }
  result.output = std::move(x);
  return result;
}

/// Writes train-mode running statistics back into `params`.
template <class T>
void commit_running_stats(NetworkParams<T>& params, const std::vector<ParamBlock<T>>& updates) {
  for (const auto& u : updates) params.mutable_block(u.name).values = u.values;
}

/// Reverse pass over a tape. Throws StaleTape if the tape was already
/// consumed or its parameters changed since the forward pass.
template <class T>
BackwardResult<T> backward(Tape<T>& tape, const Tensor<T>& loss_gradient) {
  if (tape.consumed) fail(ErrorCode::StaleTape, "tape was already used for a backward pass");
  if (tape.params == nullptr || tape.params->version() != tape.params_version)
    fail(ErrorCode::StaleTape, "parameters changed after the forward pass");
  const NetworkSpec& spec = tape.spec;
  const NetworkParams<T>& params = *tape.params;
  const auto shapes = spec.shapes();
  if (loss_gradient.shape() != shapes.back() || loss_gradient.batch() != tape.batch)
    fail(ErrorCode::ShapeMismatch, spec.name + ": loss gradient shape does not match the network output");
  tape.consumed = true;

  BackwardResult<T> result;
  std::vector<ParamBlock<T>> grads;
  Tensor<T> dy = loss_gradient;
  const std::size_t batch = dy.batch();
  bool blocked = false;  // set once a StopGradientMarker has been crossed

  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const Layer& layer = spec.layers[li];
    LayerRecord<T>& rec = tape.records[li];
    const SampleShape& in_shape = shapes[li];

    auto zero_block = [&](const std::string& name) {
      const auto& p = params.block(name);
      return ParamBlock<T>{p.name, p.dims, std::vector<T>(p.values.size(), T{0})};
    };

    if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      ParamBlock<T> dk = zero_block(layer.name + "/kernel");
      if (c->has_batchnorm) {
        ParamBlock<T> dgamma = zero_block(layer.name + "/gamma");
        ParamBlock<T> dbeta = zero_block(layer.name + "/beta");
        const auto& gamma = params.block(layer.name + "/gamma").values;
        const std::size_t ch = c->out_channels;
        const auto dv = dy.values();
        const auto nv = rec.normalized.values();
        std::vector<double> sum_dxhat(ch, 0.0), sum_dxhat_xhat(ch, 0.0);
        for (std::size_t i = 0; i < dv.size(); ++i) {
          const std::size_t k = i % ch;
          dgamma.values[k] += dv[i] * nv[i];
          dbeta.values[k] += dv[i];
          const double dxhat = static_cast<double>(dv[i] * gamma[k]);
          sum_dxhat[k] += dxhat;
          sum_dxhat_xhat[k] += dxhat * static_cast<double>(nv[i]);
        }
        Tensor<T> dpre(dy.batch(), dy.shape());
        auto pv = dpre.values();
        if (tape.mode == Mode::Train) {
          const double count = static_cast<double>(dv.size() / ch);
          for (std::size_t i = 0; i < dv.size(); ++i) {
            const std::size_t k = i % ch;
            const double dxhat = static_cast<double>(dv[i] * gamma[k]);
            pv[i] = static_cast<T>(static_cast<double>(rec.inv_std[k]) / count *
                                   (count * dxhat - sum_dxhat[k] - static_cast<double>(nv[i]) * sum_dxhat_xhat[k]));
          }
        } else {
          for (std::size_t i = 0; i < dv.size(); ++i) {
            const std::size_t k = i % ch;
            pv[i] = dv[i] * gamma[k] * rec.inv_std[k];
          }
        }
        grads.push_back(std::move(dgamma));
        grads.push_back(std::move(dbeta));
        dy = std::move(dpre);
      } else if (c->has_bias && c->bias_site == BiasSite::Output) {
        ParamBlock<T> db = zero_block(layer.name + "/bias");
        const auto sums = detail::channel_sums(dy);
        for (std::size_t k = 0; k < sums.size(); ++k) db.values[k] = sums[k];
        grads.push_back(std::move(db));
      }
      Tensor<T> dx(batch, in_shape);
      detail::conv_backward(*c, rec.input, dy, params.block(layer.name + "/kernel").values, dx, dk.values);
      grads.push_back(std::move(dk));
      if (!c->has_batchnorm && c->has_bias && c->bias_site == BiasSite::Input) {
        ParamBlock<T> db = zero_block(layer.name + "/bias");
        const auto sums = detail::channel_sums(dx);
        for (std::size_t k = 0; k < sums.size(); ++k) db.values[k] = sums[k];
        grads.push_back(std::move(db));
      }
      dy = std::move(dx);
    } else if (const auto* d = std::get_if<Dense>(&layer.kind)) {
      const auto& w = params.block(layer.name + "/kernel").values;
      ParamBlock<T> dk = zero_block(layer.name + "/kernel");
      const std::size_t in_dim = d->in_dim, out_dim = d->out_dim;
      Tensor<T> dx(batch, in_shape);
      numkernel::parallel_for(batch, in_dim * out_dim, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = lo; n < hi; ++n) {
          const auto g = dy.sample(n);
          auto out = dx.sample(n);
          for (std::size_t i = 0; i < in_dim; ++i) {
            const T* wrow = w.data() + i * out_dim;
            T s{0};
            for (std::size_t o = 0; o < out_dim; ++o) s += g[o] * wrow[o];
            out[i] = s;
          }
        }
      });
      numkernel::parallel_for(in_dim, batch * out_dim, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = 0; n < batch; ++n) {
          const auto xin = rec.input.sample(n);
          const auto g = dy.sample(n);
          for (std::size_t i = lo; i < hi; ++i) {
            const T xi = xin[i];
            T* drow = dk.values.data() + i * out_dim;
            for (std::size_t o = 0; o < out_dim; ++o) drow[o] += xi * g[o];
          }
        }
      });
      if (d->has_bias) {
        ParamBlock<T> db = zero_block(layer.name + "/bias");
        for (std::size_t n = 0; n < batch; ++n) {
          const auto g = dy.sample(n);
          for (std::size_t o = 0; o < out_dim; ++o) db.values[o] += g[o];
        }
        grads.push_back(std::move(db));
      }
      grads.push_back(std::move(dk));
      dy = std::move(dx);
    } else if (holds<Activation>(layer)) {
      auto dv = dy.values();
      const auto xv = rec.input.values();
      for (std::size_t i = 0; i < dv.size(); ++i)
        if (!(xv[i] > T{0})) dv[i] = T{0};
    } else if (holds<StopGradientMarker>(layer)) {
      for (T& v : dy.values()) v = T{0};
      blocked = true;
    } else if (const auto* s = std::get_if<SelfExpressive>(&layer.kind)) {
      const auto& theta = params.block(layer.name + "/coefficients").values;
      ParamBlock<T> dtheta = zero_block(layer.name + "/coefficients");
      const std::size_t n = s->n, f = dy.sample_size();
      Tensor<T> dz(batch, in_shape);
      numkernel::parallel_for(n, n * f, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const auto gi = dy.sample(i);
          for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;  // diagonal is structurally zero
            const auto zj = rec.input.sample(j);
            T acc{0};
            for (std::size_t k = 0; k < f; ++k) acc += gi[k] * zj[k];
            dtheta.values[i * n + j] = acc;
          }
        }
      });
      numkernel::parallel_for(n, n * f, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t j = lo; j < hi; ++j) {
          auto out = dz.sample(j);
          for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const T t = theta[i * n + j];
            if (t == T{0}) continue;
            const auto gi = dy.sample(i);
            for (std::size_t k = 0; k < f; ++k) out[k] += t * gi[k];
          }
        }
      });
      grads.push_back(std::move(dtheta));
      dy = std::move(dz);
    }
  }
  if (blocked) {
    // Layers upstream of a stop-gradient see an exactly zero signal; make the
    // blocks exact zeros rather than relying on 0 * x arithmetic.
    std::size_t stop_at = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li)
      if (holds<StopGradientMarker>(spec.layers[li])) stop_at = li;
    for (auto& g : grads) {
      for (std::size_t li = 0; li < stop_at; ++li)
        if (g.name.starts_with(spec.layers[li].name + "/")) std::fill(g.values.begin(), g.values.end(), T{0});
    }
  }
  // present gradients in parameter order
  for (const auto& p : params.blocks()) {
    for (auto& g : grads) {
      if (g.name == p.name) {
        result.gradients.blocks.push_back(std::move(g));
        break;
      }
    }
  }
  result.input_gradient = std::move(dy);
  return result;
}

}  // namespace subspacekit::neuralnet
