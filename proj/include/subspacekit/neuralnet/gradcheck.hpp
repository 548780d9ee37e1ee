#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "subspacekit/neuralnet/engine.hpp"

namespace subspacekit::neuralnet {

/// Scalar loss of a network output together with its gradient.
struct LossAndGradient {
  double loss = 0.0;
  Tensor<double> gradient;
};

using OutputLoss = std::function<LossAndGradient(const Tensor<double>&)>;

struct BlockCheck {
  std::string name;
  double relative_error = 0.0;  // ||analytic - numeric||_2 / max(||numeric||_2, floor)
  double max_abs_error = 0.0;
  double numeric_norm = 0.0;
};

/// ||a - b||_2 / max(||b||_2, floor).
inline double relative_l2_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), floor);
}

/// Compares reverse-mode gradients with central finite differences for every
/// trainable block (and the input, reported as "input"). 64-bit only.
inline std::vector<BlockCheck> check_gradients(const NetworkSpec& spec, const NetworkParams<double>& params,
                                               const Tensor<double>& input, Mode mode, const OutputLoss& loss,
                                               double step = 1e-5) {
  auto fwd = forward(spec, params, input, mode);
  const auto lg = loss(fwd.output);
  auto bwd = backward(fwd.tape, lg.gradient);

  auto eval = [&](const NetworkParams<double>& p, const Tensor<double>& x) {
    return loss(forward(spec, p, x, mode).output).loss;
  };

  std::vector<BlockCheck> out;
  for (const auto& g : bwd.gradients.blocks) {
    NetworkParams<double> probe = params;
    std::vector<double> numeric(g.values.size());
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      auto& v = probe.mutable_block(g.name).values;
      const double orig = v[i];
      v[i] = orig + step;
      const double up = eval(probe, input);
      probe.mutable_block(g.name).values[i] = orig - step;
      const double down = eval(probe, input);
      probe.mutable_block(g.name).values[i] = orig;
      numeric[i] = (up - down) / (2 * step);
    }
    BlockCheck c{g.name, relative_l2_error(g.values, numeric), 0.0, 0.0};
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      c.max_abs_error = std::max(c.max_abs_error, std::abs(g.values[i] - numeric[i]));
      c.numeric_norm += numeric[i] * numeric[i];
    }
    c.numeric_norm = std::sqrt(c.numeric_norm);
    out.push_back(c);
  }

  Tensor<double> probe_in = input;
  std::vector<double> numeric(input.size()), analytic(bwd.input_gradient.values().begin(), bwd.input_gradient.values().end());
  for (std::size_t i = 0; i < input.size(); ++i) {
    auto v = probe_in.values();
    const double orig = v[i];
    v[i] = orig + step;
    const double up = eval(params, probe_in);
    v[i] = orig - step;
    const double down = eval(params, probe_in);
    v[i] = orig;
    numeric[i] = (up - down) / (2 * step);
  }
  BlockCheck c{"input", relative_l2_error(analytic, numeric), 0.0, 0.0};
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    c.max_abs_error = std::max(c.max_abs_error, std::abs(analytic[i] - numeric[i]));
    c.numeric_norm += numeric[i] * numeric[i];
  }
  c.numeric_norm = std::sqrt(c.numeric_norm);
  out.push_back(c);
  return out;
}

/// sum_i w_i * y_i^2 / 2, with the weights repeated cyclically over the output.
inline OutputLoss weighted_square_loss(std::vector<double> weights) {
  return [weights = std::move(weights)](const Tensor<double>& y) {
    LossAndGradient r{0.0, Tensor<double>(y.batch(), y.shape())};
    const auto v = y.values();
    auto g = r.gradient.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double w = weights[i % weights.size()];
      r.loss += 0.5 * w * v[i] * v[i];
      g[i] = w * v[i];
    }
    return r;
  };
}

}  // namespace subspacekit::neuralnet
