#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/params.hpp"

namespace subspacekit::neuralnet {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, std::vector<T>> first_moment;
  std::map<std::string, std::vector<T>> second_moment;
};

/// One bias-corrected Adam update of every block named in `grads`.
template <class T>
void adam_step(NetworkParams<T>& params, const GradientSet<T>& grads, AdamState<T>& state, const AdamHyper& hyper) {
  for (const auto& g : grads.blocks) {
    const auto* p = params.find(g.name);
    if (!p || p->dims != g.dims) fail(ErrorCode::ShapeMismatch, "adam_step: gradient block " + g.name + " has no match");
    if (is_running_statistic(g.name)) fail(ErrorCode::ShapeMismatch, "adam_step: " + g.name + " is not trainable");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (const auto& g : grads.blocks) {
    auto& m = state.first_moment[g.name];
    auto& v = state.second_moment[g.name];
    if (m.empty()) {
      m.assign(g.values.size(), T{0});
      v.assign(g.values.size(), T{0});
    }
    auto& values = params.mutable_block(g.name).values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = static_cast<double>(g.values[i]);
      const double mi = hyper.beta1 * static_cast<double>(m[i]) + (1.0 - hyper.beta1) * gi;
      const double vi = hyper.beta2 * static_cast<double>(v[i]) + (1.0 - hyper.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      values[i] = static_cast<T>(static_cast<double>(values[i]) - hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
    }
  }
}

}  // namespace subspacekit::neuralnet
