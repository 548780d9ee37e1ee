#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/adam.hpp"
#include "subspacekit/neuralnet/engine.hpp"
#include "subspacekit/neuralnet/losses.hpp"
#include "subspacekit/neuralnet/network_spec.hpp"
#include "subspacekit/neuralnet/params.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/selfexpress/closed_form.hpp"

// Full-batch training loops.
//
//  * pretrain_autoencoder: plain reconstruction, ||X - Dec(Enc(X))||^2.
//  * fit_dcfsc: every epoch encodes X, solves the ridge self-expression of
//    the latent codes in closed form, treats the coefficients as constants
//    (stop-gradient), decodes B * latent and takes an Adam step on the
//    reconstruction error. No N x N parameters exist.
//  * fit_dsc_baseline: the learnable N x N self-expressive layer trained
//    jointly with the auto-encoder on the three-term objective.

namespace subspacekit::pipeline {

using neuralnet::GradientSet;
using neuralnet::NetworkParams;
using neuralnet::NetworkSpec;
using numkernel::Matrix;
using selfexpress::CoefficientMatrix;

/// Appends "epoch<TAB>loss<TAB>seconds" records to a stream.
class TrainingLog {
 public:
  explicit TrainingLog(std::ostream& out) : out_(&out) {}

  void record(std::size_t epoch, double loss, double seconds) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.6f\n", epoch, loss, seconds);
    *out_ << buf;
  }

 private:
  std::ostream* out_;
};

struct TrainConfig {
  double lambda = 0.0;   // closed-form ridge weight
  double lambda1 = 0.0;  // coefficient penalty (learnable layer)
  double lambda2 = 0.0;  // self-expression weight (learnable layer)
  double learning_rate = 1e-3;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  int numeric_width = 64;  // 32 or 64
  neuralnet::CoefficientNorm coefficient_norm = neuralnet::CoefficientNorm::SquaredFrobenius;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  TrainingLog* log = nullptr;

  neuralnet::AdamHyper adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct PretrainResult {
  NetworkParams<double> params;
  std::vector<double> loss_history;
};

struct FitResult {
  CoefficientMatrix coefficient;
  NetworkParams<double> final_params;
  std::vector<double> loss_history;
};

/// Loss, gradients and coefficients of a single training step at fixed
/// parameters. Exposed so tests can compare against finite differences.
template <class T>
struct StepEvaluation {
  double loss = 0.0;
  GradientSet<T> gradients;
  CoefficientMatrix coefficient;
  std::vector<neuralnet::ParamBlock<T>> running_updates;
};

namespace detail {

inline void validate_config(const TrainConfig& c) {
  if (c.numeric_width != 32 && c.numeric_width != 64)
    fail(ErrorCode::InvalidArgument, "numeric width must be 32 or 64");
  if (!(c.learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be positive");
}

inline void require_finite(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch));
}

template <class T>
neuralnet::Tensor<T> difference_gradient(const neuralnet::Tensor<T>& output, const neuralnet::Tensor<T>& target,
                                         double scale) {
  neuralnet::Tensor<T> g(output.batch(), output.shape());
  auto gv = g.values();
  const auto a = output.values();
  const auto b = target.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = static_cast<T>(scale * (static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return g;
}

// Y = C * Z over flattened samples, with C in double.
template <class T>
neuralnet::Tensor<T> mix_samples(const Matrix& c, const neuralnet::Tensor<T>& z, bool transpose_c) {
  neuralnet::Tensor<T> y(z.batch(), z.shape());
  const std::size_t n = z.batch(), f = z.sample_size();
  numkernel::parallel_for(n, n * f, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto out = y.sample(i);
      for (std::size_t j = 0; j < n; ++j) {
        const double cij = transpose_c ? c(j, i) : c(i, j);
        if (cij == 0.0) continue;
        const T w = static_cast<T>(cij);
        const auto zj = z.sample(j);
        for (std::size_t k = 0; k < f; ++k) out[k] += w * zj[k];
      }
    }
  });
  return y;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <class T>
NetworkParams<T> starting_params(const NetworkSpec& spec, const TrainConfig& config,
                                 const std::optional<NetworkParams<double>>& initial) {
  NetworkParams<double> base = initial ? *initial : neuralnet::init_params<double>(spec, config.seed);
  // blocks missing from a supplied checkpoint (e.g. the self-expressive
  // layer after pretraining) come from the seeded initializer
  if (initial) {
    const auto fresh = neuralnet::init_params<double>(spec, config.seed);
    for (const auto& b : fresh.blocks())
      if (!base.find(b.name)) base.add_block(b);
  }
  neuralnet::validate_params(spec, base);
  if constexpr (std::is_same_v<T, double>)
    return base;
  else
    return neuralnet::cast_params<T>(base);
}

}  // namespace detail

/// Forward/backward of the closed-form objective at the current parameters.
/// B is computed from the latent codes and then held constant: gradients
/// reach the encoder only through the latent operand of B * latent.
template <class T>
StepEvaluation<T> dcfsc_step(const NetworkSpec& spec, const NetworkParams<T>& params, const neuralnet::Tensor<T>& x,
                             double lambda) {
  const NetworkSpec encoder = spec.encoder();
  const NetworkSpec decoder = spec.decoder();
  auto enc = neuralnet::forward(encoder, params, x, neuralnet::Mode::Train);
  const Matrix latent = neuralnet::matrix_from_tensor(enc.output);
  CoefficientMatrix b = selfexpress::solve_self_expression(latent, lambda);
  // stop-gradient: from here on B is a constant
  const Matrix& b_bar = b.values();
  auto mixed = detail::mix_samples(b_bar, enc.output, false);
  auto dec = neuralnet::forward(decoder, params, mixed, neuralnet::Mode::Train);

  StepEvaluation<T> step;
  step.loss = neuralnet::squared_distance<T>(x.values(), dec.output.values());
  auto dec_back = neuralnet::backward(dec.tape, detail::difference_gradient(dec.output, x, 2.0));
  auto latent_grad = detail::mix_samples(b_bar, dec_back.input_gradient, true);
  auto enc_back = neuralnet::backward(enc.tape, latent_grad);
  step.gradients = std::move(enc_back.gradients);
  step.gradients.merge(dec_back.gradients);
  step.coefficient = std::move(b);
  step.running_updates = std::move(enc.running_updates);
  for (auto& u : dec.running_updates) step.running_updates.push_back(std::move(u));
  return step;
}

/// Forward/backward of the learnable-layer objective
///   ||X - Dec(Theta Z)||^2 + lambda1 ||Theta||^2 + (lambda2/2) ||Z - Theta Z||^2.
template <class T>
StepEvaluation<T> dsc_step(const NetworkSpec& spec, const NetworkParams<T>& params, const neuralnet::Tensor<T>& x,
                           double lambda1, double lambda2, neuralnet::CoefficientNorm norm) {
  const auto se_index = spec.self_expressive_index();
  if (!se_index) fail(ErrorCode::ShapeMismatch, spec.name + ": no self-expressive layer");
  const NetworkSpec encoder = spec.encoder();
  const NetworkSpec sel = spec.slice(*se_index, *se_index + 1, "/self-expressive");
  const NetworkSpec decoder = spec.decoder();
  const std::string theta_name = spec.layers[*se_index].name + "/coefficients";

  auto enc = neuralnet::forward(encoder, params, x, neuralnet::Mode::Train);
  auto se = neuralnet::forward(sel, params, enc.output, neuralnet::Mode::Train);
  auto dec = neuralnet::forward(decoder, params, se.output, neuralnet::Mode::Train);

  const auto& theta = params.block(theta_name).values;
  double theta_sq = 0.0;
  for (T v : theta) theta_sq += static_cast<double>(v) * static_cast<double>(v);
  const double theta_norm = std::sqrt(theta_sq);

  StepEvaluation<T> step;
  const double recon = neuralnet::squared_distance<T>(x.values(), dec.output.values());
  const double self_expr = neuralnet::squared_distance<T>(enc.output.values(), se.output.values());
  const double penalty = norm == neuralnet::CoefficientNorm::SquaredFrobenius ? theta_sq : theta_norm;
  step.loss = recon + lambda1 * penalty + 0.5 * lambda2 * self_expr;

  auto dec_back = neuralnet::backward(dec.tape, detail::difference_gradient(dec.output, x, 2.0));
  // d/d(ThetaZ) of (lambda2/2)||Z - ThetaZ||^2 = lambda2 (ThetaZ - Z)
  auto d_mixed = dec_back.input_gradient;
  {
    auto dv = d_mixed.values();
    const auto zs = se.output.values();
    const auto z = enc.output.values();
    for (std::size_t i = 0; i < dv.size(); ++i)
      dv[i] += static_cast<T>(lambda2 * (static_cast<double>(zs[i]) - static_cast<double>(z[i])));
  }
  auto se_back = neuralnet::backward(se.tape, d_mixed);
  auto d_latent = se_back.input_gradient;
  {
    auto dv = d_latent.values();
    const auto zs = se.output.values();
    const auto z = enc.output.values();
    for (std::size_t i = 0; i < dv.size(); ++i)
      dv[i] += static_cast<T>(lambda2 * (static_cast<double>(z[i]) - static_cast<double>(zs[i])));
  }
  auto enc_back = neuralnet::backward(enc.tape, d_latent);

  const std::size_t n = std::get<neuralnet::SelfExpressive>(spec.layers[*se_index].kind).n;
  if (auto* dtheta = se_back.gradients.find(theta_name)) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (i / n == i % n) continue;
      double g = 0.0;
      if (norm == neuralnet::CoefficientNorm::SquaredFrobenius)
        g = 2.0 * lambda1 * static_cast<double>(theta[i]);
      else if (theta_norm > 0.0)
        g = lambda1 * static_cast<double>(theta[i]) / theta_norm;
      dtheta->values[i] += static_cast<T>(g);
    }
  }

  step.gradients = std::move(enc_back.gradients);
  step.gradients.merge(se_back.gradients);
  step.gradients.merge(dec_back.gradients);
  Matrix c(n, n);
  for (std::size_t i = 0; i < theta.size(); ++i) c(i / n, i % n) = static_cast<double>(theta[i]);
  step.coefficient = CoefficientMatrix::with_zero_diagonal(std::move(c));
  step.running_updates = std::move(enc.running_updates);
  for (auto& u : dec.running_updates) step.running_updates.push_back(std::move(u));
  return step;
}

namespace detail {

template <class T>
neuralnet::Tensor<T> input_tensor(const Matrix& x, const NetworkSpec& spec) {
  if (x.cols() != spec.input.size())
    fail(ErrorCode::ShapeMismatch, spec.name + ": data has " + std::to_string(x.cols()) + " features, network expects " +
                                       std::to_string(spec.input.size()));
  return neuralnet::tensor_from_matrix<T>(x, spec.input);
}

template <class T>
NetworkParams<double> to_double(const NetworkParams<T>& p) {
  if constexpr (std::is_same_v<T, double>)
    return p;
  else
    return neuralnet::cast_params<double>(p);
}

template <class T>
PretrainResult pretrain_impl(const NetworkSpec& spec, const Matrix& x, const TrainConfig& config,
                             const std::optional<NetworkParams<double>>& initial) {
  const NetworkSpec ae = spec.autoencoder();
  auto params = starting_params<T>(ae, config, initial);
  const auto input = input_tensor<T>(x, ae);
  neuralnet::AdamState<T> adam;
  PretrainResult result;
  Stopwatch clock;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto fwd = neuralnet::forward(ae, params, input, neuralnet::Mode::Train);
    const double loss = neuralnet::squared_distance<T>(input.values(), fwd.output.values());
    require_finite(loss, epoch);
    auto bwd = neuralnet::backward(fwd.tape, difference_gradient(fwd.output, input, 2.0));
    neuralnet::adam_step(params, bwd.gradients, adam, config.adam());
    neuralnet::commit_running_stats(params, fwd.running_updates);
    result.loss_history.push_back(loss);
    if (config.log) config.log->record(epoch, loss, clock.seconds());
  }
  result.params = to_double(params);
  return result;
}

template <class T>
FitResult dcfsc_impl(const NetworkSpec& spec, const Matrix& x, const TrainConfig& config,
                     const std::optional<NetworkParams<double>>& initial) {
  if (!(config.lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "lambda must be positive");
  if (spec.self_expressive_index())
    fail(ErrorCode::ShapeMismatch, spec.name + ": closed-form training takes a network without a self-expressive layer");
  auto params = starting_params<T>(spec, config, initial);
  const auto input = input_tensor<T>(x, spec);
  neuralnet::AdamState<T> adam;
  FitResult result;
  Stopwatch clock;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto step = dcfsc_step(spec, params, input, config.lambda);
    require_finite(step.loss, epoch);
    neuralnet::adam_step(params, step.gradients, adam, config.adam());
    neuralnet::commit_running_stats(params, step.running_updates);
    result.coefficient = std::move(step.coefficient);
    result.loss_history.push_back(step.loss);
    if (config.log) config.log->record(epoch, step.loss, clock.seconds());
  }
  if (config.epochs == 0) {
    const auto enc = neuralnet::forward(spec.encoder(), params, input, neuralnet::Mode::Train);
    result.coefficient = selfexpress::solve_self_expression(neuralnet::matrix_from_tensor(enc.output), config.lambda);
  }
  result.final_params = to_double(params);
  return result;
}

template <class T>
FitResult dsc_impl(const NetworkSpec& spec, const Matrix& x, const TrainConfig& config,
                   const std::optional<NetworkParams<double>>& initial) {
  if (config.lambda1 < 0.0 || config.lambda2 < 0.0)
    fail(ErrorCode::InvalidArgument, "lambda1 and lambda2 must be non-negative");
  const auto se = spec.self_expressive_index();
  if (!se) fail(ErrorCode::ShapeMismatch, spec.name + ": no self-expressive layer");
  if (std::get<neuralnet::SelfExpressive>(spec.layers[*se].kind).n != x.rows())
    fail(ErrorCode::ShapeMismatch, spec.name + ": self-expressive layer size differs from the sample count");
  auto params = starting_params<T>(spec, config, initial);
  const auto input = input_tensor<T>(x, spec);
  neuralnet::AdamState<T> adam;
  FitResult result;
  Stopwatch clock;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto step = dsc_step(spec, params, input, config.lambda1, config.lambda2, config.coefficient_norm);
    require_finite(step.loss, epoch);
    neuralnet::adam_step(params, step.gradients, adam, config.adam());
    neuralnet::commit_running_stats(params, step.running_updates);
    result.loss_history.push_back(step.loss);
    if (config.log) config.log->record(epoch, step.loss, clock.seconds());
  }
  const std::string theta_name = spec.layers[*se].name + "/coefficients";
  const auto& theta = params.block(theta_name).values;
  const std::size_t n = x.rows();
  Matrix c(n, n);
  for (std::size_t i = 0; i < theta.size(); ++i) c(i / n, i % n) = static_cast<double>(theta[i]);
  result.coefficient = CoefficientMatrix::with_zero_diagonal(std::move(c));
  result.final_params = to_double(params);
  return result;
}

}  // namespace detail

/// Reconstruction-only training of the auto-encoder part of `spec`. The
/// returned parameters cover the auto-encoder blocks only.
inline PretrainResult pretrain_autoencoder(const NetworkSpec& spec, const Matrix& x, const TrainConfig& config,
                                           const std::optional<NetworkParams<double>>& initial = std::nullopt) {
  detail::validate_config(config);
  return config.numeric_width == 32 ? detail::pretrain_impl<float>(spec, x, config, initial)
                                    : detail::pretrain_impl<double>(spec, x, config, initial);
}

/// Closed-form self-expressive training. Rows of `x` are samples. The
/// returned coefficients are those computed in the last epoch.
inline FitResult fit_dcfsc(const NetworkSpec& spec, const Matrix& x, const TrainConfig& config,
                           const std::optional<NetworkParams<double>>& initial = std::nullopt) {
  detail::validate_config(config);
  return config.numeric_width == 32 ? detail::dcfsc_impl<float>(spec, x, config, initial)
                                    : detail::dcfsc_impl<double>(spec, x, config, initial);
}

/// Learnable self-expressive layer baseline. `spec` must contain a
/// SelfExpressive layer sized to the number of rows of `x`.
inline FitResult fit_dsc_baseline(const NetworkSpec& spec, const Matrix& x, const TrainConfig& config,
                                  const std::optional<NetworkParams<double>>& initial = std::nullopt) {
  detail::validate_config(config);
  return config.numeric_width == 32 ? detail::dsc_impl<float>(spec, x, config, initial)
                                    : detail::dsc_impl<double>(spec, x, config, initial);
}

}  // namespace subspacekit::pipeline
