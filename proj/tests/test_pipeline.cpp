#include <gtest/gtest.h>

#include <cmath>
#include <regex>
#include <sstream>

#include "oracles.hpp"
#include "subspacekit/subspacekit.hpp"

using namespace subspacekit;
using namespace subspacekit::neuralnet;
using numkernel::Matrix;
using numkernel::SplitMix64;
using pipeline::TrainConfig;

namespace {

evaldata::SyntheticData four_subspaces(std::uint64_t seed, std::size_t per_class = 40) {
  evaldata::SyntheticSpec s;
  s.k = 4;
  s.subspace_dim = 3;
  s.points_per_subspace = per_class;
  s.ambient_dim = 30;
  s.seed = seed;
  return evaldata::generate_subspaces(s);
}

NetworkSpec with_self_expressive(NetworkSpec spec, std::size_t n) {
  spec.layers.insert(spec.layers.begin() + static_cast<std::ptrdiff_t>(spec.encoder_depth),
                     Layer{"self-expressive", SelfExpressive{n}});
  return spec;
}

NetworkSpec identity_pair(std::size_t d, bool freeze_encoder) {
  NetworkSpec s;
  s.name = "identity";
  s.input = {1, 1, d};
  s.layers = {{"enc", Dense{d, d, false, DenseInit::Identity}}};
  if (freeze_encoder) s.layers.push_back({"freeze", StopGradientMarker{}});
  s.encoder_depth = s.layers.size();
  s.layers.push_back({"dec", Dense{d, d, false, DenseInit::Identity}});
  return s;
}


/// Central differences of `loss` over every entry listed in `analytic`,
/// returning the relative error over the concatenated vector.
double fd_relative_error(NetworkParams<double> params, const GradientSet<double>& analytic,
                         const std::function<double(const NetworkParams<double>&)>& loss, double h = 1e-6) {
  std::vector<double> a, numeric;
  for (const auto& g : analytic.blocks) {
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      auto& v = params.mutable_block(g.name).values[i];
      const double orig = v;
      v = orig + h;
      const double up = loss(params);
      v = orig - h;
      const double down = loss(params);
      v = orig;
      a.push_back(g.values[i]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  return oracle::relative_error(a, numeric);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Pretrain, ZeroEpochsReturnsInitialization) {
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  const auto data = four_subspaces(0, 5);
  TrainConfig cfg;
  cfg.seed = 9;
  const auto r = pipeline::pretrain_autoencoder(spec, data.data, cfg);
  EXPECT_TRUE(r.params.same_values(init_params(spec, 9)));
  EXPECT_TRUE(r.loss_history.empty());
}

TEST(Pretrain, LinearAutoencoderFitsRankOneData) {
  NetworkSpec spec;
  spec.name = "rank1";
  spec.input = {1, 1, 6};
  spec.layers = {{"enc", Dense{6, 1, false}}, {"dec", Dense{1, 6, false}}};
  spec.encoder_depth = 1;
  SplitMix64 rng(40);
  const Matrix u = oracle::random_matrix(10, 1, rng), v = oracle::random_matrix(1, 6, rng);
  const Matrix x = oracle::naive_matmul(u, v);
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  const auto r = pipeline::pretrain_autoencoder(spec, x, cfg);
  ASSERT_EQ(r.loss_history.size(), 500u);
  EXPECT_LT(r.loss_history.back(), 1e-3 * r.loss_history.front());
}

TEST(Dcfsc, FrozenIdentityEncoderMatchesShallowAtEveryEpoch) {
  const auto data = four_subspaces(1, 6);
  const double lambda = 0.5;
  const auto shallow = selfexpress::solve_self_expression(data.data, lambda);
  for (std::size_t epochs : {0u, 1u, 3u, 10u}) {
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.epochs = epochs;
    const auto r = pipeline::fit_dcfsc(identity_pair(30, true), data.data, cfg);
    EXPECT_EQ(r.coefficient.values(), shallow.values()) << epochs << " epochs";
  }
  // without the freeze the first epoch still sees the initial encoder
  TrainConfig cfg;
  cfg.lambda = lambda;
  cfg.epochs = 1;
  const auto r = pipeline::fit_dcfsc(identity_pair(30, false), data.data, cfg);
  EXPECT_EQ(r.coefficient.values(), shallow.values());
}

TEST(Dcfsc, StopGradientMatchesFrozenCoefficientSurrogate) {
  const auto spec = make_preset("mlp-small", {std::nullopt, 6, std::nullopt}).spec;
  SplitMix64 rng(41);
  const Matrix x = oracle::random_matrix(12, 6, rng);
  auto params = init_params(spec, 41);
  const auto input = tensor_from_matrix<double>(x, spec.input);
  const double lambda = 0.3;
  const auto step = pipeline::dcfsc_step(spec, params, input, lambda);
  const Matrix b0 = step.coefficient.values();
  const auto encoder = spec.encoder(), decoder = spec.decoder();
  auto surrogate = [&](const NetworkParams<double>& p) {
    const auto z = forward(encoder, p, input, Mode::Train).output;
    const auto mixed = pipeline::detail::mix_samples(b0, z, false);
    const auto out = forward(decoder, p, mixed, Mode::Train).output;
    return squared_distance<double>(input.values(), out.values());
  };
  EXPECT_DOUBLE_EQ(surrogate(params), step.loss);
  EXPECT_LE(fd_relative_error(params, step.gradients, surrogate), 1e-4);
  // the encoder really receives gradient through the latent operand
  const auto* g = step.gradients.find("enc-1/kernel");
  ASSERT_NE(g, nullptr);
  EXPECT_GT(numkernel::max_abs(Matrix(1, g->values.size(), g->values)), 0.0);
}

TEST(Dsc, StepGradientMatchesFiniteDifferences) {
  const std::size_t n = 8;
  const auto spec = with_self_expressive(make_preset("mlp-small", {std::nullopt, 5, std::nullopt}).spec, n);
  SplitMix64 rng(42);
  const Matrix x = oracle::random_matrix(n, 5, rng);
  const auto input = tensor_from_matrix<double>(x, spec.input);
  auto params = init_params(spec, 42);
  auto& theta = params.mutable_block("self-expressive/coefficients").values;
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = i / n == i % n ? 0.0 : 0.2 * rng.normal();
  for (auto norm : {CoefficientNorm::SquaredFrobenius, CoefficientNorm::Frobenius}) {
    const auto step = pipeline::dsc_step(spec, params, input, 0.7, 1.3, norm);
    auto loss = [&](const NetworkParams<double>& p) { return pipeline::dsc_step(spec, p, input, 0.7, 1.3, norm).loss; };
    EXPECT_LE(fd_relative_error(params, step.gradients, loss), 1e-4);
    const auto* g = step.gradients.find("self-expressive/coefficients");
    ASSERT_NE(g, nullptr);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(g->values[i * n + i], 0.0);
  }
}

TEST(Dsc, ZeroEpochsGivesZeroCoefficients) {
  const auto data = four_subspaces(2, 5);
  const auto spec = with_self_expressive(make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec, 20);
  TrainConfig cfg;
  cfg.lambda1 = 1;
  cfg.lambda2 = 1;
  const auto r = pipeline::fit_dsc_baseline(spec, data.data, cfg);
  EXPECT_EQ(numkernel::max_abs(r.coefficient.values()), 0.0);
  EXPECT_EQ(code_of([&] { pipeline::fit_dsc_baseline(with_self_expressive(spec.autoencoder(), 7), data.data, cfg); }),
            ErrorCode::ShapeMismatch);
}

TEST(Pipeline, ParameterAuditSeparatesMethods) {
  const auto ae = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  EXPECT_EQ(param_count(ae).self_expressive, 0u);
  const auto dsc = with_self_expressive(ae, 160);
  EXPECT_EQ(param_count(dsc).self_expressive, 160u * 160u);
  EXPECT_EQ(param_count(dsc).total, param_count(ae).total + 160u * 160u);
  const auto data = four_subspaces(3, 5);
  TrainConfig cfg;
  cfg.lambda = 1.0;
  cfg.epochs = 1;
  const auto r = pipeline::fit_dcfsc(ae, data.data, cfg);
  for (const auto& b : r.final_params.blocks()) EXPECT_FALSE(b.name.ends_with("/coefficients")) << b.name;
  EXPECT_EQ(r.final_params.trainable_count(), param_count(ae).total);
}

TEST(Pipeline, BitwiseDeterministicAcrossThreadCounts) {
  const auto data = four_subspaces(4, 10);
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  TrainConfig cfg;
  cfg.lambda = 1.0;
  cfg.epochs = 15;
  cfg.seed = 4;
  std::optional<pipeline::FitResult> ref;
  for (std::size_t threads : {1u, 2u, 5u}) {
    numkernel::set_thread_count(threads);
    const auto r = pipeline::fit_dcfsc(spec, data.data, cfg);
    if (!ref) {
      ref = r;
      continue;
    }
    EXPECT_EQ(r.coefficient.values(), ref->coefficient.values());
    EXPECT_TRUE(r.final_params.same_values(ref->final_params));
    EXPECT_EQ(r.loss_history, ref->loss_history);
  }
  numkernel::set_thread_count(0);
}

TEST(Pipeline, NonFiniteLossAborts) {
  auto data = four_subspaces(5, 5);
  data.data(3, 4) = std::nan("");
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  TrainConfig cfg;
  cfg.lambda = 1.0;
  cfg.epochs = 3;
  EXPECT_EQ(code_of([&] { pipeline::pretrain_autoencoder(spec, data.data, cfg); }), ErrorCode::NonFiniteLoss);
}

TEST(Pipeline, ConfigValidation) {
  const auto data = four_subspaces(6, 5);
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  TrainConfig cfg;
  EXPECT_EQ(code_of([&] { pipeline::fit_dcfsc(spec, data.data, cfg); }), ErrorCode::NonPositiveLambda);
  cfg.lambda = 1.0;
  EXPECT_EQ(code_of([&] { pipeline::fit_dcfsc(with_self_expressive(spec, 20), data.data, cfg); }),
            ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { pipeline::fit_dcfsc(spec, Matrix(20, 7, 1.0), cfg); }), ErrorCode::ShapeMismatch);
}

TEST(Pipeline, TrainingLogFormat) {
  const auto data = four_subspaces(7, 5);
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  std::ostringstream out;
  pipeline::TrainingLog log(out);
  TrainConfig cfg;
  cfg.lambda = 1.0;
  cfg.epochs = 4;
  cfg.log = &log;
  const auto r = pipeline::fit_dcfsc(spec, data.data, cfg);
  std::istringstream in(out.str());
  std::string line;
  std::size_t count = 0;
  const std::regex pattern(R"(^(\d+)\t([-+0-9.eE]+)\t\d+\.\d{6}$)");
  while (std::getline(in, line)) {
    std::smatch m;
    ASSERT_TRUE(std::regex_match(line, m, pattern)) << line;
    EXPECT_EQ(std::stoul(m[1]), count + 1);
    EXPECT_EQ(std::stod(m[2]), r.loss_history[count]);
    ++count;
  }
  EXPECT_EQ(count, 4u);
}

TEST(Pipeline, SinglePrecisionTraining) {
  const auto data = four_subspaces(8, 10);
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  TrainConfig cfg;
  cfg.lambda = 1.0;
  cfg.epochs = 20;
  cfg.numeric_width = 32;
  const auto r = pipeline::fit_dcfsc(spec, data.data, cfg);
  for (double l : r.loss_history) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
  cfg.numeric_width = 16;
  EXPECT_EQ(code_of([&] { pipeline::fit_dcfsc(spec, data.data, cfg); }), ErrorCode::InvalidArgument);
}

// ---------------------------------------------------------------------------
// end to end on the four-subspace task

TEST(EndToEnd, DcfscRecoversSubspaces) {
  const auto spec = make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec;
  for (std::uint64_t seed : {0u, 1u}) {
    const auto data = four_subspaces(seed);
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = 100;
    const auto pre = pipeline::pretrain_autoencoder(spec, data.data, cfg);
    cfg.lambda = 1.0;
    cfg.epochs = 200;
    const auto fit = pipeline::fit_dcfsc(spec, data.data, cfg, pre.params);
    const auto labels = spectral::cluster_from_coefficients(fit.coefficient, {4, 1.0, seed, 20});
    EXPECT_EQ(evaldata::clustering_error(labels, data.labels), 0.0) << "seed " << seed;
  }
}

TEST(EndToEnd, DscBaselineRecoversSubspaces) {
  const auto data = four_subspaces(0);
  const auto spec = with_self_expressive(make_preset("mlp-small", {std::nullopt, 30, std::nullopt}).spec, 160);
  TrainConfig cfg;
  cfg.epochs = 100;
  const auto pre = pipeline::pretrain_autoencoder(spec, data.data, cfg);
  cfg.epochs = 500;
  cfg.learning_rate = 1e-2;
  cfg.lambda1 = 0.1;
  cfg.lambda2 = 1.0;
  const auto fit = pipeline::fit_dsc_baseline(spec, data.data, cfg, pre.params);
  for (std::size_t i = 0; i < 160; ++i) EXPECT_EQ(fit.coefficient(i, i), 0.0);
  const auto labels = spectral::cluster_from_coefficients(fit.coefficient, {4, 1.0, 0, 20});
  EXPECT_EQ(evaldata::clustering_error(labels, data.labels), 0.0);
}
