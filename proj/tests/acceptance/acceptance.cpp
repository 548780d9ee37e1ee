// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every line passes.

#include <bit>
#include <chrono>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

#include <unistd.h>

#include "cli_runner.hpp"
#include "oracles.hpp"

namespace sk = subspacekit;
namespace nn = subspacekit::neuralnet;
using sk::numkernel::Matrix;
using sk::numkernel::SplitMix64;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_seconds) {
    o.pass = false;
    o.detail += " [over the " + std::to_string(static_cast<int>(budget_seconds)) + " s budget]";
  }
  if (!o.pass) ++failures;
  std::printf("%s  %2d  %-34s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", id, title, secs, o.detail.c_str());
  std::fflush(stdout);
}

sk::evaldata::SyntheticData four_subspaces(std::uint64_t seed) {
  sk::evaldata::SyntheticSpec s;
  s.k = 4;
  s.subspace_dim = 3;
  s.points_per_subspace = 40;
  s.ambient_dim = 30;
  s.seed = seed;
  return sk::evaldata::generate_subspaces(s);
}

nn::NetworkSpec small_spec(std::string name, nn::SampleShape input, std::vector<nn::Layer> layers, std::size_t depth) {
  nn::NetworkSpec s;
  s.name = std::move(name);
  s.input = input;
  s.layers = std::move(layers);
  s.encoder_depth = depth;
  return s;
}

nn::Layer conv(std::string name, std::size_t k, std::size_t stride, std::size_t in, std::size_t out, bool transposed,
               bool bn = false, nn::BiasSite site = nn::BiasSite::Output) {
  nn::Conv2D c;
  c.kernel_h = c.kernel_w = k;
  c.stride = stride;
  c.in_channels = in;
  c.out_channels = out;
  c.has_bias = !bn;
  c.has_batchnorm = bn;
  c.transposed = transposed;
  c.bias_site = site;
  return {std::move(name), c};
}

void randomize(nn::NetworkParams<double>& p, SplitMix64& rng) {
  for (const auto& b : p.blocks()) {
    auto& v = p.mutable_block(b.name).values;
    const bool variance = b.name.ends_with("/moving_variance");
    const bool theta = b.name.ends_with("/coefficients");
    const std::size_t n = theta ? static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(v.size())))) : 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (theta && i / n == i % n)
        v[i] = 0.0;
      else
        v[i] = variance ? 0.5 + rng.uniform() : 0.5 * rng.normal();
    }
  }
}

sk::pipeline::FitResult train_dcfsc(const sk::evaldata::SyntheticData& d, std::uint64_t seed, double lambda,
                                     std::size_t pretrain, std::size_t epochs) {
  const auto spec = nn::make_preset("mlp-small", {std::nullopt, d.data.cols(), std::nullopt}).spec;
  sk::pipeline::TrainConfig cfg;
  cfg.seed = seed;
  cfg.epochs = pretrain;
  const auto pre = sk::pipeline::pretrain_autoencoder(spec, d.data, cfg);
  cfg.lambda = lambda;
  cfg.epochs = epochs;
  return sk::pipeline::fit_dcfsc(spec, d.data, cfg, pre.params);
}

sk::spectral::ClusterConfig cluster_config(std::size_t k, std::uint64_t seed) {
  sk::spectral::ClusterConfig c;
  c.k = k;
  c.seed = seed;
  return c;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome parameter_counts() {
  struct Row {
    const char* preset;
    std::vector<std::uint64_t> counts;
    std::uint64_t total;
  };
  const std::vector<Row> table = {
      {"eyaleb-dcfsc", {260, 1820, 5430, 5420, 1810, 251}, 14991},
      {"eyaleb-dsc", {260, 1820, 5430, 5914624, 5420, 1810, 251}, 5929615},
      {"orl-dcfsc", {130, 138, 84, 84, 140, 126}, 702},
      {"orl-dsc", {130, 138, 84, 160000, 84, 140, 126}, 160702},
      {"coil100-dcfsc", {696, 5280, 10560, 20928, 3528, 3648, 20928, 10464, 5280, 601}, 81913},
      {"coil100-dsc", {1300, 51840000, 1300}, 51842600},
  };
  std::string detail;
  for (const auto& row : table) {
    // parse the same text the params command prints
    const auto arch = sk::cli::resolve_architecture(row.preset, {});
    const std::string text = sk::cli::params_table(nn::param_count(arch.preset.spec));
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto eol = text.find('\n', pos);
      const std::string line = text.substr(pos, eol - pos);
      const auto tab = line.find('\t');
      const auto value = std::stoull(line.substr(tab + 1));
      if (line.substr(0, tab) == "total")
        total = value;
      else
        counts.push_back(value);
      pos = eol + 1;
    }
    if (counts != row.counts || total != row.total) return {false, std::string(row.preset) + " differs"};
    detail += std::to_string(total) + " ";
  }
  return {true, "totals " + detail};
}

Outcome closed_form_oracle() {
  SplitMix64 rng(2024);
  const double lambdas[] = {1e-2, 1.0, 1e2, 1e5};
  double worst = 0.0;
  std::size_t instances = 0;
  for (int rep = 0; rep < 240; ++rep) {
    const double lambda = lambdas[rep % 4];
    const std::size_t n = 2 + rng.below(63), d = 1 + rng.below(16);
    const Matrix z = oracle::random_matrix(n, d, rng);
    const auto b = sk::selfexpress::solve_self_expression(z, lambda);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::bit_cast<std::uint64_t>(b(i, i)) != 0) return {false, "non-zero diagonal"};
      const auto ref = sk::selfexpress::rowwise_ridge_oracle(z, lambda, i);
      std::vector<double> row(b.values().row(i).begin(), b.values().row(i).end());
      worst = std::max(worst, oracle::relative_error(row, ref));
    }
    ++instances;
  }
  return {worst <= 1e-8, std::to_string(instances) + " instances, worst row error " + fmt("%.2e", worst)};
}

Outcome matrix_vs_elementwise() {
  SplitMix64 rng(2025);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.below(40);
    const Matrix p = sk::numkernel::spd_inverse(oracle::random_spd(n, rng, 0.5));
    const auto b = sk::selfexpress::compute_b(sk::selfexpress::PrecisionMatrix::from_matrix(p));
    const Matrix ref = oracle::matrix_form_b(p);
    worst = std::max(worst, sk::numkernel::max_abs(b.values() - ref));
  }
  return {worst <= 1e-10, "100 matrices, worst abs diff " + fmt("%.2e", worst)};
}

Outcome gradient_fidelity() {
  using nn::Mode;
  struct Case {
    nn::NetworkSpec spec;
    Mode mode;
    std::size_t batch;
  };
  const std::vector<Case> cases = {
      {small_spec("dense+relu", {1, 1, 5}, {{"d1", nn::Dense{5, 7, true}}, {"d1/relu", nn::Activation{}}, {"d2", nn::Dense{7, 3, false}}}, 1), Mode::Train, 4},
      {small_spec("conv", {7, 6, 2}, {conv("c", 5, 2, 2, 3, false)}, 1), Mode::Train, 2},
      {small_spec("deconv", {3, 3, 2}, {conv("t", 3, 2, 2, 1, true)}, 1), Mode::Train, 2},
      {small_spec("deconv-input-bias", {3, 3, 2}, {conv("t", 3, 2, 2, 1, true, false, nn::BiasSite::Input)}, 1), Mode::Train, 2},
      {small_spec("batchnorm", {4, 4, 2}, {conv("c", 3, 1, 2, 3, false, true), {"c/relu", nn::Activation{}}, conv("t", 3, 2, 3, 2, true, true)}, 2), Mode::Train, 3},
      {small_spec("batchnorm-eval", {4, 4, 2}, {conv("c", 3, 1, 2, 3, false, true), conv("t", 3, 2, 3, 2, true, true)}, 1), Mode::Eval, 3},
      {small_spec("self-expressive", {1, 1, 3}, {{"e", nn::Dense{3, 4, true}}, {"self-expressive", nn::SelfExpressive{5}}, {"d", nn::Dense{4, 3, true}}}, 1), Mode::Train, 5},
      {nn::make_preset("orl-dcfsc").spec, Mode::Train, 2},
  };
  SplitMix64 rng(2026);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    auto params = nn::init_params(c.spec, 7);
    randomize(params, rng);
    nn::Tensor<double> x(c.batch, c.spec.input);
    for (auto& v : x.values()) v = rng.normal();
    std::vector<double> w(29);
    for (auto& v : w) v = 0.5 + rng.uniform();
    for (const auto& check : nn::check_gradients(c.spec, params, x, c.mode, nn::weighted_square_loss(w))) {
      if (check.relative_error > worst) {
        worst = check.relative_error;
        worst_name = c.spec.name + ":" + check.name;
      }
    }
  }
  if (worst > 1e-4) return {false, "layer check " + worst_name + " " + fmt("%.2e", worst)};

  // stop-gradient: upstream blocks exactly zero, forward unchanged
  const auto plain = small_spec("plain", {1, 1, 3}, {{"a", nn::Dense{3, 4, true}}, {"b", nn::Dense{4, 2, true}}}, 1);
  auto stopped = plain;
  stopped.layers.insert(stopped.layers.begin() + 1, nn::Layer{"stop", nn::StopGradientMarker{}});
  stopped.encoder_depth = 2;
  auto params = nn::init_params(plain, 3);
  nn::Tensor<double> x(3, plain.input);
  for (auto& v : x.values()) v = rng.normal();
  const auto y_plain = nn::forward(plain, params, x, Mode::Train).output;
  auto fwd = nn::forward(stopped, params, x, Mode::Train);
  if (!(fwd.output == y_plain)) return {false, "stop-gradient changed the forward value"};
  const auto bwd = nn::backward(fwd.tape, nn::Tensor<double>(3, stopped.output_shape(), 1.0));
  for (const auto& b : bwd.gradients.blocks)
    if (b.name.starts_with("a/"))
      for (double v : b.values)
        if (v != 0.0) return {false, "stop-gradient leaked into " + b.name};

  // closed-form step against the frozen-coefficient surrogate
  const auto spec = nn::make_preset("mlp-small", {std::nullopt, 6, std::nullopt}).spec;
  const Matrix data = oracle::random_matrix(12, 6, rng);
  const auto input = nn::tensor_from_matrix<double>(data, spec.input);
  auto p = nn::init_params(spec, 11);
  const auto step = sk::pipeline::dcfsc_step(spec, p, input, 0.3);
  const Matrix b0 = step.coefficient.values();
  auto surrogate = [&](const nn::NetworkParams<double>& q) {
    const auto z = nn::forward(spec.encoder(), q, input, Mode::Train).output;
    const auto out = nn::forward(spec.decoder(), q, sk::pipeline::detail::mix_samples(b0, z, false), Mode::Train).output;
    return nn::squared_distance<double>(input.values(), out.values());
  };
  std::vector<double> analytic, numeric;
  for (const auto& g : step.gradients.blocks) {
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      auto& v = p.mutable_block(g.name).values[i];
      const double orig = v, h = 1e-6;
      v = orig + h;
      const double up = surrogate(p);
      v = orig - h;
      const double down = surrogate(p);
      v = orig;
      analytic.push_back(g.values[i]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  const double step_error = oracle::relative_error(analytic, numeric);
  return {step_error <= 1e-4, "worst layer " + fmt("%.2e", worst) + ", stop-gradient exact, step " + fmt("%.2e", step_error)};
}

Outcome synthetic_recovery() {
  const auto shallow_data = four_subspaces(0);
  const auto b = sk::selfexpress::solve_self_expression(shallow_data.data, 1e-4);
  const double shallow_error =
      sk::evaldata::clustering_error(sk::spectral::cluster_from_coefficients(b, cluster_config(4, 0)), shallow_data.labels);
  int good = 0;
  std::string errors;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = four_subspaces(seed);
    const auto fit = train_dcfsc(d, seed, 1.0, 100, 200);
    const double e =
        sk::evaldata::clustering_error(sk::spectral::cluster_from_coefficients(fit.coefficient, cluster_config(4, seed)), d.labels);
    good += e <= 0.05;
    errors += fmt("%.3f", e) + " ";
  }
  return {shallow_error == 0.0 && good >= 9,
          "shallow " + fmt("%.3f", shallow_error) + "; dcfsc " + std::to_string(good) + "/10 within 5% (" + errors + ")"};
}

Outcome spectral_correctness() {
  SplitMix64 rng(2027);
  int runs = 0;
  for (std::size_t k : {2u, 3u, 5u}) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<std::size_t> sizes(k);
      std::vector<int> truth;
      for (std::size_t b = 0; b < k; ++b) {
        sizes[b] = 2 + rng.below(100 / k - 1);
        truth.insert(truth.end(), sizes[b], static_cast<int>(b));
      }
      const auto a = sk::spectral::AffinityMatrix::from_matrix(oracle::block_affinity(sizes, rng));
      if (sk::evaldata::clustering_error(sk::spectral::spectral_cluster(a, cluster_config(k, rng.next())), truth) != 0.0)
        return {false, "ideal blocks, k=" + std::to_string(k)};
      ++runs;
    }
  }
  for (int rep = 0; rep < 10; ++rep) {
    const std::vector<std::size_t> sizes{20, 20, 20};
    Matrix m = oracle::block_affinity(sizes, rng);
    std::vector<int> truth;
    for (int b = 0; b < 3; ++b) truth.insert(truth.end(), 20, b);
    for (std::size_t i = 0; i < 60; ++i)
      for (std::size_t j = i + 1; j < 60; ++j)
        if (truth[i] != truth[j]) m(i, j) = m(j, i) = 0.01 * rng.uniform();
    const auto labels = sk::spectral::spectral_cluster(sk::spectral::AffinityMatrix::from_matrix(m), cluster_config(3, rng.next()));
    if (sk::evaldata::clustering_error(labels, truth) != 0.0) return {false, "1% noise"};
    ++runs;
  }
  return {true, std::to_string(runs) + " affinities recovered exactly"};
}

Outcome metric_oracle() {
  SplitMix64 rng(2028);
  for (int rep = 0; rep < 150; ++rep) {
    const std::size_t n = 1 + rng.below(30);
    const auto kp = 1 + rng.below(6), kt = 1 + rng.below(6);
    std::vector<int> pred(n), truth(n);
    for (auto& v : pred) v = static_cast<int>(rng.below(kp));
    for (auto& v : truth) v = static_cast<int>(rng.below(kt));
    if (std::abs(sk::evaldata::clustering_error(pred, truth) - oracle::brute_force_error(pred, truth)) > 1e-15)
      return {false, "instance " + std::to_string(rep)};
  }
  return {true, "150 instances equal to brute force"};
}

struct TempDir {
  std::filesystem::path path = std::filesystem::temp_directory_path() / ("subspacekit_acceptance_" + std::to_string(::getpid()));
  TempDir() { std::filesystem::create_directories(path); }
  ~TempDir() { std::filesystem::remove_all(path); }
};

Outcome lambda_sweep() {
  TempDir dir;
  sk::evaldata::SyntheticSpec s;
  s.k = 4;
  s.subspace_dim = 3;
  s.points_per_subspace = 40;
  s.ambient_dim = 30;
  sk::cli::run_synth(s, dir.path);
  sk::cli::FitOptions o;
  o.method = sk::cli::Method::DCFSC;
  o.arch = "mlp-small";
  o.data = (dir.path / "data.sscm").string();
  o.labels = (dir.path / "labels.csv").string();
  const auto rows = sk::cli::run_sweep(o, {1, 10, 1e2, 1e3, 1e4, 1e5, 1e6, 1e12}, false);
  double best = 1.0;
  std::string detail;
  for (const auto& r : rows) {
    if (!r.ok || !std::isfinite(r.clustering_error)) return {false, "row lambda=" + sk::cli::shortest(r.lambda) + " failed"};
    best = std::min(best, r.clustering_error);
    detail += sk::cli::shortest(r.lambda) + ":" + fmt("%.3f", r.clustering_error) + " ";
  }
  return {rows.back().clustering_error > best, detail};
}

Outcome benchmark_documentation() {
  // The published benchmark errors need the real image corpora and hours of
  // training; they are not reproduced here. What is checked is that the
  // preset commands documented in the README resolve to the published setup.
  struct Row {
    const char* preset;
    std::size_t n;
    double lambda;
    std::size_t epochs;
    std::size_t clusters;
  };
  const Row rows[] = {{"eyaleb-dcfsc", 2432, 5e5, 1000, 38},
                      {"orl-dcfsc", 400, 5e5, 700, 40},
                      {"coil100-dcfsc", 7200, 10, 175, 100}};
  for (const auto& r : rows) {
    const auto p = nn::make_preset(r.preset, {r.n, std::nullopt, std::nullopt});
    if (p.lambda != r.lambda || p.epochs != r.epochs || p.clusters != r.clusters || p.learning_rate != 1e-3)
      return {false, std::string(r.preset) + " defaults differ"};
  }
  return {true, "preset commands resolve; benchmark error rates not reproduced (data and training budget unavailable)"};
}

Outcome determinism() {
  auto run_all = [] {
    std::vector<double> fingerprint;
    SplitMix64 rng(2029);
    const Matrix z = oracle::random_matrix(64, 16, rng);
    const auto b = sk::selfexpress::solve_self_expression(z, 0.1);
    fingerprint.insert(fingerprint.end(), b.values().values().begin(), b.values().values().end());
    const auto d = four_subspaces(3);
    const auto fit = train_dcfsc(d, 3, 1.0, 10, 20);
    fingerprint.insert(fingerprint.end(), fit.coefficient.values().values().begin(), fit.coefficient.values().values().end());
    fingerprint.insert(fingerprint.end(), fit.loss_history.begin(), fit.loss_history.end());
    for (const auto& blk : fit.final_params.blocks()) fingerprint.insert(fingerprint.end(), blk.values.begin(), blk.values.end());
    const auto labels = sk::spectral::cluster_from_coefficients(fit.coefficient, cluster_config(4, 3));
    for (int l : labels) fingerprint.push_back(l);
    return fingerprint;
  };
  std::vector<double> reference;
  for (std::size_t threads : {1u, 2u, 4u, 7u}) {
    sk::numkernel::set_thread_count(threads);
    const auto f = run_all();
    if (reference.empty()) {
      reference = f;
    } else if (std::memcmp(f.data(), reference.data(), f.size() * sizeof(double)) != 0 || f.size() != reference.size()) {
      sk::numkernel::set_thread_count(0);
      return {false, "results differ at " + std::to_string(threads) + " threads"};
    }
  }
  sk::numkernel::set_thread_count(0);
  return {true, "bit-identical at 1, 2, 4, 7 threads (" + std::to_string(reference.size()) + " values)"};
}

}  // namespace

int main() {
  criterion(1, "parameter counts", 1, parameter_counts);
  criterion(2, "closed form vs ridge oracle", 10, closed_form_oracle);
  criterion(3, "matrix vs elementwise form", 5, matrix_vs_elementwise);
  criterion(4, "gradient fidelity", 30, gradient_fidelity);
  criterion(5, "synthetic recovery", 120, synthetic_recovery);
  criterion(6, "spectral correctness", 10, spectral_correctness);
  criterion(7, "metric oracle", 5, metric_oracle);
  criterion(8, "lambda sweep behaviour", 120, lambda_sweep);
  criterion(9, "benchmark presets (documented)", 1, benchmark_documentation);
  criterion(10, "determinism across threads", 60, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
