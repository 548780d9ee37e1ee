#pragma once

// Command implementations behind the `subspacekit` executable. Kept apart from
// argument parsing so the tests can drive them in-process.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "subspacekit/subspacekit.hpp"

namespace subspacekit::cli {

using json = nlohmann::ordered_json;
using numkernel::Matrix;

/// Raised for flag combinations the parser cannot express; exits with code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// architecture files

struct Architecture {
  neuralnet::Preset preset;
  std::string source;  // preset name or file path
};

namespace detail {

inline std::size_t get_size(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number_unsigned())
    fail(ErrorCode::MalformedFile, where + ": '" + key + "' must be a non-negative integer");
  return j[key].get<std::size_t>();
}

inline bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) fail(ErrorCode::MalformedFile, std::string("'") + key + "' must be true or false");
  return j[key].get<bool>();
}

inline void append_layers(const json& list, const std::string& prefix, std::vector<neuralnet::Layer>& out) {
  if (!list.is_array()) fail(ErrorCode::MalformedFile, prefix + " layers must be an array");
  std::size_t index = 0;
  std::string last;
  for (const auto& j : list) {
    const std::string type = j.value("type", "");
    const std::string where = prefix + " layer " + std::to_string(out.size() + 1);
    if (type == "dense" || type == "conv" || type == "deconv") {
      last = prefix + "-" + std::to_string(++index);
      if (type == "dense") {
        neuralnet::Dense d;
        d.in_dim = get_size(j, "in", where);
        d.out_dim = get_size(j, "out", where);
        d.has_bias = get_bool(j, "bias", true);
        const std::string init = j.value("init", "he");
        if (init == "identity")
          d.init = neuralnet::DenseInit::Identity;
        else if (init != "he")
          fail(ErrorCode::MalformedFile, where + ": init must be 'he' or 'identity'");
        out.push_back({last, d});
      } else {
        neuralnet::Conv2D c;
        c.kernel_h = c.kernel_w = get_size(j, "kernel", where);
        c.stride = j.contains("stride") ? get_size(j, "stride", where) : 1;
        c.in_channels = get_size(j, "in", where);
        c.out_channels = get_size(j, "out", where);
        c.has_batchnorm = get_bool(j, "batchnorm", false);
        c.has_bias = get_bool(j, "bias", !c.has_batchnorm);
        c.transposed = type == "deconv";
        const std::string site = j.value("bias_site", "output");
        if (site == "input")
          c.bias_site = neuralnet::BiasSite::Input;
        else if (site != "output")
          fail(ErrorCode::MalformedFile, where + ": bias_site must be 'input' or 'output'");
        out.push_back({last, c});
      }
    } else if (type == "relu") {
      if (last.empty()) fail(ErrorCode::MalformedFile, where + ": relu must follow a parametric layer");
      out.push_back({last + "/relu", neuralnet::Activation{}});
    } else if (type == "stop_gradient") {
      out.push_back({prefix + "-stop-gradient-" + std::to_string(out.size() + 1), neuralnet::StopGradientMarker{}});
    } else {
      fail(ErrorCode::MalformedFile, where + ": unknown layer type '" + type + "'");
    }
  }
}

}  // namespace detail

/// JSON architecture description:
///   {"name": "...", "input": [h, w, c], "encoder": [...], "decoder": [...],
///    "self_expressive": false, "lambda": 1.0, "learning_rate": 1e-3,
///    "epochs": 200, "pretrain_epochs": 100, "clusters": 4}
/// Layer objects: {"type": "dense"|"conv"|"deconv"|"relu"|"stop_gradient", ...}.
inline neuralnet::Preset parse_architecture(const json& j, std::size_t n_samples) {
  if (!j.is_object()) fail(ErrorCode::MalformedFile, "architecture must be a JSON object");
  neuralnet::Preset p;
  p.spec.name = j.value("name", "custom");
  if (!j.contains("input") || !j["input"].is_array() || j["input"].size() != 3)
    fail(ErrorCode::MalformedFile, "'input' must be [height, width, channels]");
  p.spec.input = {j["input"][0].get<std::size_t>(), j["input"][1].get<std::size_t>(), j["input"][2].get<std::size_t>()};
  detail::append_layers(j.value("encoder", json::array()), "enc", p.spec.layers);
  p.spec.encoder_depth = p.spec.layers.size();
  if (detail::get_bool(j, "self_expressive", false))
    p.spec.layers.push_back({"self-expressive", neuralnet::SelfExpressive{n_samples}});
  detail::append_layers(j.value("decoder", json::array()), "dec", p.spec.layers);
  if (j.contains("lambda")) p.lambda = j["lambda"].get<double>();
  p.learning_rate = j.value("learning_rate", 1e-3);
  p.epochs = j.value("epochs", std::size_t{200});
  p.pretrain_epochs = j.value("pretrain_epochs", std::size_t{0});
  if (j.contains("clusters")) p.clusters = j["clusters"].get<std::size_t>();
  p.spec.validate_autoencoder();
  return p;
}

/// A preset name, or a path to a JSON architecture file.
inline Architecture resolve_architecture(const std::string& arch, const neuralnet::PresetContext& ctx) {
  if (neuralnet::is_preset_name(arch)) return {neuralnet::make_preset(arch, ctx), arch};
  if (!arch.ends_with(".json")) fail(ErrorCode::UnknownPreset, "unknown architecture preset '" + arch + "'");
  json j;
  try {
    j = json::parse(neuralnet::detail::read_file(arch));
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, arch + ": " + e.what());
  }
  try {
    return {parse_architecture(j, ctx.n_samples.value_or(0)), arch};
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedFile, arch + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// params

inline json params_json(const neuralnet::ParamCount& pc) {
  json layers = json::array();
  for (const auto& l : pc.per_layer) layers.push_back({{"layer", l.layer}, {"count", l.count}});
  // storage of the learnable coefficient block at 8 bytes per entry
  return {{"layers", layers},
          {"self_expressive", pc.self_expressive},
          {"self_expressive_bytes_f64", pc.self_expressive * 8},
          {"total", pc.total}};
}

inline std::string params_table(const neuralnet::ParamCount& pc) {
  std::string out;
  for (const auto& l : pc.per_layer) out += l.layer + "\t" + std::to_string(l.count) + "\n";
  out += "total\t" + std::to_string(pc.total) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// fit

enum class Method { DCFSC, DSC, Shallow };

inline Method parse_method(const std::string& s) {
  if (s == "dcfsc") return Method::DCFSC;
  if (s == "dsc") return Method::DSC;
  if (s == "shallow") return Method::Shallow;
  throw UsageError("--method must be dcfsc, dsc or shallow");
}

inline const char* method_name(Method m) {
  switch (m) {
    case Method::DCFSC: return "dcfsc";
    case Method::DSC: return "dsc";
    case Method::Shallow: return "shallow";
  }
  return "";
}

struct FitOptions {
  Method method = Method::DCFSC;
  std::string data;
  std::optional<std::string> labels;
  std::string arch = "mlp-small";
  std::optional<double> lambda;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> learning_rate;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> pretrain_epochs;
  bool no_pretrain = false;
  std::optional<std::size_t> k;
  double rho = 1.0;
  std::uint64_t seed = 0;
  std::size_t restarts = 20;
  int numeric_width = 64;
  bool unsquared_coefficient_norm = false;
  std::optional<std::string> init_checkpoint;
  std::optional<std::string> save_checkpoint;
  std::optional<std::string> log;
  std::optional<std::string> labels_out;
  std::optional<std::string> report;
};

struct Dataset {
  Matrix x;
  std::optional<std::vector<int>> truth;
};

/// Matrix file (.csv/.sscm), or a directory of PGM images resized to the
/// architecture's input size (32 x 32 when no architecture is involved).
inline Dataset load_dataset(const FitOptions& o, std::optional<neuralnet::SampleShape> image_shape) {
  Dataset d;
  if (std::filesystem::is_directory(o.data)) {
    const auto shape = image_shape.value_or(neuralnet::SampleShape{32, 32, 1});
    if (shape.channels != 1) fail(ErrorCode::ShapeMismatch, "PGM input needs a single-channel architecture");
    d.x = evaldata::load_pgm_dir(o.data, shape.height, shape.width);
  } else {
    d.x = evaldata::load_matrix(o.data);
  }
  if (o.labels) {
    d.truth = evaldata::load_labels(*o.labels);
    if (d.truth->size() != d.x.rows())
      fail(ErrorCode::LengthMismatch, "label file has " + std::to_string(d.truth->size()) + " entries for " +
                                          std::to_string(d.x.rows()) + " samples");
  }
  return d;
}

struct FitOutcome {
  json report;
  std::vector<int> labels;
  double clustering_error = std::nan("");
  double final_loss = std::nan("");
  double wall_seconds = 0.0;
};

namespace detail {

inline std::size_t distinct(const std::vector<int>& v) { return std::set<int>(v.begin(), v.end()).size(); }

// The architecture for the chosen method: the closed-form path drops any
// learnable self-expressive layer, the learnable path inserts one when absent.
inline neuralnet::NetworkSpec spec_for_method(const neuralnet::NetworkSpec& spec, Method m, std::size_t n) {
  if (m == Method::DCFSC) {
    if (!spec.self_expressive_index()) return spec;
    auto out = spec.autoencoder();
    out.name = spec.name;
    return out;
  }
  if (auto idx = spec.self_expressive_index()) {
    if (std::get<neuralnet::SelfExpressive>(spec.layers[*idx].kind).n == n) return spec;
    auto out = spec;
    std::get<neuralnet::SelfExpressive>(out.layers[*idx].kind).n = n;
    return out;
  }
  auto out = spec;
  out.layers.insert(out.layers.begin() + static_cast<std::ptrdiff_t>(spec.encoder_depth),
                    neuralnet::Layer{"self-expressive", neuralnet::SelfExpressive{n}});
  return out;
}

inline json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

/// Full fit: optional pretraining, training, clustering, scoring.
/// `lambda_override` replaces the lambda from options/preset (used by sweeps).
inline FitOutcome run_fit(const FitOptions& o, std::optional<double> lambda_override = std::nullopt,
                          const Dataset* preloaded = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Architecture> arch;
  std::optional<Dataset> own;
  const Dataset* data = preloaded;

  if (!data) {
    // the image size for PGM input comes from the architecture, which may in
    // turn need the sample count; presets only need it for the learnable layer
    std::optional<neuralnet::SampleShape> shape;
    if (o.method != Method::Shallow) shape = resolve_architecture(o.arch, {std::size_t{1}, std::nullopt, o.k}).preset.spec.input;
    own = load_dataset(o, shape);
    data = &*own;
  }
  const Matrix& x = data->x;
  const std::size_t n = x.rows();

  if (o.method != Method::Shallow) arch = resolve_architecture(o.arch, {n, x.cols(), o.k});

  std::optional<double> lambda = lambda_override ? lambda_override : o.lambda;
  if (!lambda && arch) lambda = arch->preset.lambda;
  if (o.method != Method::DSC && !lambda)
    throw UsageError(std::string("--lambda is required for --method ") + method_name(o.method) +
                     (arch ? " with architecture '" + arch->source + "' (it has no default)" : ""));
  if (o.method == Method::DSC && (!o.lambda1 || !o.lambda2))
    throw UsageError("--lambda1 and --lambda2 are required for --method dsc");

  std::optional<std::size_t> k = o.k;
  if (!k && arch) k = arch->preset.clusters;
  if (!k && data->truth) k = detail::distinct(*data->truth);
  if (!k) throw UsageError("--k is required when neither the architecture nor --labels determine it");

  FitOutcome out;
  std::vector<double> loss_history;
  std::size_t epochs = 0, pretrain_epochs = 0;
  std::uint64_t param_total = 0;
  selfexpress::CoefficientMatrix coefficient;

  if (o.method == Method::Shallow) {
    coefficient = selfexpress::solve_self_expression(x, *lambda);
  } else {
    const auto spec = detail::spec_for_method(arch->preset.spec, o.method, n);
    param_total = neuralnet::param_count(spec).total;
    epochs = o.epochs.value_or(arch->preset.epochs);
    pretrain_epochs = o.no_pretrain ? 0 : o.pretrain_epochs.value_or(arch->preset.pretrain_epochs);

    std::optional<std::ofstream> log_file;
    std::optional<pipeline::TrainingLog> log;
    if (o.log) {
      log_file.emplace(*o.log);
      if (!*log_file) fail(ErrorCode::IoFailure, "cannot open " + *o.log + " for writing");
      log.emplace(*log_file);
    }

    pipeline::TrainConfig config;
    config.lambda = lambda.value_or(0.0);
    config.lambda1 = o.lambda1.value_or(0.0);
    config.lambda2 = o.lambda2.value_or(0.0);
    config.learning_rate = o.learning_rate.value_or(arch->preset.learning_rate);
    config.seed = o.seed;
    config.numeric_width = o.numeric_width;
    config.coefficient_norm =
        o.unsquared_coefficient_norm ? neuralnet::CoefficientNorm::Frobenius : neuralnet::CoefficientNorm::SquaredFrobenius;

    std::optional<neuralnet::NetworkParams<double>> initial;
    if (o.init_checkpoint) initial = neuralnet::load_checkpoint(*o.init_checkpoint);
    if (pretrain_epochs > 0) {
      config.epochs = pretrain_epochs;
      initial = pipeline::pretrain_autoencoder(spec, x, config, initial).params;
    }
    config.epochs = epochs;
    config.log = log ? &*log : nullptr;
    auto fit = o.method == Method::DCFSC ? pipeline::fit_dcfsc(spec, x, config, initial)
                                         : pipeline::fit_dsc_baseline(spec, x, config, initial);
    if (o.save_checkpoint) neuralnet::save_checkpoint(*o.save_checkpoint, fit.final_params);
    coefficient = std::move(fit.coefficient);
    loss_history = std::move(fit.loss_history);
  }

  const auto clustered =
      spectral::cluster_from_coefficients_detailed(coefficient, {*k, o.rho, o.seed, o.restarts});
  out.labels = clustered.labels;
  for (const auto& w : clustered.warnings) std::cerr << "warning: " << w << "\n";
  if (data->truth) out.clustering_error = evaldata::clustering_error(out.labels, *data->truth);
  if (!loss_history.empty()) out.final_loss = loss_history.back();
  if (o.labels_out) evaldata::save_labels(*o.labels_out, out.labels);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json& r = out.report;
  r["method"] = method_name(o.method);
  r["arch"] = arch ? json(arch->source) : json(nullptr);
  r["lambda"] = lambda ? json(*lambda) : json(nullptr);
  if (o.method == Method::DSC) {
    r["lambda1"] = *o.lambda1;
    r["lambda2"] = *o.lambda2;
  }
  r["epochs"] = epochs;
  r["pretrain_epochs"] = pretrain_epochs;
  r["seed"] = o.seed;
  r["k"] = *k;
  r["rho"] = o.rho;
  r["n_samples"] = n;
  r["numeric_width"] = o.numeric_width;
  r["clustering_error"] = detail::nullable(out.clustering_error);
  r["final_loss"] = detail::nullable(out.final_loss);
  r["loss_history"] = loss_history;
  r["param_total"] = param_total;
  r["warnings"] = clustered.warnings;
  r["wall_seconds"] = out.wall_seconds;
  return out;
}

// ---------------------------------------------------------------------------
// sweep

/// "start:stop:xF" (geometric) or "start:stop:+S" (arithmetic), inclusive.
inline std::vector<double> parse_lambda_range(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw UsageError("--lambda-range must look like 1:1e6:x10");
  auto num = [&](std::string s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw UsageError("bad number '" + s + "' in --lambda-range");
    return v;
  };
  const double start = num(text.substr(0, a));
  const double stop = num(text.substr(a + 1, b - a - 1));
  const std::string step = text.substr(b + 1);
  if (step.size() < 2 || (step[0] != 'x' && step[0] != '+')) throw UsageError("--lambda-range step must be xF or +S");
  const double s = num(step.substr(1));
  std::vector<double> out;
  const double slack = 1e-9 * std::abs(stop);
  if (step[0] == 'x') {
    if (!(start > 0.0) || !(s > 1.0)) throw UsageError("geometric --lambda-range needs start > 0 and factor > 1");
    for (int i = 0;; ++i) {
      const double v = start * std::pow(s, i);
      if (v > stop + slack) break;
      out.push_back(v);
    }
  } else {
    if (!(s > 0.0)) throw UsageError("arithmetic --lambda-range needs a positive step");
    for (int i = 0;; ++i) {
      const double v = start + s * i;
      if (v > stop + slack) break;
      out.push_back(v);
    }
  }
  if (out.empty()) throw UsageError("--lambda-range is empty");
  return out;
}

inline std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string s = text.substr(start, comma - start);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) throw UsageError("bad number '" + s + "' in --lambda-list");
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

inline std::string shortest(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct SweepRow {
  double lambda = 0.0;
  bool ok = false;
  double clustering_error = 0.0;
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  std::string failure;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "lambda,clustering_error,final_loss,wall_seconds\n";
  char wall[32];
  for (const auto& r : rows) {
    std::snprintf(wall, sizeof wall, "%.6f", r.wall_seconds);
    out += shortest(r.lambda) + ",";
    if (r.ok)
      out += shortest(r.clustering_error) + "," + (std::isfinite(r.final_loss) ? shortest(r.final_loss) : "") + ",";
    else
      out += "error,error,";
    out += std::string(wall) + "\n";
  }
  return out;
}

/// One fit per lambda with identical settings. A failing lambda yields an
/// "error" row. `parallel` runs the points on separate threads.
inline std::vector<SweepRow> run_sweep(const FitOptions& o, const std::vector<double>& lambdas, bool parallel) {
  if (o.method == Method::DSC) throw UsageError("sweep varies the closed-form lambda; use --method dcfsc or shallow");
  if (!o.labels) throw UsageError("sweep needs --labels to score each point");
  FitOptions base = o;
  base.report.reset();
  base.labels_out.reset();
  base.save_checkpoint.reset();
  base.log.reset();
  std::optional<neuralnet::SampleShape> shape;
  if (o.method != Method::Shallow)
    shape = resolve_architecture(o.arch, {std::size_t{1}, std::nullopt, o.k}).preset.spec.input;
  const Dataset data = load_dataset(base, shape);

  std::vector<SweepRow> rows(lambdas.size());
  std::mutex err_mutex;
  auto run_one = [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    rows[i].lambda = lambdas[i];
    try {
      const auto r = run_fit(base, lambdas[i], &data);
      rows[i].ok = true;
      rows[i].clustering_error = r.clustering_error;
      rows[i].final_loss = r.final_loss;
    } catch (const Error& e) {
      rows[i].failure = e.what();
      std::lock_guard lock(err_mutex);
      std::cerr << "lambda " << shortest(lambdas[i]) << ": " << e.what() << "\n";
    }
    rows[i].wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  if (parallel) {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < lambdas.size(); ++i) threads.emplace_back(run_one, i);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t i = 0; i < lambdas.size(); ++i) run_one(i);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// synth

inline void run_synth(const evaldata::SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  const auto d = evaldata::generate_subspaces(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  evaldata::save_matrix(out_dir / "data.sscm", d.data);
  evaldata::save_labels(out_dir / "labels.csv", d.labels);
}

}  // namespace subspacekit::cli
