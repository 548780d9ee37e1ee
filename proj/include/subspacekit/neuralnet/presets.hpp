#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/network_spec.hpp"

namespace subspacekit::neuralnet {

/// Run-time facts a preset may need: sample count for the self-expressive
/// layer, flat input width for MLP presets, and the cluster count that drives
/// the E-YaleB epoch schedule.
struct PresetContext {
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> input_dim;
  std::optional<std::size_t> clusters;
};

/// Architecture plus the training defaults that go with it.
struct Preset {
  NetworkSpec spec;
  std::optional<double> lambda;  // closed-form regularization; unset means the caller must choose
  double learning_rate = 1e-3;
  std::size_t epochs = 0;
  std::size_t pretrain_epochs = 0;
  std::optional<std::size_t> clusters;
};

inline constexpr std::array<std::string_view, 7> kPresetNames = {
    "eyaleb-dcfsc", "eyaleb-dsc", "orl-dcfsc", "orl-dsc", "coil100-dcfsc", "coil100-dsc", "mlp-small"};

namespace detail {

inline Layer conv(std::string name, std::size_t k, std::size_t stride, std::size_t in, std::size_t out,
                  bool transposed, bool batchnorm = false) {
  Conv2D c;
  c.kernel_h = c.kernel_w = k;
  c.stride = stride;
  c.in_channels = in;
  c.out_channels = out;
  c.has_bias = !batchnorm;
  c.has_batchnorm = batchnorm;
  c.transposed = transposed;
  return {std::move(name), c};
}

inline Layer relu(const std::string& after) { return {after + "/relu", Activation{}}; }

// Three stride-2 encoder layers (5x5, 3x3, 3x3) and their transposed mirror;
// the rectifier follows every layer but the last decoder layer.
inline NetworkSpec three_layer_conv(std::string name, std::size_t side, std::array<std::size_t, 3> channels,
                                    std::optional<std::size_t> self_expressive_n) {
  NetworkSpec s;
  s.name = std::move(name);
  s.input = {side, side, 1};
  const auto [c1, c2, c3] = channels;
  s.layers = {conv("enc-1", 5, 2, 1, c1, false), relu("enc-1"), conv("enc-2", 3, 2, c1, c2, false), relu("enc-2"),
              conv("enc-3", 3, 2, c2, c3, false), relu("enc-3")};
  s.encoder_depth = s.layers.size();
  if (self_expressive_n) s.layers.push_back({"self-expressive", SelfExpressive{*self_expressive_n}});
  for (Layer l : {conv("dec-1", 3, 2, c3, c2, true), relu("dec-1"), conv("dec-2", 3, 2, c2, c1, true),
                  relu("dec-2"), conv("dec-3", 5, 2, c1, 1, true)})
    s.layers.push_back(std::move(l));
  return s;
}

inline NetworkSpec coil100_deep() {
  NetworkSpec s;
  s.name = "coil100-dcfsc";
  s.input = {32, 32, 1};
  struct Row {
    const char* name;
    std::size_t k, stride, in, out;
    bool bn;
  };
  // Batch normalization on every layer except the last of encoder and decoder.
  constexpr Row encoder[] = {{"enc-1", 5, 1, 1, 24, true},
                             {"enc-2", 3, 2, 24, 24, true},
                             {"enc-3", 3, 1, 24, 48, true},
                             {"enc-4", 3, 2, 48, 48, true},
                             {"enc-5", 1, 1, 48, 72, false}};
  constexpr Row decoder[] = {{"dec-1", 1, 1, 72, 48, true},
                             {"dec-2", 3, 2, 48, 48, true},
                             {"dec-3", 3, 1, 48, 24, true},
                             {"dec-4", 3, 2, 24, 24, true},
                             {"dec-5", 5, 1, 24, 1, false}};
  for (const auto& r : encoder) {
    s.layers.push_back(conv(r.name, r.k, r.stride, r.in, r.out, false, r.bn));
    s.layers.push_back(relu(r.name));
  }
  s.encoder_depth = s.layers.size();
  for (const auto& r : decoder) {
    s.layers.push_back(conv(r.name, r.k, r.stride, r.in, r.out, true, r.bn));
    if (std::string_view(r.name) != "dec-5") s.layers.push_back(relu(r.name));
  }
  return s;
}

inline NetworkSpec coil100_shallow(std::size_t n) {
  NetworkSpec s;
  s.name = "coil100-dsc";
  s.input = {32, 32, 1};
  s.layers = {conv("enc-1", 5, 2, 1, 50, false), relu("enc-1")};
  s.encoder_depth = s.layers.size();
  s.layers.push_back({"self-expressive", SelfExpressive{n}});
  Layer dec = conv("dec-1", 5, 2, 50, 1, true);
  std::get<Conv2D>(dec.kind).bias_site = BiasSite::Input;
  s.layers.push_back(std::move(dec));
  return s;
}

inline NetworkSpec mlp_small(std::size_t input_dim) {
  NetworkSpec s;
  s.name = "mlp-small";
  s.input = {1, 1, input_dim};
  // linear encoder keeps linear subspaces linear in the latent space
  s.layers = {{"enc-1", Dense{input_dim, 16, false}}};
  s.encoder_depth = s.layers.size();
  s.layers.push_back({"dec-1", Dense{16, 64, true}});
  s.layers.push_back({"dec-1/relu", Activation{}});
  s.layers.push_back({"dec-2", Dense{64, input_dim, true}});
  return s;
}

}  // namespace detail

/// Builds a named preset. Unknown names throw UnknownPreset.
inline Preset make_preset(std::string_view name, const PresetContext& ctx = {}) {
  Preset p;
  if (name == "eyaleb-dcfsc" || name == "eyaleb-dsc") {
    const bool dsc = name == "eyaleb-dsc";
    p.spec = detail::three_layer_conv(std::string(name), 48, {10, 20, 30},
                                      dsc ? std::optional<std::size_t>(ctx.n_samples.value_or(2432)) : std::nullopt);
    p.lambda = 5e5;
    p.clusters = ctx.clusters.value_or(38);
    p.epochs = 50 + 25 * *p.clusters;
    p.pretrain_epochs = 500;
  } else if (name == "orl-dcfsc" || name == "orl-dsc") {
    const bool dsc = name == "orl-dsc";
    p.spec = detail::three_layer_conv(std::string(name), 32, {5, 3, 3},
                                      dsc ? std::optional<std::size_t>(ctx.n_samples.value_or(400)) : std::nullopt);
    p.lambda = 5e5;
    p.clusters = ctx.clusters.value_or(40);
    p.epochs = 700;
    p.pretrain_epochs = 500;
  } else if (name == "coil100-dcfsc") {
    p.spec = detail::coil100_deep();
    p.lambda = 10.0;
    p.clusters = ctx.clusters.value_or(100);
    p.epochs = 175;
    p.pretrain_epochs = 0;  // trained from scratch
  } else if (name == "coil100-dsc") {
    p.spec = detail::coil100_shallow(ctx.n_samples.value_or(7200));
    p.lambda = 10.0;
    p.clusters = ctx.clusters.value_or(100);
    p.epochs = 120;
    p.pretrain_epochs = 500;
  } else if (name == "mlp-small") {
    p.spec = detail::mlp_small(ctx.input_dim.value_or(30));
    p.epochs = 200;
    p.pretrain_epochs = 100;
    p.clusters = ctx.clusters;
  } else {
    fail(ErrorCode::UnknownPreset, "unknown architecture preset '" + std::string(name) + "'");
  }
  p.spec.validate_autoencoder();
  return p;
}

inline bool is_preset_name(std::string_view name) {
  for (auto n : kPresetNames)
    if (n == name) return true;
  return false;
}

}  // namespace subspacekit::neuralnet
