#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/network_spec.hpp"
#include "subspacekit/numkernel/random.hpp"

namespace subspacekit::neuralnet {

/// Named value block. Names are "<layer>/<role>" with role one of kernel,
/// bias, gamma, beta, moving_mean, moving_variance, coefficients.
template <class T>
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<T> values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline bool is_running_statistic(std::string_view block_name) {
  return block_name.ends_with("/moving_mean") || block_name.ends_with("/moving_variance");
}

namespace detail {
template <class T>
const ParamBlock<T>* find_block(const std::vector<ParamBlock<T>>& blocks, std::string_view name) {
  for (const auto& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}
}  // namespace detail

/// Gradients for the trainable blocks, one block per trainable parameter
/// block with identical name and dims.
template <class T>
struct GradientSet {
  std::vector<ParamBlock<T>> blocks;

  const ParamBlock<T>* find(std::string_view name) const { return detail::find_block(blocks, name); }
  ParamBlock<T>* find(std::string_view name) { return const_cast<ParamBlock<T>*>(detail::find_block(blocks, name)); }

  /// Adds `other` block-wise; blocks missing here are appended.
  void merge(const GradientSet& other) {
    for (const auto& b : other.blocks) {
      if (auto* mine = find(b.name)) {
        for (std::size_t i = 0; i < b.values.size(); ++i) mine->values[i] += b.values[i];
      } else {
        blocks.push_back(b);
      }
    }
  }
};

/// All parameter values of a network, including batch-norm running
/// statistics. Mutations through `mutable_block` and `bump_version` advance
/// the version that tapes use to detect staleness.
template <class T>
class NetworkParams {
 public:
  const std::vector<ParamBlock<T>>& blocks() const noexcept { return blocks_; }
  std::uint64_t version() const noexcept { return version_; }

  const ParamBlock<T>* find(std::string_view name) const { return detail::find_block(blocks_, name); }

  const ParamBlock<T>& block(std::string_view name) const {
    if (const auto* b = find(name)) return *b;
    fail(ErrorCode::ShapeMismatch, "missing parameter block " + std::string(name));
  }

  ParamBlock<T>& mutable_block(std::string_view name) {
    ++version_;
    return const_cast<ParamBlock<T>&>(block(name));
  }

  void add_block(ParamBlock<T> block) {
    if (find(block.name)) fail(ErrorCode::ShapeMismatch, "duplicate parameter block " + block.name);
    if (block.values.size() != block.element_count())
      fail(ErrorCode::ShapeMismatch, "block " + block.name + " has inconsistent dims");
    blocks_.push_back(std::move(block));
    ++version_;
  }

  void bump_version() noexcept { ++version_; }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_)
      if (!is_running_statistic(b.name)) n += b.values.size();
    return n;
  }

  /// Exact equality of names, dims and values; the version is ignored.
  bool same_values(const NetworkParams& other) const {
    if (blocks_.size() != other.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& a = blocks_[i];
      const auto& b = other.blocks_[i];
      if (a.name != b.name || a.dims != b.dims || a.values != b.values) return false;
    }
    return true;
  }

 private:
  std::vector<ParamBlock<T>> blocks_;
  std::uint64_t version_ = 0;
};

template <class To, class From>
NetworkParams<To> cast_params(const NetworkParams<From>& src) {
  NetworkParams<To> out;
  for (const auto& b : src.blocks()) {
    ParamBlock<To> c{b.name, b.dims, {}};
    c.values.reserve(b.values.size());
    for (From v : b.values) c.values.push_back(static_cast<To>(v));
    out.add_block(std::move(c));
  }
  return out;
}

/// Expected blocks (name, dims) for a spec, in layer order.
inline std::vector<ParamBlock<double>> expected_blocks(const NetworkSpec& spec) {
  std::vector<ParamBlock<double>> out;
  auto add = [&](const std::string& name, std::vector<std::size_t> dims) {
    ParamBlock<double> b{name, std::move(dims), {}};
    b.values.assign(b.element_count(), 0.0);
    out.push_back(std::move(b));
  };
  for (const auto& layer : spec.layers) {
    if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      add(layer.name + "/kernel", {c->kernel_h, c->kernel_w, c->in_channels, c->out_channels});
      if (c->has_batchnorm) {
        for (const char* role : {"/gamma", "/beta", "/moving_mean", "/moving_variance"})
          add(layer.name + role, {c->out_channels});
      } else if (c->has_bias) {
        add(layer.name + "/bias", {c->bias_site == BiasSite::Input ? c->in_channels : c->out_channels});
      }
    } else if (const auto* d = std::get_if<Dense>(&layer.kind)) {
      add(layer.name + "/kernel", {d->in_dim, d->out_dim});
      if (d->has_bias) add(layer.name + "/bias", {d->out_dim});
    } else if (const auto* s = std::get_if<SelfExpressive>(&layer.kind)) {
      add(layer.name + "/coefficients", {s->n, s->n});
    }
  }
  return out;
}

/// Seeded initialization: He-scaled Gaussian kernels (std sqrt(2 / fan_in)),
/// zero biases, gamma = 1, beta = 0, running mean 0, running variance 1, and
/// an all-zero self-expressive matrix. Dense layers marked Identity start at
/// the identity matrix.
template <class T = double>
NetworkParams<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams<double> out;
  std::uint64_t stream = 0;
  auto blocks = expected_blocks(spec);
  for (const auto& layer : spec.layers) {
    for (auto& b : blocks) {
      if (!b.name.starts_with(layer.name + "/")) continue;
      const std::string_view role = std::string_view(b.name).substr(layer.name.size() + 1);
      if (role == "kernel") {
        numkernel::SplitMix64 rng(numkernel::derive_seed(seed, stream++));
        if (const auto* d = std::get_if<Dense>(&layer.kind); d && d->init == DenseInit::Identity) {
          for (std::size_t i = 0; i < d->in_dim; ++i) b.values[i * d->out_dim + i] = 1.0;
        } else {
          // fan_in is the number of products feeding one output element
          const std::size_t fan_in = b.element_count() / b.dims.back();
          const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
          for (auto& v : b.values) v = stddev * rng.normal();
        }
      } else if (role == "gamma" || role == "moving_variance") {
        for (auto& v : b.values) v = 1.0;
      }
    }
  }
  for (auto& b : blocks) out.add_block(std::move(b));
  if constexpr (std::is_same_v<T, double>)
    return out;
  else
    return cast_params<T>(out);
}

/// Throws ShapeMismatch unless `params` holds every block `spec` needs with
/// the right dims and positive running variances.
template <class T>
void validate_params(const NetworkSpec& spec, const NetworkParams<T>& params) {
  for (const auto& expected : expected_blocks(spec)) {
    const auto* b = params.find(expected.name);
    if (!b) fail(ErrorCode::ShapeMismatch, "missing parameter block " + expected.name);
    if (b->dims != expected.dims) fail(ErrorCode::ShapeMismatch, "block " + expected.name + " has wrong dims");
    if (b->name.ends_with("/moving_variance"))
      for (T v : b->values)
        if (!(v > T{0})) fail(ErrorCode::ShapeMismatch, "running variance must be positive in " + b->name);
  }
}

}  // namespace subspacekit::neuralnet
