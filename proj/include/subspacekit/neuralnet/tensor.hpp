#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/matrix.hpp"

namespace subspacekit::neuralnet {

/// Per-sample shape in height x width x channels order. Flat vectors use
/// 1 x 1 x D.
struct SampleShape {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const noexcept { return height * width * channels; }
  bool operator==(const SampleShape&) const = default;

  std::string to_string() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }
};

/// Batch tensor in NHWC layout.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t batch, SampleShape shape, T fill = T{0})
      : batch_(batch), shape_(shape), data_(batch * shape.size(), fill) {}

  std::size_t batch() const noexcept { return batch_; }
  const SampleShape& shape() const noexcept { return shape_; }
  std::size_t sample_size() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) noexcept {
    return data_[((n * shape_.height + h) * shape_.width + w) * shape_.channels + c];
  }
  const T& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const noexcept {
    return data_[((n * shape_.height + h) * shape_.width + w) * shape_.channels + c];
  }

  std::span<T> sample(std::size_t n) noexcept { return {data_.data() + n * sample_size(), sample_size()}; }
  std::span<const T> sample(std::size_t n) const noexcept { return {data_.data() + n * sample_size(), sample_size()}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  /// Reinterprets the per-sample layout; the element count must not change.
  Tensor reshaped(SampleShape shape) const {
    if (shape.size() != shape_.size()) fail(ErrorCode::ShapeMismatch, "reshape changes the sample size");
    Tensor out = *this;
    out.shape_ = shape;
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t batch_ = 0;
  SampleShape shape_{};
  std::vector<T> data_;
};

/// One matrix row per sample, flattened in HWC order.
template <class T>
Tensor<T> tensor_from_matrix(const numkernel::Matrix& m, SampleShape shape) {
  if (m.cols() != shape.size())
    fail(ErrorCode::ShapeMismatch,
         "data has " + std::to_string(m.cols()) + " columns but the network expects " + shape.to_string());
  Tensor<T> t(m.rows(), shape);
  auto dst = t.values();
  auto src = m.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
  return t;
}

template <class T>
numkernel::Matrix matrix_from_tensor(const Tensor<T>& t) {
  numkernel::Matrix m(t.batch(), t.sample_size());
  auto dst = m.values();
  auto src = t.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  return m;
}

}  // namespace subspacekit::neuralnet
