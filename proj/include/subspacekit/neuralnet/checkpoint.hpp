#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/params.hpp"

// Checkpoint layout (all integers and reals little-endian):
//   "SKCP" | u32 version
//   repeated until end of file:
//     u32 name_length | name bytes | u32 rank | u64 dims[rank] | f64 values[prod(dims)]

namespace subspacekit::neuralnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  bool at_end() const { return pos_ == bytes_.size(); }

  template <class U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::MalformedFile, "unexpected end of file");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace detail

template <class T>
std::string encode_checkpoint(const NetworkParams<T>& params) {
  std::string out = "SKCP";
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& b : params.blocks()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.dims.size()));
    for (auto d : b.dims) detail::put_le<std::uint64_t>(out, d);
    for (T v : b.values) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
  }
  return out;
}

inline NetworkParams<double> decode_checkpoint(std::string bytes) {
  detail::ByteReader in(std::move(bytes));
  if (in.get_bytes(4) != "SKCP") fail(ErrorCode::MalformedFile, "bad checkpoint magic");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(ErrorCode::MalformedFile, "unsupported checkpoint version " + std::to_string(version));
  NetworkParams<double> params;
  while (!in.at_end()) {
    ParamBlock<double> b;
    b.name = in.get_bytes(in.get_le<std::uint32_t>());
    const auto rank = in.get_le<std::uint32_t>();
    if (rank > 8) fail(ErrorCode::MalformedFile, "implausible rank in block " + b.name);
    for (std::uint32_t r = 0; r < rank; ++r) b.dims.push_back(static_cast<std::size_t>(in.get_le<std::uint64_t>()));
    const std::size_t count = b.element_count();
    if (count > (std::size_t{1} << 40)) fail(ErrorCode::MalformedFile, "implausible size in block " + b.name);
    b.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) b.values.push_back(std::bit_cast<double>(in.get_le<std::uint64_t>()));
    if (params.find(b.name)) fail(ErrorCode::MalformedFile, "duplicate block " + b.name);
    params.add_block(std::move(b));
  }
  return params;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const NetworkParams<T>& params) {
  detail::write_file(path, encode_checkpoint(params));
}

inline NetworkParams<double> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace subspacekit::neuralnet
