#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/checkpoint.hpp"
#include "subspacekit/numkernel/matrix.hpp"

// .csv  : decimal values, comma-separated, one row per line
// .sscm : "SSCM" | u64 rows | u64 cols | f64 values, row-major, little-endian

namespace subspacekit::evaldata {

using numkernel::Matrix;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    fail(ErrorCode::MalformedFile, "line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "'");
  return v;
}

template <class Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t start = 0, line = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line;
    const auto content = trim(std::string_view(text).substr(start, end - start));
    if (!content.empty()) fn(content, line);
    start = end + 1;
  }
}

inline std::string extension(const std::filesystem::path& p) { return p.extension().string(); }

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline Matrix parse_csv_matrix(const std::string& text) {
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  detail::for_each_line(text, [&](std::string_view content, std::size_t line) {
    std::size_t count = 0, start = 0;
    while (true) {
      const std::size_t comma = content.find(',', start);
      const auto field = content.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      values.push_back(detail::parse_double(field, line));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols)
      fail(ErrorCode::MalformedFile, "line " + std::to_string(line) + ": expected " + std::to_string(cols) +
                                         " values, found " + std::to_string(count));
    ++rows;
  });
  if (rows == 0) fail(ErrorCode::MalformedFile, "no data rows");
  return Matrix(rows, cols, std::move(values));
}

inline std::string format_csv_matrix(const Matrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += detail::format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string encode_sscm(const Matrix& m) {
  std::string out = "SSCM";
  neuralnet::detail::put_le<std::uint64_t>(out, m.rows());
  neuralnet::detail::put_le<std::uint64_t>(out, m.cols());
  for (double v : m.values()) neuralnet::detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Matrix decode_sscm(std::string bytes) {
  const std::size_t total = bytes.size();
  neuralnet::detail::ByteReader in(std::move(bytes));
  if (in.get_bytes(4) != "SSCM") fail(ErrorCode::MalformedFile, "bad matrix magic");
  const auto rows = in.get_le<std::uint64_t>();
  const auto cols = in.get_le<std::uint64_t>();
  if (rows == 0 || cols == 0) fail(ErrorCode::MalformedFile, "matrix must have positive dimensions");
  if (cols > (total - 20) / 8 || rows > (total - 20) / 8 / cols || rows * cols * 8 != total - 20)
    fail(ErrorCode::MalformedFile, "payload size does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = std::bit_cast<double>(in.get_le<std::uint64_t>());
  return Matrix(rows, cols, std::move(values));
}

/// Format chosen by extension: ".csv" or ".sscm".
inline Matrix load_matrix(const std::filesystem::path& path) {
  const auto ext = detail::extension(path);
  if (ext == ".sscm") return decode_sscm(neuralnet::detail::read_file(path));
  if (ext == ".csv") return parse_csv_matrix(neuralnet::detail::read_file(path));
  fail(ErrorCode::InvalidArgument, "unknown matrix extension '" + ext + "' (expected .csv or .sscm)");
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  const auto ext = detail::extension(path);
  if (ext == ".sscm")
    neuralnet::detail::write_file(path, encode_sscm(m));
  else if (ext == ".csv")
    neuralnet::detail::write_file(path, format_csv_matrix(m));
  else
    fail(ErrorCode::InvalidArgument, "unknown matrix extension '" + ext + "' (expected .csv or .sscm)");
}

/// One non-negative integer label per line.
inline std::vector<int> load_labels(const std::filesystem::path& path) {
  std::vector<int> labels;
  detail::for_each_line(neuralnet::detail::read_file(path), [&](std::string_view content, std::size_t line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(content.data(), content.data() + content.size(), v);
    if (ec != std::errc() || ptr != content.data() + content.size() || v < 0)
      fail(ErrorCode::MalformedFile, "line " + std::to_string(line) + ": bad label '" + std::string(content) + "'");
    labels.push_back(v);
  });
  if (labels.empty()) fail(ErrorCode::MalformedFile, "no labels in " + path.string());
  return labels;
}

inline void save_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::string out;
  for (int l : labels) out += std::to_string(l) + '\n';
  neuralnet::detail::write_file(path, out);
}

}  // namespace subspacekit::evaldata
