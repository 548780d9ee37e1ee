#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/neuralnet/checkpoint.hpp"
#include "subspacekit/numkernel/matrix.hpp"

namespace subspacekit::evaldata {

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // row-major, raw 0..maxval
};

namespace detail {

inline std::size_t pgm_header_number(const std::string& bytes, std::size_t& pos, const std::string& file) {
  while (pos < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t v = 0, digits = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (++digits > 9) fail(ErrorCode::MalformedFile, file + ": header value too large");
    ++pos;
  }
  if (digits == 0) fail(ErrorCode::MalformedFile, file + ": malformed PGM header");
  return v;
}

}  // namespace detail

/// Binary 8-bit PGM (P5).
inline GrayImage decode_pgm(const std::string& bytes, const std::string& file = "pgm") {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail(ErrorCode::MalformedFile, file + ": not a P5 PGM");
  std::size_t pos = 2;
  GrayImage img;
  img.width = detail::pgm_header_number(bytes, pos, file);
  img.height = detail::pgm_header_number(bytes, pos, file);
  const std::size_t maxval = detail::pgm_header_number(bytes, pos, file);
  if (img.width == 0 || img.height == 0) fail(ErrorCode::MalformedFile, file + ": zero image size");
  if (maxval == 0 || maxval > 255) fail(ErrorCode::MalformedFile, file + ": only 8-bit PGM is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail(ErrorCode::MalformedFile, file + ": malformed PGM header");
  ++pos;
  const std::size_t count = img.width * img.height;
  if (bytes.size() - pos < count) fail(ErrorCode::MalformedFile, file + ": truncated pixel data");
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) img.pixels[i] = static_cast<unsigned char>(bytes[pos + i]);
  return img;
}

/// Bilinear resampling with half-pixel centers and edge clamping.
inline std::vector<double> resize_bilinear(const GrayImage& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) fail(ErrorCode::InvalidArgument, "target size must be positive");
  std::vector<double> out(out_h * out_w);
  auto source = [](std::size_t dst, std::size_t in, std::size_t outn, std::size_t& lo, std::size_t& hi, double& t) {
    double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, in - 1);
    t = s - static_cast<double>(lo);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double ty;
    source(y, img.height, out_h, y0, y1, ty);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double tx;
      source(x, img.width, out_w, x0, x1, tx);
      const auto px = [&](std::size_t r, std::size_t c) { return img.pixels[r * img.width + c]; };
      const double top = (1 - tx) * px(y0, x0) + tx * px(y0, x1);
      const double bottom = (1 - tx) * px(y1, x0) + tx * px(y1, x1);
      out[y * out_w + x] = (1 - ty) * top + ty * bottom;
    }
  }
  return out;
}

/// Every *.pgm file in `dir`, sorted by file name, resized to
/// target_h x target_w, flattened row-major and scaled by 1/255.
inline numkernel::Matrix load_pgm_dir(const std::filesystem::path& dir, std::size_t target_h, std::size_t target_w) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) fail(ErrorCode::IoFailure, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  if (files.empty()) fail(ErrorCode::EmptyDirectory, "no .pgm files in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  numkernel::Matrix out(files.size(), target_h * target_w);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto img = decode_pgm(neuralnet::detail::read_file(files[i]), files[i].filename().string());
    const auto row = resize_bilinear(img, target_h, target_w);
    for (std::size_t j = 0; j < row.size(); ++j) out(i, j) = row[j] / 255.0;
  }
  return out;
}

}  // namespace subspacekit::evaldata
