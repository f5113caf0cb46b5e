#pragma once

// Portable graymap/pixmap (PGM/PPM) reading and writing. Reads P2, P3, P5 and
// P6 with any max value up to 65535; writes binary 8-bit P5/P6.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/tensor.hpp"

namespace fovex {

struct PnmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 for graymaps, 3 for pixmaps
  unsigned max_value = 255;
  std::vector<std::uint16_t> samples;  // interleaved, row-major
};

namespace pnm_detail {

class Cursor {
 public:
  explicit Cursor(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

  // Skips whitespace and '#' comments, then reads an unsigned decimal.
  unsigned long number(const char* what, bool allow_comments = true) {
    for (;;) {
      while (pos_ < b_.size() && std::isspace(b_[pos_])) ++pos_;
      if (allow_comments && pos_ < b_.size() && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    if (pos_ >= b_.size()) throw ParseError(std::string("unexpected end of file reading ") + what, pos_);
    if (!std::isdigit(b_[pos_])) throw ParseError(std::string("expected a number for ") + what, pos_);
    unsigned long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 0xFFFFFFFFul) throw ParseError(std::string("number too large for ") + what, pos_);
    }
    return v;
  }

  std::uint8_t byte(const char* what) {
    if (pos_ >= b_.size()) throw ParseError(std::string("truncated payload reading ") + what, pos_);
    return b_[pos_++];
  }

  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }
  std::size_t size() const { return b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace pnm_detail

inline PnmImage parse_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError("missing PNM magic number", 0);
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw ParseError(std::string("unsupported PNM variant P") + kind, 1);
  }
  const bool ascii = kind == '2' || kind == '3';
  PnmImage img;
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;

  pnm_detail::Cursor cur(bytes);
  cur.skip(2);
  img.width = cur.number("width");
  img.height = cur.number("height");
  const std::size_t max_pos = cur.pos();
  const unsigned long maxv = cur.number("max value");
  if (maxv == 0 || maxv > 65535) {
    throw ParseError("unsupported max value " + std::to_string(maxv), max_pos);
  }
  img.max_value = static_cast<unsigned>(maxv);
  if (img.width == 0 || img.height == 0) throw ParseError("image has zero area", max_pos);

  const std::size_t count = img.width * img.height * img.channels;
  img.samples.resize(count);
  if (ascii) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t at = cur.pos();
      const unsigned long v = cur.number("sample");
      if (v > maxv) throw ParseError("sample " + std::to_string(v) + " exceeds max value", at);
      img.samples[i] = static_cast<std::uint16_t>(v);
    }
  } else {
    // Exactly one whitespace byte separates the header from the payload.
    if (!std::isspace(cur.byte("header terminator"))) throw ParseError("missing whitespace after max value", cur.pos() - 1);
    const std::size_t width = maxv > 255 ? 2 : 1;
    if (cur.size() - cur.pos() < count * width) {
      throw ParseError("truncated payload: need " + std::to_string(count * width) + " bytes, have " +
                           std::to_string(cur.size() - cur.pos()),
                       cur.size());
    }
    for (std::size_t i = 0; i < count; ++i) {
      std::uint16_t v = cur.byte("sample");
      if (width == 2) v = static_cast<std::uint16_t>((v << 8) | cur.byte("sample"));
      if (v > maxv) throw ParseError("sample " + std::to_string(v) + " exceeds max value", cur.pos() - width);
      img.samples[i] = v;
    }
  }
  return img;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline PnmImage read_pnm(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_pnm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset());
  }
}

// 8-bit quantization, round half up.
inline std::uint8_t quantize(double v) {
  const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(q);
}

inline std::vector<std::uint8_t> encode_pnm(const PnmImage& img, const std::string& comment = {}) {
  if (img.max_value > 255) throw DataError("only 8-bit PNM output is supported");
  std::string header = img.channels == 3 ? "P6\n" : "P5\n";
  if (!comment.empty()) {
    std::string line = comment;
    std::replace(line.begin(), line.end(), '\n', ' ');
    header += "# " + line + "\n";
  }
  header += std::to_string(img.width) + " " + std::to_string(img.height) + "\n" + std::to_string(img.max_value) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (auto s : img.samples) out.push_back(static_cast<std::uint8_t>(s));
  return out;
}

inline void write_pnm(const std::string& path, const PnmImage& img, const std::string& comment = {}) {
  const auto bytes = encode_pnm(img, comment);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

// [C,H,W] tensor with values sample / max_value.
inline Tensor to_tensor(const PnmImage& img) {
  const std::size_t C = img.channels, H = img.height, W = img.width;
  std::vector<double> v(C * H * W);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      for (std::size_t ch = 0; ch < C; ++ch) {
        v[(ch * H + r) * W + c] = double(img.samples[(r * W + c) * C + ch]) / double(img.max_value);
      }
    }
  }
  return Tensor({C, H, W}, std::move(v));
}

inline PnmImage from_tensor(const Tensor& t) {
  if (t.rank() != 3 || (t.shape()[0] != 1 && t.shape()[0] != 3)) {
    throw ShapeError("images must be [1,H,W] or [3,H,W], got " + to_string(t.shape()));
  }
  PnmImage img;
  img.channels = t.shape()[0];
  img.height = t.shape()[1];
  img.width = t.shape()[2];
  img.samples.resize(t.size());
  auto d = t.data();
  const std::size_t H = img.height, W = img.width, C = img.channels;
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      for (std::size_t ch = 0; ch < C; ++ch) img.samples[(r * W + c) * C + ch] = quantize(d[(ch * H + r) * W + c]);
    }
  }
  return img;
}

inline Tensor load_image(const std::string& path) { return to_tensor(read_pnm(path)); }

inline void save_image(const std::string& path, const Tensor& t, const std::string& comment = {}) {
  write_pnm(path, from_tensor(t), comment);
}

}  // namespace fovex
