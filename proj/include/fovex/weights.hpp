#pragma once

// Predictor weight files.
//
// Little-endian layout:
//   "FVXW"                      4-byte magic
//   u32 version                 currently 1
//   u32 channels, height, width input shape
//   u32 classes
//   u32 layer_count
//   layer_count x (u32 kind, u32 a, u32 b, u32 c, u32 d, u32 e)
//       kind 1 conv    a=out b=in c=kh d=kw e=padding
//       kind 2 relu
//       kind 3 maxpool a=window
//       kind 4 flatten
//       kind 5 dense   a=out b=in
//   f64 payload: per conv kernel then bias, per dense weight then bias
//   u64 FNV-1a hash of every preceding byte

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/predictor.hpp"

namespace fovex {

namespace weights_detail {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr char kMagic[4] = {'F', 'V', 'X', 'W'};

enum Kind : std::uint32_t { conv = 1, relu_kind = 2, maxpool = 3, flatten_kind = 4, dense_kind = 5 };

inline std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > end_) throw ParseError(std::string("weight file truncated while reading ") + what, pos_);
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

inline Tensor read_tensor(Reader& in, Shape shape) {
  if (numel(shape) > in.remaining() / 8) {
    throw ParseError("weight file truncated: tensor " + to_string(shape) + " exceeds remaining payload", in.pos());
  }
  std::vector<double> v(numel(shape));
  for (double& x : v) x = in.f64("parameter payload");
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace weights_detail

inline std::vector<std::uint8_t> serialize_weights(const Predictor& p) {
  using namespace weights_detail;
  Writer out;
  out.raw(kMagic, 4);
  out.u32(kVersion);
  for (std::size_t d : p.input_shape()) out.u32(static_cast<std::uint32_t>(d));
  out.u32(static_cast<std::uint32_t>(p.num_classes()));
  out.u32(static_cast<std::uint32_t>(p.layers().size()));
  for (const auto& layer : p.layers()) {
    std::uint32_t f[6] = {};
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      const auto& s = c->kernel.shape();
      f[0] = conv;
      f[1] = std::uint32_t(s[0]);
      f[2] = std::uint32_t(s[1]);
      f[3] = std::uint32_t(s[2]);
      f[4] = std::uint32_t(s[3]);
      f[5] = std::uint32_t(c->padding);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      f[0] = relu_kind;
    } else if (const auto* m = std::get_if<MaxPoolLayer>(&layer)) {
      f[0] = maxpool;
      f[1] = std::uint32_t(m->window);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      f[0] = flatten_kind;
    } else {
      const auto& d = std::get<DenseLayer>(layer);
      f[0] = dense_kind;
      f[1] = std::uint32_t(d.weight.shape()[0]);
      f[2] = std::uint32_t(d.weight.shape()[1]);
    }
    for (auto v : f) out.u32(v);
  }
  for (const auto& t : p.parameters()) {
    for (double v : t.data()) out.f64(v);
  }
  out.u64(fnv1a(out.bytes().data(), out.bytes().size()));
  return std::move(out.bytes());
}

// Throws ParseError for malformed or truncated bytes and ArchitectureMismatch
// when the layer table disagrees with the header or with `expected_classes`
// (0 = accept any).
inline Predictor deserialize_weights(const std::vector<std::uint8_t>& bytes, std::size_t expected_classes = 0) {
  using namespace weights_detail;
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw ParseError("not a weight file (bad magic)", 0);
  }
  if (bytes.size() < 4 + 8) throw ParseError("weight file truncated while reading header", bytes.size());

  // All structural reads stop before the trailing checksum.
  Reader in(bytes, bytes.size() - 8);
  in.u32("magic");
  const std::uint32_t version = in.u32("version");
  if (version != kVersion) {
    throw ParseError("unsupported weight file version " + std::to_string(version), 4);
  }
  Shape input{in.u32("input shape"), in.u32("input shape"), in.u32("input shape")};
  const std::size_t classes = in.u32("class count");
  const std::size_t count = in.u32("layer count");
  if (count > 1024) throw ParseError("implausible layer count " + std::to_string(count), in.pos() - 4);

  struct Desc {
    std::uint32_t f[6];
    std::size_t offset;
  };
  std::vector<Desc> descs(count);
  for (auto& d : descs) {
    d.offset = in.pos();
    for (auto& v : d.f) v = in.u32("layer table");
  }

  std::vector<Layer> layers;
  for (const auto& d : descs) {
    switch (d.f[0]) {
      case conv: {
        Tensor k = read_tensor(in, {d.f[1], d.f[2], d.f[3], d.f[4]});
        Tensor b = read_tensor(in, {d.f[1]});
        layers.emplace_back(ConvLayer{std::move(k), std::move(b), d.f[5]});
        break;
      }
      case relu_kind:
        layers.emplace_back(ReluLayer{});
        break;
      case maxpool:
        layers.emplace_back(MaxPoolLayer{d.f[1]});
        break;
      case flatten_kind:
        layers.emplace_back(FlattenLayer{});
        break;
      case dense_kind: {
        Tensor w = read_tensor(in, {d.f[1], d.f[2]});
        Tensor b = read_tensor(in, {d.f[1]});
        layers.emplace_back(DenseLayer{std::move(w), std::move(b)});
        break;
      }
      default:
        throw ParseError("unknown layer kind " + std::to_string(d.f[0]), d.offset);
    }
  }
  if (in.pos() != bytes.size() - 8) {
    throw ParseError("unexpected trailing bytes after parameter payload", in.pos());
  }
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= std::uint64_t(bytes[bytes.size() - 8 + i]) << (8 * i);
  if (stored != fnv1a(bytes.data(), bytes.size() - 8)) {
    throw ParseError("weight file checksum mismatch", bytes.size() - 8);
  }

  if (expected_classes != 0 && expected_classes != classes) {
    throw ArchitectureMismatch("weight file declares " + std::to_string(classes) + " classes, expected " +
                               std::to_string(expected_classes));
  }
  return Predictor(std::move(input), classes, std::move(layers));
}

inline void save_weights(const Predictor& p, const std::string& path) {
  const auto bytes = serialize_weights(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline Predictor load_weights(const std::string& path, std::size_t expected_classes = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weight file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes, expected_classes);
}

}  // namespace fovex
