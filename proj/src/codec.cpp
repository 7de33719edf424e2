// Copyright 2026 The nerfprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nerfprune/codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "nerfprune/error.hpp"

namespace nerfprune {

namespace {

constexpr std::uint16_t kFlagIdentity = 1u << 0;
constexpr std::uint16_t kNoSkip = 0xFFFF;

// Dense layers say how to rebuild the mask.
enum class MaskMode : std::uint8_t {
  kAllKept = 0,     // no pruned positions
  kNonzero = 1,     // kept iff the stored bits are non-zero
  kExplicit = 2,    // bitmap follows the values
};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DecodeError(DecodeErrorKind::kTruncated,
                        std::string(what) + " needs " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ", " + std::to_string(remaining()) + " left");
    }
  }
  std::uint64_t uint(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(uint(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(uint(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint(4, what)); }
  std::uint64_t u64(const char* what) { return uint(8, what); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

bool is_kept_by_bits(float v) { return std::bit_cast<std::uint32_t>(v) != 0u; }

std::vector<std::uint8_t> pack_bitmap(const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> bits((mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return bits;
}

MaskMode dense_mask_mode(const MaskedMatrix& w) {
  const std::size_t kept = w.kept();
  if (kept == w.size()) return MaskMode::kAllKept;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if ((w.mask[i] != 0) != is_kept_by_bits(w.values[i])) return MaskMode::kExplicit;
  }
  return MaskMode::kNonzero;
}

std::size_t dense_payload(const MaskedMatrix& w) {
  const std::size_t base = 4 * w.size();
  return dense_mask_mode(w) == MaskMode::kExplicit ? base + (w.size() + 7) / 8 : base;
}

std::size_t sparse_payload(const MaskedMatrix& w) {
  return (w.size() + 7) / 8 + 4 + 4 * w.kept();
}

void write_network_header(Writer& out, const NetworkSpec& spec) {
  out.u64(spec.seed);
  out.u16(static_cast<std::uint16_t>(spec.layer_count()));
  out.u16(spec.skip_input_at ? static_cast<std::uint16_t>(*spec.skip_input_at) : kNoSkip);
  out.u8(static_cast<std::uint8_t>(spec.hidden_activation));
  out.u8(0);
  out.u16(0);
  for (std::size_t w : spec.layer_widths) out.u32(static_cast<std::uint32_t>(w));
}

void write_layer(Writer& out, const DenseLayer& layer, LayerEncoding enc) {
  const auto& w = layer.weight;
  out.u8(static_cast<std::uint8_t>(enc));
  const MaskMode mode = enc == LayerEncoding::kDense ? dense_mask_mode(w) : MaskMode::kAllKept;
  out.u8(enc == LayerEncoding::kDense ? static_cast<std::uint8_t>(mode) : 0);
  out.u16(0);
  out.u32(static_cast<std::uint32_t>(w.rows));
  out.u32(static_cast<std::uint32_t>(w.cols));
  if (enc == LayerEncoding::kDense) {
    for (float v : w.values) out.f32(v);
    if (mode == MaskMode::kExplicit) out.raw(pack_bitmap(w.mask));
  } else {
    out.raw(pack_bitmap(w.mask));
    out.u32(static_cast<std::uint32_t>(w.kept()));
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w.mask[i]) out.f32(w.values[i]);
    }
  }
  out.u32(static_cast<std::uint32_t>(layer.bias.size()));
  for (float b : layer.bias.values) out.f32(b);
}

void check_fits_u16(std::size_t v, const char* what) {
  if (v >= 0xFFFF) throw ContractError(std::string(what) + " too large for the model format");
}

std::vector<std::uint8_t> serialize(const RadianceField& field,
                                    const std::vector<LayerEncoding>& encodings) {
  const auto& enc = field.encoding();
  check_fits_u16(enc.l_pos, "l_pos");
  check_fits_u16(enc.l_dir, "l_dir");
  Writer out;
  for (char c : kModelMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u16(kModelVersion);
  out.u16(enc.include_identity ? kFlagIdentity : 0);
  out.u64(field.seed());
  out.u16(static_cast<std::uint16_t>(enc.l_pos));
  out.u16(static_cast<std::uint16_t>(enc.l_dir));
  out.u16(2);
  out.u16(0);
  std::size_t li = 0;
  for (const Mlp* net : {&field.trunk(), &field.head()}) {
    check_fits_u16(net->spec().layer_count(), "layer count");
    write_network_header(out, net->spec());
    for (const auto& layer : net->layers()) write_layer(out, layer, encodings[li++]);
  }
  const std::uint32_t crc = crc32_of(out.bytes());
  out.u32(crc);
  return std::move(out.bytes());
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = crc32(crc, data.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

EncodedModel encode_model(const RadianceField& field, std::optional<LayerEncoding> force) {
  const auto sparsity = verify_sparsity(field);
  if (sparsity.violations != 0) {
    throw ContractError("refusing to serialize: " + std::to_string(sparsity.violations) +
                        " pruned positions hold non-zero values");
  }
  EncodedModel result;
  std::vector<LayerEncoding> chosen;
  std::vector<LayerEncoding> all_dense;
  for (const Mlp* net : {&field.trunk(), &field.head()}) {
    for (const auto& layer : net->layers()) {
      LayerBytes lb;
      lb.dense_bytes = dense_payload(layer.weight);
      const std::size_t sparse = sparse_payload(layer.weight);
      lb.encoding = force ? *force
                          : (sparse < lb.dense_bytes ? LayerEncoding::kBitmapSparse
                                                     : LayerEncoding::kDense);
      lb.encoded_bytes = lb.encoding == LayerEncoding::kDense ? lb.dense_bytes : sparse;
      chosen.push_back(lb.encoding);
      all_dense.push_back(LayerEncoding::kDense);
      result.report.layers.push_back(lb);
    }
  }
  result.bytes = serialize(field, chosen);
  result.report.encoded_bytes = result.bytes.size();
  result.report.dense_bytes = chosen == all_dense ? result.bytes.size()
                                                  : serialize(field, all_dense).size();
  result.report.measured_ratio = static_cast<double>(result.report.dense_bytes) /
                                 static_cast<double>(result.report.encoded_bytes);
  return result;
}

namespace {

DecodeError malformed(const std::string& msg) {
  return DecodeError(DecodeErrorKind::kMalformed, msg);
}

std::vector<std::uint8_t> unpack_bitmap(std::span<const std::uint8_t> bits, std::size_t n,
                                        const std::string& where) {
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t i = 0; i < n; ++i) mask[i] = (bits[i / 8] >> (i % 8)) & 1u;
  if (n % 8 != 0 && (bits.back() >> (n % 8)) != 0) {
    throw malformed(where + ": non-zero bitmap padding bits");
  }
  return mask;
}

Mlp read_network(Reader& in, std::size_t net_index, std::size_t& layer_counter) {
  const std::string net_name = "network " + std::to_string(net_index);
  NetworkSpec spec;
  spec.seed = in.u64("network seed");
  const std::size_t layer_count = in.u16("layer count");
  const std::uint16_t skip = in.u16("skip index");
  const std::uint8_t activation = in.u8("activation");
  if (activation != static_cast<std::uint8_t>(Activation::kRelu)) {
    throw malformed(net_name + ": unknown activation " + std::to_string(activation));
  }
  in.u8("reserved");
  in.u16("reserved");
  if (layer_count == 0) throw malformed(net_name + ": zero layers");
  for (std::size_t i = 0; i <= layer_count; ++i) spec.layer_widths.push_back(in.u32("width"));
  if (skip != kNoSkip) spec.skip_input_at = skip;
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw malformed(net_name + ": invalid spec: " + e.what());
  }

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l < layer_count; ++l, ++layer_counter) {
    const std::size_t layer_offset = in.offset();
    const std::string where = "layer " + std::to_string(layer_counter) + " (" + net_name +
                              ", offset " + std::to_string(layer_offset) + ")";
    const std::uint8_t tag = in.u8("layer tag");
    const std::uint8_t mode = in.u8("mask mode");
    in.u16("reserved");
    const std::size_t rows = in.u32("rows");
    const std::size_t cols = in.u32("cols");
    if (rows != spec.layer_widths[l + 1] || cols != spec.fan_in(l)) {
      throw malformed(where + ": shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " does not match the network spec");
    }
    DenseLayer layer{MaskedMatrix(rows, cols), BiasVector(rows)};
    auto& w = layer.weight;
    const std::size_t n = rows * cols;
    const std::size_t bitmap_bytes = (n + 7) / 8;
    if (tag == static_cast<std::uint8_t>(LayerEncoding::kDense)) {
      in.need(4 * n, "dense values");
      for (std::size_t i = 0; i < n; ++i) w.values[i] = in.f32("dense value");
      switch (static_cast<MaskMode>(mode)) {
        case MaskMode::kAllKept:
          break;
        case MaskMode::kNonzero:
          for (std::size_t i = 0; i < n; ++i) w.mask[i] = is_kept_by_bits(w.values[i]) ? 1 : 0;
          break;
        case MaskMode::kExplicit:
          w.mask = unpack_bitmap(in.take(bitmap_bytes, "mask bitmap"), n, where);
          for (std::size_t i = 0; i < n; ++i) {
            if (!w.mask[i] && is_kept_by_bits(w.values[i])) {
              throw malformed(where + ": pruned position " + std::to_string(i) +
                              " holds a non-zero value");
            }
          }
          break;
        default:
          throw malformed(where + ": unknown mask mode " + std::to_string(mode));
      }
    } else if (tag == static_cast<std::uint8_t>(LayerEncoding::kBitmapSparse)) {
      if (mode != 0) throw malformed(where + ": sparse layer with mask mode " + std::to_string(mode));
      w.mask = unpack_bitmap(in.take(bitmap_bytes, "mask bitmap"), n, where);
      const std::size_t popcount = static_cast<std::size_t>(
          std::count(w.mask.begin(), w.mask.end(), std::uint8_t{1}));
      const std::size_t count = in.u32("surviving count");
      if (count != popcount) {
        throw DecodeError(DecodeErrorKind::kPopcountMismatch,
                          where + ": surviving count " + std::to_string(count) +
                              " but bitmap popcount " + std::to_string(popcount));
      }
      in.need(4 * count, "surviving values");
      for (std::size_t i = 0; i < n; ++i) {
        if (w.mask[i]) w.values[i] = in.f32("surviving value");
      }
    } else {
      throw malformed(where + ": unknown layer tag " + std::to_string(tag));
    }
    const std::size_t bias_len = in.u32("bias length");
    if (bias_len != rows) {
      throw malformed(where + ": bias length " + std::to_string(bias_len) + " != rows " +
                      std::to_string(rows));
    }
    in.need(4 * bias_len, "biases");
    for (std::size_t i = 0; i < bias_len; ++i) layer.bias.values[i] = in.f32("bias");
    layers.push_back(std::move(layer));
  }
  return Mlp::from_layers(spec, std::move(layers));
}

}  // namespace

RadianceField decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kModelMagic)) {
    throw DecodeError(DecodeErrorKind::kTruncated,
                      "file has " + std::to_string(bytes.size()) + " bytes, shorter than the magic");
  }
  if (!std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin())) {
    throw DecodeError(DecodeErrorKind::kBadMagic, "offset 0: magic is not NRFP");
  }
  constexpr std::size_t kMinSize = 24 + 4;
  if (bytes.size() < kMinSize) {
    throw DecodeError(DecodeErrorKind::kTruncated,
                      "file has " + std::to_string(bytes.size()) + " bytes, header needs " +
                          std::to_string(kMinSize));
  }
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kModelVersion) {
    throw DecodeError(DecodeErrorKind::kUnsupportedVersion,
                      "offset 4: format version " + std::to_string(version) + ", expected " +
                          std::to_string(kModelVersion));
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.last(4));
  const std::uint32_t stored = trailer.u32("checksum");
  const std::uint32_t actual = crc32_of(body);
  if (stored != actual) {
    throw DecodeError(DecodeErrorKind::kChecksumMismatch,
                      "offset " + std::to_string(body.size()) + ": stored CRC-32 " +
                          std::to_string(stored) + " != computed " + std::to_string(actual));
  }

  Reader in(body);
  in.take(6, "magic and version");
  const std::uint16_t flags = in.u16("flags");
  if ((flags & ~kFlagIdentity) != 0) {
    throw malformed("offset 6: unknown flag bits " + std::to_string(flags));
  }
  EncodingConfig enc;
  enc.include_identity = (flags & kFlagIdentity) != 0;
  const std::uint64_t seed = in.u64("seed");
  enc.l_pos = in.u16("l_pos");
  enc.l_dir = in.u16("l_dir");
  const std::size_t networks = in.u16("network count");
  in.u16("reserved");
  if (networks != 2) {
    throw malformed("offset 20: expected 2 networks, found " + std::to_string(networks));
  }
  try {
    enc.validate();
  } catch (const ConfigError& e) {
    throw malformed(std::string("encoding config: ") + e.what());
  }
  std::size_t layer_counter = 0;
  Mlp trunk = read_network(in, 0, layer_counter);
  Mlp head = read_network(in, 1, layer_counter);
  if (in.remaining() != 0) {
    throw malformed("offset " + std::to_string(in.offset()) + ": " +
                    std::to_string(in.remaining()) + " unexpected trailing bytes");
  }
  try {
    return RadianceField::from_networks(enc, std::move(trunk), std::move(head), seed);
  } catch (const ContractError& e) {
    throw malformed(std::string("networks do not form a field: ") + e.what());
  }
}

ByteReport save_model(const RadianceField& field, const std::filesystem::path& path,
                      std::optional<LayerEncoding> force) {
  auto encoded = encode_model(field, force);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(encoded.bytes.data()),
              static_cast<std::streamsize>(encoded.bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  return encoded.report;
}

RadianceField load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

CompressionSummary compression_summary(const PruneReport& prune, const ByteReport& bytes) {
  return {1.0 / (1.0 - prune.ratio), bytes.measured_ratio};
}

}  // namespace nerfprune
