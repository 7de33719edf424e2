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

#include "nerfprune/imageio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "nerfprune/error.hpp"

namespace nerfprune {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& header,
               const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("write failed for " + path.string());
}

struct Header {
  std::string magic;
  std::size_t width = 0;
  std::size_t height = 0;
  std::string scale;  // maxval for P5/P6, scale for PF
  std::size_t data_offset = 0;
};

// Parses whitespace-separated header tokens (with '#' comments) and the
// single whitespace byte that precedes the raster.
Header parse_header(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  Header h;
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    if (tok.empty()) {
      throw DecodeError(DecodeErrorKind::kTruncated, path.string() + ": header ends early");
    }
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoul(next_token());
    h.height = std::stoul(next_token());
  } catch (const std::logic_error&) {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": bad image dimensions");
  }
  h.scale = next_token();
  if (pos >= bytes.size()) {
    throw DecodeError(DecodeErrorKind::kTruncated, path.string() + ": no pixel data");
  }
  h.data_offset = pos + 1;
  if (h.width == 0 || h.height == 0) {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": zero image dimension");
  }
  return h;
}

std::uint8_t quantize(float v) {
  const float c = std::clamp(std::isnan(v) ? 0.0f : v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

Image read_8bit(const std::filesystem::path& path, const char* magic, std::size_t channels) {
  const auto bytes = read_all(path);
  const Header h = parse_header(bytes, path);
  if (h.magic != magic) {
    throw DecodeError(DecodeErrorKind::kBadMagic,
                      path.string() + ": expected " + magic + ", found " + h.magic);
  }
  if (h.scale != "255") {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": only maxval 255 supported");
  }
  const std::size_t need = h.width * h.height * channels;
  if (bytes.size() < h.data_offset + need) {
    throw DecodeError(DecodeErrorKind::kTruncated,
                      path.string() + ": pixel data truncated (" +
                          std::to_string(bytes.size() - std::min(bytes.size(), h.data_offset)) +
                          " of " + std::to_string(need) + " bytes)");
  }
  Image img(h.width, h.height, channels);
  for (std::size_t i = 0; i < need; ++i) img.pixels[i] = bytes[h.data_offset + i] / 255.0f;
  return img;
}

}  // namespace

void write_image(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw ContractError("write_image expects 3 channels");
  std::vector<std::uint8_t> data(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), data.begin(), quantize);
  write_all(path, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
            data.data(), data.size());
}

Image read_image(const std::filesystem::path& path) { return read_8bit(path, "P6", 3); }

std::pair<std::size_t, std::size_t> read_image_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> head(64);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const Header h = parse_header(head, path);
  if (h.magic != "P6") throw DecodeError(DecodeErrorKind::kBadMagic, path.string() + ": not P6");
  return {h.width, h.height};
}

void write_gray(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1) throw ContractError("write_gray expects 1 channel");
  std::vector<std::uint8_t> data(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), data.begin(), quantize);
  write_all(path, "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
            data.data(), data.size());
}

void write_pfm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw ContractError("write_pfm expects 3 channels");
  std::vector<std::uint32_t> data(image.pixels.size());
  const std::size_t row = image.width * 3;
  for (std::size_t y = 0; y < image.height; ++y) {
    const std::size_t src = (image.height - 1 - y) * row;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(image.pixels[src + i]);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      data[y * row + i] = bits;
    }
  }
  write_all(path, "PF\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n",
            data.data(), data.size() * 4);
}

Image read_pfm(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const Header h = parse_header(bytes, path);
  if (h.magic != "PF") throw DecodeError(DecodeErrorKind::kBadMagic, path.string() + ": not PF");
  double scale = 0.0;
  try {
    scale = std::stod(h.scale);
  } catch (const std::logic_error&) {
    throw DecodeError(DecodeErrorKind::kMalformed, path.string() + ": bad PFM scale");
  }
  const bool little = scale < 0.0;
  const std::size_t row = h.width * 3;
  const std::size_t need = row * h.height * 4;
  if (bytes.size() < h.data_offset + need) {
    throw DecodeError(DecodeErrorKind::kTruncated, path.string() + ": float data truncated");
  }
  Image img(h.width, h.height, 3);
  const bool swap = little != (std::endian::native == std::endian::little);
  for (std::size_t y = 0; y < h.height; ++y) {
    const std::size_t dst = (h.height - 1 - y) * row;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + h.data_offset + (y * row + i) * 4, 4);
      if (swap) bits = __builtin_bswap32(bits);
      img.pixels[dst + i] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

}  // namespace nerfprune
