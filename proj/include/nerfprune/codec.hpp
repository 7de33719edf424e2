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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "nerfprune/field.hpp"
#include "nerfprune/pruner.hpp"

namespace nerfprune {

/// Wire layout is documented in docs/model_format.md.
inline constexpr char kModelMagic[4] = {'N', 'R', 'F', 'P'};
inline constexpr std::uint16_t kModelVersion = 1;

enum class LayerEncoding : std::uint8_t { kDense = 0, kBitmapSparse = 1 };

struct LayerBytes {
  LayerEncoding encoding = LayerEncoding::kDense;
  std::size_t dense_bytes = 0;
  std::size_t encoded_bytes = 0;
};

struct ByteReport {
  std::size_t dense_bytes = 0;    // whole file with every layer stored dense
  std::size_t encoded_bytes = 0;  // whole file as written
  double measured_ratio = 1.0;    // dense_bytes / encoded_bytes
  std::vector<LayerBytes> layers;
};

struct EncodedModel {
  std::vector<std::uint8_t> bytes;
  ByteReport report;
};

/// Serializes a field. Without `force`, each layer takes the smaller of the
/// two encodings (dense on ties). Throws ContractError on sparsity violations.
EncodedModel encode_model(const RadianceField& field,
                          std::optional<LayerEncoding> force = std::nullopt);

/// Throws DecodeError naming the offending offset or layer.
RadianceField decode_model(std::span<const std::uint8_t> bytes);

ByteReport save_model(const RadianceField& field, const std::filesystem::path& path,
                      std::optional<LayerEncoding> force = std::nullopt);
RadianceField load_model(const std::filesystem::path& path);

struct CompressionSummary {
  double nominal_ratio = 1.0;   // 1 / (1 - p)
  double measured_ratio = 1.0;  // bytes, from the codec
};

CompressionSummary compression_summary(const PruneReport& prune, const ByteReport& bytes);

/// zlib CRC-32 of `data`.
std::uint32_t crc32_of(std::span<const std::uint8_t> data);

}  // namespace nerfprune
