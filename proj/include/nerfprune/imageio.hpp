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

#include <filesystem>

#include "nerfprune/image.hpp"

// Raster files from the portable pixmap family:
//   .ppm (P6, 8-bit RGB), .pgm (P5, 8-bit grey), .pfm (PF, 32-bit float RGB).

namespace nerfprune {

/// 8-bit RGB; values are clamped to [0, 1] and rounded to the nearest level.
void write_image(const std::filesystem::path& path, const Image& image);
/// Reads an 8-bit P6 file into [0, 1] floats. Throws IoError if missing,
/// DecodeError (naming the file) if malformed or truncated.
Image read_image(const std::filesystem::path& path);
/// Width and height from a P6 header without reading the pixel data.
std::pair<std::size_t, std::size_t> read_image_size(const std::filesystem::path& path);

/// 8-bit single-channel image (values clamped to [0, 1]).
void write_gray(const std::filesystem::path& path, const Image& image);

/// Lossless float RGB; little-endian, rows stored bottom-up per the format.
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

}  // namespace nerfprune
