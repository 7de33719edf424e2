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

#include "nerfprune/error.hpp"

namespace nerfprune {

const char* to_string(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::kTruncated: return "truncated";
    case DecodeErrorKind::kBadMagic: return "bad magic";
    case DecodeErrorKind::kUnsupportedVersion: return "unsupported version";
    case DecodeErrorKind::kChecksumMismatch: return "checksum mismatch";
    case DecodeErrorKind::kPopcountMismatch: return "popcount mismatch";
    case DecodeErrorKind::kMalformed: return "malformed";
  }
  return "decode error";
}

}  // namespace nerfprune
