// Copyright 2026 The pgac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "pgac/params.hpp"

namespace pgac {

inline constexpr char kCheckpointMagic[8] = {'P', 'G', 'A', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers little-endian:
//   magic[8] u32 version
//   u32 n, digest[n]          config digest
//   u32 n, meta[n]            free-form text (canonical config, counters)
//   u64 blocks, then per block:
//     u32 n, name[n] u32 rank(=2) u64 rows u64 cols f64[rows*cols] row-major
struct Checkpoint {
  std::string config_digest;
  std::string meta;
  ParamSet blocks;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws ParseError on a bad magic, an unknown version or truncation.
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pgac
