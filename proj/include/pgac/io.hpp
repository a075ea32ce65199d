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

#include "pgac/common.hpp"

namespace pgac {

// Writes to `path.tmp.<pid>` then renames over `path`, creating parent
// directories as needed.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

// ASCII point clouds: one `x y z [label]` per line, whitespace separated.
// `#` starts a comment; blank lines are skipped. Either every point carries
// a label or none does. Malformed lines raise ParseError with the 1-based
// line number.
PointCloud parse_cloud(const std::string& text);
PointCloud load_cloud(const std::string& path);
// 17 significant digits, so a save/load round trip is exact.
std::string format_cloud(const PointCloud& cloud);
void save_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace pgac
