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

#include "pgac/io.hpp"

#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace pgac {

namespace fs = std::filesystem;

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, int line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("not a number: '" + tok + "'", line);
  }
  return v;
}

int parse_int(const std::string& tok, int line) {
  int v = 0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("not an integer label: '" + tok + "'", line);
  }
  return v;
}

}  // namespace

PointCloud parse_cloud(const std::string& text) {
  std::vector<Vec3> pts;
  std::vector<int> labels;
  int columns = 0;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 3 && tok.size() != 4) {
      throw ParseError("expected 'x y z [label]', got " + std::to_string(tok.size()) +
                           " fields",
                       lineno);
    }
    if (columns == 0) columns = static_cast<int>(tok.size());
    if (static_cast<int>(tok.size()) != columns) {
      throw ParseError("label column present on some points but not others", lineno);
    }
    Vec3 p(parse_double(tok[0], lineno), parse_double(tok[1], lineno),
           parse_double(tok[2], lineno));
    if (!p.allFinite()) throw ParseError("non-finite coordinate", lineno);
    pts.push_back(p);
    if (columns == 4) {
      const int l = parse_int(tok[3], lineno);
      if (l < 0) throw ParseError("negative label", lineno);
      labels.push_back(l);
    }
  }
  if (pts.empty()) throw ParseError("no points", lineno);
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cloud.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  }
  cloud.labels = std::move(labels);
  return cloud;
}

PointCloud load_cloud(const std::string& path) { return parse_cloud(read_file(path)); }

std::string format_cloud(const PointCloud& cloud) {
  cloud.validate();
  std::string out;
  char buf[128];
  for (int i = 0; i < cloud.size(); ++i) {
    int n = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", cloud.points(i, 0),
                          cloud.points(i, 1), cloud.points(i, 2));
    out.append(buf, n);
    if (cloud.has_labels()) {
      n = std::snprintf(buf, sizeof(buf), " %d", cloud.labels[i]);
      out.append(buf, n);
    }
    out.push_back('\n');
  }
  return out;
}

void save_cloud(const std::string& path, const PointCloud& cloud) {
  write_file_atomic(path, format_cloud(cloud));
}

}  // namespace pgac
