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

#include "pgac/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "pgac/io.hpp"

namespace pgac {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    return std::string(take(n), n);
  }

  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw ParseError("checkpoint truncated", 0);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ckpt.config_digest);
  put_string(out, ckpt.meta);
  put<std::uint64_t>(out, ckpt.blocks.num_blocks());
  for (const auto& [name, m] : ckpt.blocks) {
    put_string(out, name);
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    }
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(sizeof(kCheckpointMagic)), kCheckpointMagic,
                  sizeof(kCheckpointMagic)) != 0) {
    throw ParseError("not a checkpoint (bad magic)", 0);
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  }
  Checkpoint ckpt;
  ckpt.config_digest = in.get_string();
  ckpt.meta = in.get_string();
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t b = 0; b < count; ++b) {
    std::string name = in.get_string();
    if (in.get<std::uint32_t>() != 2) throw ParseError("block " + name + ": rank must be 2", 0);
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) {
      throw ParseError("block " + name + ": implausible shape", 0);
    }
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.get<double>();
    }
    if (ckpt.blocks.contains(name)) throw ParseError("duplicate block " + name, 0);
    ckpt.blocks.set(name, std::move(m));
  }
  if (!in.done()) throw ParseError("trailing bytes after last block", 0);
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace pgac
