// Copyright 2026 The runwayseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RUNWAYSEQ_BINARY_IO_HPP
#define RUNWAYSEQ_BINARY_IO_HPP

// Little-endian primitives shared by the feature, embedding and sequence
// file formats.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "runwayseq/tensor.hpp"

namespace runwayseq {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
  }

  void magic(std::string_view tag) { out_.write(tag.data(), 4); }

  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  /// Row-major f64 payload.
  template <typename Derived>
  void tensor(const Eigen::MatrixBase<Derived>& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) put<double>(m(i, j));
  }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("missing file: " + path.string());
  }

  const std::filesystem::path& path() const { return path_; }

  void expect_magic(std::string_view tag) {
    char got[4] = {};
    in_.read(got, 4);
    if (!in_ || std::string_view(got, 4) != tag) {
      throw FormatError(path_.string() + ": bad magic, expected \"" +
                        std::string(tag) + "\"");
    }
  }

  template <typename T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError(path_.string() + ": truncated file");
    return to_little(v);
  }

  void tensor(Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>();
  }

  void tensor(Vector& v) {
    for (Index i = 0; i < v.size(); ++i) v(i) = get<double>();
  }

  void expect_eof() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError(path_.string() + ": trailing bytes after payload");
    }
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

/// FNV-1a over designer names, newline separated.
template <typename Range>
std::uint64_t name_hash(const Range& names) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& name : names) {
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace io
}  // namespace runwayseq

#endif  // RUNWAYSEQ_BINARY_IO_HPP
