/* Copyright 2026 The DSTN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef DSTN_SERIALIZE_HPP_
#define DSTN_SERIALIZE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dstn/tensor.hpp"

namespace dstn {

// Little-endian append-only byte sink.
class BinaryWriter {
 public:
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void f64(double v);
  void str(std::string_view s);
  void tensor(const Tensor& t);

  const std::string& bytes() const { return buf_; }
  std::string release() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Bounds-checked reader; every overrun throws LoadError.
class BinaryReader {
 public:
  explicit BinaryReader(std::string_view bytes) : bytes_(bytes) {}

  uint32_t u32();
  uint64_t u64();
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64();
  std::string str();
  Tensor tensor();

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const;
  std::string_view bytes_;
  size_t pos_ = 0;
};

// File layout: 8-byte magic | u32 version | u64 payload size | 8-char CRC-32
// hex of payload | payload. Written to a temp file and renamed into place;
// on any failure the temp file is removed.
void write_container(const std::filesystem::path& path, std::string_view magic,
                     uint32_t version, std::string_view payload);

struct Container {
  uint32_t version = 0;
  std::string payload;
  std::string checksum;
};

// Throws LoadError on a missing file, wrong magic, truncation or checksum
// mismatch. Version checking is left to the caller.
Container read_container(const std::filesystem::path& path,
                         std::string_view magic);

// Named float tensors plus a JSON metadata string.
struct TensorArchive {
  std::string metadata_json = "{}";
  std::map<std::string, Tensor> tensors;
};

inline constexpr std::string_view kArchiveMagic = "DSTNTARC";
inline constexpr uint32_t kArchiveVersion = 1;

void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
// Also returns the file's payload checksum.
TensorArchive load_archive(const std::filesystem::path& path,
                           std::string* checksum = nullptr);

std::string read_file(const std::filesystem::path& path);
// Atomic replace via temp file + rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dstn

#endif  // DSTN_SERIALIZE_HPP_
