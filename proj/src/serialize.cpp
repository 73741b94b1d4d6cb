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
#include "dstn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace dstn {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

void BinaryWriter::u32(uint32_t v) {
  buf_.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void BinaryWriter::u64(uint64_t v) {
  buf_.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void BinaryWriter::f64(double v) {
  buf_.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}
void BinaryWriter::tensor(const Tensor& t) {
  u32(static_cast<uint32_t>(t.rank()));
  for (int64_t d : t.shape()) i64(d);
  buf_.append(reinterpret_cast<const char*>(t.data()),
              static_cast<size_t>(t.numel()) * sizeof(float));
}

void BinaryReader::need(size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw LoadError("truncated data: need " + std::to_string(n) +
                    " bytes at offset " + std::to_string(pos_));
  }
}

uint32_t BinaryReader::u32() {
  need(4);
  uint32_t v;
  std::memcpy(&v, bytes_.data() + pos_, 4);
  pos_ += 4;
  return v;
}
uint64_t BinaryReader::u64() {
  need(8);
  uint64_t v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}
double BinaryReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}
std::string BinaryReader::str() {
  const uint64_t n = u64();
  need(n);
  std::string s(bytes_.substr(pos_, n));
  pos_ += n;
  return s;
}
Tensor BinaryReader::tensor() {
  const uint32_t rank = u32();
  if (rank > 8) throw LoadError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    d = i64();
    if (d < 0) throw LoadError("negative tensor dimension");
  }
  const int64_t n = shape_numel(shape);
  need(static_cast<size_t>(n) * sizeof(float));
  std::vector<float> data(static_cast<size_t>(n));
  std::memcpy(data.data(), bytes_.data() + pos_, data.size() * sizeof(float));
  pos_ += data.size() * sizeof(float);
  return Tensor(std::move(shape), std::move(data));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  std::random_device rd;
  const fs::path tmp =
      path.parent_path() /
      ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw LoadError("cannot open " + tmp.string() + " for writing");
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      out.flush();
      if (!out) throw LoadError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void write_container(const std::filesystem::path& path, std::string_view magic,
                     uint32_t version, std::string_view payload) {
  if (magic.size() != 8) throw std::invalid_argument("magic must be 8 bytes");
  BinaryWriter w;
  std::string out(magic);
  w.u32(version);
  w.u64(payload.size());
  out += w.bytes();
  out += checksum_bytes({reinterpret_cast<const unsigned char*>(payload.data()),
                         payload.size()});
  out += payload;
  write_file_atomic(path, out);
}

Container read_container(const std::filesystem::path& path,
                         std::string_view magic) {
  const std::string bytes = read_file(path);
  constexpr size_t kHeader = 8 + 4 + 8 + 8;
  if (bytes.size() < kHeader) {
    throw LoadError(path.string() + ": truncated header");
  }
  if (std::string_view(bytes).substr(0, 8) != magic) {
    throw LoadError(path.string() + ": bad magic");
  }
  BinaryReader r(std::string_view(bytes).substr(8, 12));
  Container c;
  c.version = r.u32();
  const uint64_t size = r.u64();
  c.checksum = bytes.substr(20, 8);
  if (bytes.size() - kHeader != size) {
    throw LoadError(path.string() + ": payload size " +
                    std::to_string(bytes.size() - kHeader) + " != declared " +
                    std::to_string(size) + " (truncated or corrupt)");
  }
  c.payload = bytes.substr(kHeader);
  const std::string actual = checksum_bytes(
      {reinterpret_cast<const unsigned char*>(c.payload.data()), c.payload.size()});
  if (actual != c.checksum) {
    throw LoadError(path.string() + ": checksum mismatch (" + actual + " vs " +
                    c.checksum + ")");
  }
  return c;
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  BinaryWriter w;
  w.str(archive.metadata_json);
  w.u64(archive.tensors.size());
  for (const auto& [name, t] : archive.tensors) {
    w.str(name);
    w.tensor(t);
  }
  write_container(path, kArchiveMagic, kArchiveVersion, w.bytes());
}

TensorArchive load_archive(const std::filesystem::path& path, std::string* checksum) {
  Container c = read_container(path, kArchiveMagic);
  if (c.version != kArchiveVersion) {
    throw LoadError(path.string() + ": unsupported archive version " +
                    std::to_string(c.version));
  }
  BinaryReader r(c.payload);
  TensorArchive a;
  a.metadata_json = r.str();
  const uint64_t n = r.u64();
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = r.str();
    a.tensors.emplace(std::move(name), r.tensor());
  }
  if (checksum) *checksum = c.checksum;
  return a;
}

}  // namespace dstn
