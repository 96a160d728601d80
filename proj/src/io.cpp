/*
 * Copyright 2026 The spiralrt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spiralrt/io.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace spiralrt::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    c = ::crc32(c, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading", path, -1);
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::Io, "read error on '" + path + "'", path, -1);
  return out;
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::random_device rd;
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp" + std::to_string(rd() % 1000000));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) spiralrt::fail(ErrorCode::Io, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      spiralrt::fail(ErrorCode::Io, "write error on '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    spiralrt::fail(ErrorCode::Io, "cannot move temporary file onto '" + path + "'");
  }
}

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v));
  u8(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::crc() { u32(crc32(buf_)); }

void ByteReader::fail(ErrorCode code, const std::string& what) const { fail_at(code, what, pos_); }

void ByteReader::fail_at(ErrorCode code, const std::string& what, std::size_t offset) const {
  throw Error(code, source_ + ": " + what + " (at byte " + std::to_string(offset) + ")", source_,
              static_cast<std::int64_t>(offset));
}

void ByteReader::need(std::size_t n) {
  const std::size_t end = std::min(end_, b_.size());
  if (pos_ > end || end - pos_ < n)
    fail(ErrorCode::Format, "unexpected end of data: need " + std::to_string(n) + " bytes");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return b_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  const std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::str(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto s = b_.subspan(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_magic(const char (&magic)[5]) {
  const std::size_t at = pos_;
  const std::string m = str(4);
  if (m != std::string(magic, 4)) fail_at(ErrorCode::Format, "bad magic, expected '" + std::string(magic, 4) + "'", at);
}

void ByteReader::verify_trailing_crc() {
  if (b_.size() < 4) fail_at(ErrorCode::Format, "file too short for a checksum", 0);
  const std::size_t at = b_.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(b_[at + i]) << (8 * i);
  const std::uint32_t actual = crc32(b_.first(at));
  if (stored != actual) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "CRC32 mismatch: stored %08x, computed %08x", stored, actual);
    fail_at(ErrorCode::Checksum, msg, at);
  }
  end_ = at;
}

void ByteReader::expect_end() {
  const std::size_t end = std::min(end_, b_.size());
  if (pos_ != end)
    fail(ErrorCode::Format, std::to_string(end - pos_) + " unexpected trailing bytes before the checksum");
}

}  // namespace spiralrt::io
