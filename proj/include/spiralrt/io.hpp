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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spiralrt/core.hpp"

namespace spiralrt::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Reads a whole file; Io error naming the path on failure.
std::vector<std::uint8_t> read_file(const std::string& path);

/// Writes to a temporary file in the same directory, then renames it over
/// `path`, so readers never see a partial file.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

/// Little-endian appender.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void str(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  /// Appends the CRC32 of everything written so far.
  void crc();

  std::vector<std::uint8_t>& data() { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian reader whose errors carry the source name and byte offset.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string source)
      : b_(bytes), source_(std::move(source)) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  std::string str(std::size_t n);
  std::span<const std::uint8_t> bytes(std::size_t n);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  const std::string& source() const { return source_; }

  /// Checks the magic at the current position.
  void expect_magic(const char (&magic)[5]);
  /// Verifies the trailing CRC32 over all preceding bytes. Call first.
  void verify_trailing_crc();
  /// After the payload: exactly the 4 CRC bytes must remain.
  void expect_end();

  [[noreturn]] void fail(ErrorCode code, const std::string& what) const;
  [[noreturn]] void fail_at(ErrorCode code, const std::string& what, std::size_t offset) const;

 private:
  void need(std::size_t n);

  std::span<const std::uint8_t> b_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t end_ = static_cast<std::size_t>(-1);  // payload end once the CRC is verified
};

}  // namespace spiralrt::io
