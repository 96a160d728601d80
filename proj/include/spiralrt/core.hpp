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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spiralrt {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode : int {
  InvalidArgument = 1,
  Io = 2,
  Format = 3,
  Checksum = 4,
  Numeric = 5,
  InsufficientData = 6,
  ShapeMismatch = 7,
  Internal = 99,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  /// Error carrying a source location inside a file (path + byte offset).
  Error(ErrorCode code, const std::string& what, std::string file,
        std::int64_t offset)
      : std::runtime_error(what),
        code_(code),
        file_(std::move(file)),
        offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& file() const noexcept { return file_; }
  std::int64_t offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::string file_;
  std::int64_t offset_ = -1;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

/// Dense row-major 2D array. Pixel (x, y) is stored at y * width + x.
template <class T>
struct Image {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Image() = default;
  Image(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  T& operator()(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width;
  }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
};

using CImage = Image<cplx>;
using RImage = Image<double>;
using LabelImage = Image<std::uint8_t>;

enum Label : std::uint8_t {
  kBackground = 0,
  kLeftVentricle = 1,
  kMyocardium = 2,
  kRightVentricle = 3,
};

inline constexpr int kNumLabels = 4;

/// 2D k-space position. Units depend on context (cycles/m or cycles/FOV).
struct KPoint {
  double kx = 0.0;
  double ky = 0.0;
};

RImage magnitude(const CImage& img);
CImage to_complex(const RImage& img);
double norm2(std::span<const cplx> v);
double norm2(std::span<const double> v);
cplx dot(std::span<const cplx> a, std::span<const cplx> b);  // sum conj(a) * b

/// Runs fn(i) for i in [0, n) on up to `threads` worker threads. Work is
/// split into contiguous chunks; fn must only write to per-index outputs.
/// The first exception thrown by a worker is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace spiralrt
