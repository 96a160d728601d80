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

#include "spiralrt/acquisition.hpp"
#include "spiralrt/core.hpp"
#include "spiralrt/trajectory.hpp"

namespace spiralrt::formats {

// All containers: 4-byte magic, u32 version (1), u32 header length, UTF-8
// JSON header, little-endian payload, trailing CRC32 over everything before it.

enum class DType { F32, C64 };

/// IMGS: images ordered [frame][slice][coil][y][x]; c64 stores (re, im) pairs.
struct ImageStack {
  int height = 0, width = 0;
  int n_frames = 1, n_slices = 1, n_coils = 1;
  DType dtype = DType::F32;
  double pixel_size_mm = 1.0;
  double slice_thickness_mm = 1.0;
  double frame_dt_ms = 48.0;
  std::string meta = "{}";  // free-form JSON object carried in the header
  std::vector<float> values;

  std::size_t image_index(int frame, int slice, int coil = 0) const {
    return (static_cast<std::size_t>(frame) * n_slices + slice) * n_coils + coil;
  }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t n_images() const { return static_cast<std::size_t>(n_frames) * n_slices * n_coils; }
  /// Allocates zeroed storage for the current shape and dtype.
  void allocate();

  Image<float> real_image(int frame, int slice, int coil = 0) const;   // f32 only
  CImage complex_image(int frame, int slice, int coil = 0) const;      // c64 only
  /// Magnitude for c64, the value for f32.
  Image<float> magnitude_image(int frame, int slice, int coil = 0) const;
  void set(int frame, int slice, int coil, const Image<float>& img);
  void set(int frame, int slice, int coil, const CImage& img);
};

/// MASK: label maps ordered [frame][slice][y][x].
struct MaskStack {
  int height = 0, width = 0;
  int n_frames = 1, n_slices = 1;
  double pixel_size_mm = 1.0;
  double slice_thickness_mm = 1.0;
  double frame_dt_ms = 48.0;
  std::vector<std::string> legend = {"background", "lv", "myocardium", "rv"};
  std::vector<std::uint8_t> labels;

  std::size_t image_index(int frame, int slice) const {
    return static_cast<std::size_t>(frame) * n_slices + slice;
  }
  void allocate();
  LabelImage mask(int frame, int slice) const;
  void set(int frame, int slice, const LabelImage& m);
};

std::vector<std::uint8_t> encode_imgs(const ImageStack& s);
ImageStack decode_imgs(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void write_imgs(const std::string& path, const ImageStack& s);
ImageStack read_imgs(const std::string& path);

std::vector<std::uint8_t> encode_mask(const MaskStack& s);
MaskStack decode_mask(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void write_mask(const std::string& path, const MaskStack& s);
MaskStack read_mask(const std::string& path);

/// RAWK: samples [frame][coil][arm][sample] as f32 (re, im), so writing
/// rounds double samples to float.
std::vector<std::uint8_t> encode_rawk(const RawAcquisition& raw);
RawAcquisition decode_rawk(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void write_rawk(const std::string& path, const RawAcquisition& raw);
RawAcquisition read_rawk(const std::string& path);

/// TRAJ: all orientations' arms as f32 (kx, ky) in cycles/FOV, orientation-major.
std::vector<std::uint8_t> encode_traj(const traj::Trajectory& t);
traj::Trajectory decode_traj(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void write_traj(const std::string& path, const traj::Trajectory& t);
traj::Trajectory read_traj(const std::string& path);

}  // namespace spiralrt::formats
