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

#include "spiralrt/formats.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "spiralrt/io.hpp"

namespace spiralrt::formats {

using nlohmann::json;

namespace {

constexpr std::uint32_t kVersion = 1;

io::ByteWriter begin(const char* magic, const json& header) {
  io::ByteWriter w;
  w.str(std::string(magic, 4));
  w.u32(kVersion);
  const std::string text = header.dump();
  require(text.size() <= std::numeric_limits<std::uint32_t>::max(), ErrorCode::InvalidArgument,
          "header too large");
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.str(text);
  return w;
}

std::vector<std::uint8_t> finish(io::ByteWriter& w) {
  w.crc();
  return std::move(w.data());
}

// Reads magic, version and JSON header. Field errors point at the header.
class HeaderReader {
 public:
  HeaderReader(io::ByteReader& r, const char (&magic)[5]) : r_(r) {
    r_.verify_trailing_crc();
    r_.expect_magic(magic);
    const std::size_t ver_at = r_.offset();
    const std::uint32_t v = r_.u32();
    if (v != kVersion) r_.fail_at(ErrorCode::Format, "unsupported version " + std::to_string(v), ver_at);
    const std::uint32_t len = r_.u32();
    at_ = r_.offset();
    const std::string text = r_.str(len);
    try {
      j_ = json::parse(text);
    } catch (const json::exception& e) {
      r_.fail_at(ErrorCode::Format, std::string("header is not valid JSON: ") + e.what(), at_);
    }
    if (!j_.is_object()) r_.fail_at(ErrorCode::Format, "header is not a JSON object", at_);
  }

  const json& json_() const { return j_; }

  int integer(const char* key, int lo, int hi = std::numeric_limits<int>::max()) const {
    const json& v = field(key);
    if (!v.is_number_integer()) bad(key, "must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi) bad(key, "out of range (" + std::to_string(x) + ")");
    return static_cast<int>(x);
  }
  double number(const char* key, double lo) const {
    const json& v = field(key);
    if (!v.is_number()) bad(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo) bad(key, "out of range");
    return x;
  }
  double number_or(const char* key, double dflt, double lo) const { return j_.contains(key) ? number(key, lo) : dflt; }
  std::string string(const char* key) const {
    const json& v = field(key);
    if (!v.is_string()) bad(key, "must be a string");
    return v.get<std::string>();
  }
  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    r_.fail_at(ErrorCode::Format, "header field '" + key + "' " + what, at_);
  }

  // Checks that `count` payload elements of `width` bytes fit in the file.
  void payload_fits(std::uint64_t count, std::size_t width) const {
    if (count > r_.remaining() / width) r_.fail(ErrorCode::Format, "payload shorter than the header declares");
  }

 private:
  const json& field(const char* key) const {
    const auto it = j_.find(key);
    if (it == j_.end()) bad(key, "is missing");
    return *it;
  }

  io::ByteReader& r_;
  json j_;
  std::size_t at_ = 0;
};

std::uint64_t product(std::initializer_list<int> dims) {
  std::uint64_t n = 1;
  for (int d : dims) {
    n *= static_cast<std::uint64_t>(d);
    if (n > (std::uint64_t(1) << 40)) return n;  // caller rejects against the file size
  }
  return n;
}

const char* dtype_name(DType d) { return d == DType::C64 ? "c64" : "f32"; }

}  // namespace

// ---------------------------------------------------------------- IMGS

void ImageStack::allocate() {
  values.assign(n_images() * pixels() * (dtype == DType::C64 ? 2 : 1), 0.0f);
}

Image<float> ImageStack::real_image(int frame, int slice, int coil) const {
  require(dtype == DType::F32, ErrorCode::InvalidArgument, "real_image: stack holds complex data");
  Image<float> img(height, width);
  const std::size_t off = image_index(frame, slice, coil) * pixels();
  std::copy(values.begin() + off, values.begin() + off + pixels(), img.data.begin());
  return img;
}

CImage ImageStack::complex_image(int frame, int slice, int coil) const {
  require(dtype == DType::C64, ErrorCode::InvalidArgument, "complex_image: stack holds real data");
  CImage img(height, width);
  const std::size_t off = image_index(frame, slice, coil) * pixels() * 2;
  for (std::size_t i = 0; i < pixels(); ++i) img.data[i] = cplx(values[off + 2 * i], values[off + 2 * i + 1]);
  return img;
}

Image<float> ImageStack::magnitude_image(int frame, int slice, int coil) const {
  if (dtype == DType::F32) return real_image(frame, slice, coil);
  const CImage c = complex_image(frame, slice, coil);
  Image<float> img(height, width);
  for (std::size_t i = 0; i < pixels(); ++i) img.data[i] = static_cast<float>(std::abs(c.data[i]));
  return img;
}

void ImageStack::set(int frame, int slice, int coil, const Image<float>& img) {
  require(dtype == DType::F32 && img.height == height && img.width == width, ErrorCode::ShapeMismatch,
          "ImageStack::set: image does not match the stack");
  std::copy(img.data.begin(), img.data.end(), values.begin() + image_index(frame, slice, coil) * pixels());
}

void ImageStack::set(int frame, int slice, int coil, const CImage& img) {
  require(dtype == DType::C64 && img.height == height && img.width == width, ErrorCode::ShapeMismatch,
          "ImageStack::set: image does not match the stack");
  const std::size_t off = image_index(frame, slice, coil) * pixels() * 2;
  for (std::size_t i = 0; i < pixels(); ++i) {
    values[off + 2 * i] = static_cast<float>(img.data[i].real());
    values[off + 2 * i + 1] = static_cast<float>(img.data[i].imag());
  }
}

std::vector<std::uint8_t> encode_imgs(const ImageStack& s) {
  require(s.height >= 1 && s.width >= 1 && s.n_frames >= 1 && s.n_slices >= 1 && s.n_coils >= 1,
          ErrorCode::InvalidArgument, "encode_imgs: empty stack");
  require(s.values.size() == s.n_images() * s.pixels() * (s.dtype == DType::C64 ? 2 : 1), ErrorCode::ShapeMismatch,
          "encode_imgs: value count does not match the shape");
  json meta;
  try {
    meta = json::parse(s.meta);
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidArgument, "encode_imgs: meta is not valid JSON");
  }
  require(meta.is_object(), ErrorCode::InvalidArgument, "encode_imgs: meta must be a JSON object");
  const json h = {{"H", s.height},
                  {"W", s.width},
                  {"n_frames", s.n_frames},
                  {"n_slices", s.n_slices},
                  {"n_coils", s.n_coils},
                  {"dtype", dtype_name(s.dtype)},
                  {"pixel_size", s.pixel_size_mm},
                  {"slice_thickness", s.slice_thickness_mm},
                  {"frame_dt", s.frame_dt_ms},
                  {"meta", meta}};
  auto w = begin("IMGS", h);
  for (float v : s.values) w.f32(v);
  return finish(w);
}

ImageStack decode_imgs(std::span<const std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  HeaderReader h(r, "IMGS");
  ImageStack s;
  s.height = h.integer("H", 1);
  s.width = h.integer("W", 1);
  s.n_frames = h.integer("n_frames", 1);
  s.n_slices = h.integer("n_slices", 1);
  s.n_coils = h.integer("n_coils", 1);
  const std::string dt = h.string("dtype");
  if (dt == "f32")
    s.dtype = DType::F32;
  else if (dt == "c64")
    s.dtype = DType::C64;
  else
    h.bad("dtype", "must be f32 or c64 (got '" + dt + "')");
  s.pixel_size_mm = h.number("pixel_size", 0.0);
  s.slice_thickness_mm = h.number("slice_thickness", 0.0);
  s.frame_dt_ms = h.number_or("frame_dt", 48.0, 0.0);
  if (h.json_().contains("meta")) {
    if (!h.json_()["meta"].is_object()) h.bad("meta", "must be an object");
    s.meta = h.json_()["meta"].dump();
  }
  const std::uint64_t n =
      product({s.height, s.width, s.n_frames, s.n_slices, s.n_coils}) * (s.dtype == DType::C64 ? 2 : 1);
  h.payload_fits(n, 4);
  s.values.resize(n);
  for (auto& v : s.values) v = r.f32();
  r.expect_end();
  return s;
}

void write_imgs(const std::string& path, const ImageStack& s) { io::write_file_atomic(path, encode_imgs(s)); }
ImageStack read_imgs(const std::string& path) { return decode_imgs(io::read_file(path), path); }

// ---------------------------------------------------------------- MASK

void MaskStack::allocate() {
  labels.assign(static_cast<std::size_t>(n_frames) * n_slices * height * width, 0);
}

LabelImage MaskStack::mask(int frame, int slice) const {
  LabelImage m(height, width);
  const std::size_t n = static_cast<std::size_t>(height) * width, off = image_index(frame, slice) * n;
  std::copy(labels.begin() + off, labels.begin() + off + n, m.data.begin());
  return m;
}

void MaskStack::set(int frame, int slice, const LabelImage& m) {
  require(m.height == height && m.width == width, ErrorCode::ShapeMismatch, "MaskStack::set: size mismatch");
  const std::size_t n = static_cast<std::size_t>(height) * width;
  std::copy(m.data.begin(), m.data.end(), labels.begin() + image_index(frame, slice) * n);
}

std::vector<std::uint8_t> encode_mask(const MaskStack& s) {
  require(s.height >= 1 && s.width >= 1 && s.n_frames >= 1 && s.n_slices >= 1, ErrorCode::InvalidArgument,
          "encode_mask: empty stack");
  require(s.labels.size() == static_cast<std::size_t>(s.n_frames) * s.n_slices * s.height * s.width,
          ErrorCode::ShapeMismatch, "encode_mask: label count does not match the shape");
  require(!s.legend.empty() && s.legend.size() <= 256, ErrorCode::InvalidArgument, "encode_mask: bad legend");
  for (auto v : s.labels)
    require(v < s.legend.size(), ErrorCode::InvalidArgument,
            "encode_mask: label " + std::to_string(v) + " is not in the legend");
  const json h = {{"H", s.height},
                  {"W", s.width},
                  {"n_frames", s.n_frames},
                  {"n_slices", s.n_slices},
                  {"n_coils", 1},
                  {"dtype", "u8"},
                  {"pixel_size", s.pixel_size_mm},
                  {"slice_thickness", s.slice_thickness_mm},
                  {"frame_dt", s.frame_dt_ms},
                  {"legend", s.legend}};
  auto w = begin("MASK", h);
  w.bytes(s.labels);
  return finish(w);
}

MaskStack decode_mask(std::span<const std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  HeaderReader h(r, "MASK");
  MaskStack s;
  s.height = h.integer("H", 1);
  s.width = h.integer("W", 1);
  s.n_frames = h.integer("n_frames", 1);
  s.n_slices = h.integer("n_slices", 1);
  h.integer("n_coils", 1, 1);
  if (h.string("dtype") != "u8") h.bad("dtype", "must be u8");
  s.pixel_size_mm = h.number("pixel_size", 0.0);
  s.slice_thickness_mm = h.number("slice_thickness", 0.0);
  s.frame_dt_ms = h.number_or("frame_dt", 48.0, 0.0);
  const json& lg = h.json_().contains("legend") ? h.json_()["legend"] : json();
  if (!lg.is_array() || lg.empty() || lg.size() > 256) h.bad("legend", "must be a non-empty array of names");
  s.legend.clear();
  for (const auto& v : lg) {
    if (!v.is_string()) h.bad("legend", "must hold strings");
    s.legend.push_back(v.get<std::string>());
  }
  const std::uint64_t n = product({s.height, s.width, s.n_frames, s.n_slices});
  h.payload_fits(n, 1);
  const std::size_t at = r.offset();
  const auto b = r.bytes(n);
  s.labels.assign(b.begin(), b.end());
  for (std::size_t i = 0; i < s.labels.size(); ++i)
    if (s.labels[i] >= s.legend.size())
      r.fail_at(ErrorCode::Format, "label " + std::to_string(s.labels[i]) + " is not in the legend", at + i);
  r.expect_end();
  return s;
}

void write_mask(const std::string& path, const MaskStack& s) { io::write_file_atomic(path, encode_mask(s)); }
MaskStack read_mask(const std::string& path) { return decode_mask(io::read_file(path), path); }

// ---------------------------------------------------------------- RAWK

std::vector<std::uint8_t> encode_rawk(const RawAcquisition& raw) {
  require(raw.n_frames >= 1 && raw.n_coils >= 1 && raw.arms_per_frame >= 1 && raw.samples_per_arm >= 1,
          ErrorCode::InvalidArgument, "encode_rawk: empty acquisition");
  require(raw.data.size() == static_cast<std::size_t>(raw.n_frames) * raw.n_coils * raw.frame_coil_size(),
          ErrorCode::ShapeMismatch, "encode_rawk: sample count does not match the shape");
  const json h = {{"dims", 2},
                  {"n_frames", raw.n_frames},
                  {"n_coils", raw.n_coils},
                  {"n_arms", raw.arms_per_frame},
                  {"samples_per_arm", raw.samples_per_arm},
                  {"dwell_time", raw.dwell_us},
                  {"trajectory", raw.trajectory_file},
                  {"frame_dt", raw.frame_dt_ms}};
  auto w = begin("RAWK", h);
  for (const auto& z : raw.data) {
    w.f32(static_cast<float>(z.real()));
    w.f32(static_cast<float>(z.imag()));
  }
  return finish(w);
}

RawAcquisition decode_rawk(std::span<const std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  HeaderReader h(r, "RAWK");
  RawAcquisition raw;
  h.integer("dims", 2, 2);
  raw.n_frames = h.integer("n_frames", 1);
  raw.n_coils = h.integer("n_coils", 1);
  raw.arms_per_frame = h.integer("n_arms", 1);
  raw.samples_per_arm = h.integer("samples_per_arm", 1);
  raw.dwell_us = h.number("dwell_time", 0.0);
  raw.trajectory_file = h.string("trajectory");
  raw.frame_dt_ms = h.number_or("frame_dt", 48.0, 0.0);
  const std::uint64_t n = product({raw.n_frames, raw.n_coils, raw.arms_per_frame, raw.samples_per_arm});
  h.payload_fits(n, 8);
  raw.data.resize(n);
  for (auto& z : raw.data) {
    const float re = r.f32();
    const float im = r.f32();
    z = cplx(re, im);
  }
  r.expect_end();
  return raw;
}

void write_rawk(const std::string& path, const RawAcquisition& raw) { io::write_file_atomic(path, encode_rawk(raw)); }
RawAcquisition read_rawk(const std::string& path) { return decode_rawk(io::read_file(path), path); }

// ---------------------------------------------------------------- TRAJ

std::vector<std::uint8_t> encode_traj(const traj::Trajectory& t) {
  const int n_arms = t.n_orientations * t.arms_per_frame;
  require(t.arms_per_frame >= 1 && t.n_orientations >= 1 && t.samples_per_arm >= 1 && t.frames_per_orientation >= 1,
          ErrorCode::InvalidArgument, "encode_traj: empty trajectory");
  require(t.k.size() == static_cast<std::size_t>(n_arms) * t.samples_per_arm, ErrorCode::ShapeMismatch,
          "encode_traj: sample count does not match the shape");
  require(t.arm_angles.empty() || t.arm_angles.size() == static_cast<std::size_t>(n_arms),
          ErrorCode::ShapeMismatch, "encode_traj: one angle per arm expected");
  const json h = {{"n_arms", n_arms},
                  {"samples", t.samples_per_arm},
                  {"units", "cycles/FOV"},
                  {"arms_per_frame", t.arms_per_frame},
                  {"n_orientations", t.n_orientations},
                  {"frames_per_orientation", t.frames_per_orientation},
                  {"dwell_time", t.dwell_us},
                  {"fov", t.fov_mm},
                  {"arm_angles", t.arm_angles}};
  auto w = begin("TRAJ", h);
  for (const auto& p : t.k) {
    w.f32(static_cast<float>(p.kx));
    w.f32(static_cast<float>(p.ky));
  }
  return finish(w);
}

traj::Trajectory decode_traj(std::span<const std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  HeaderReader h(r, "TRAJ");
  traj::Trajectory t;
  const int n_arms = h.integer("n_arms", 1);
  t.samples_per_arm = h.integer("samples", 1);
  if (h.string("units") != "cycles/FOV") h.bad("units", "must be cycles/FOV");
  t.arms_per_frame = h.integer("arms_per_frame", 1);
  t.n_orientations = h.integer("n_orientations", 1);
  t.frames_per_orientation = h.integer("frames_per_orientation", 1);
  if (static_cast<std::int64_t>(t.arms_per_frame) * t.n_orientations != n_arms)
    h.bad("n_arms", "differs from arms_per_frame * n_orientations");
  t.dwell_us = h.number("dwell_time", 0.0);
  t.fov_mm = h.number("fov", 0.0);
  if (h.json_().contains("arm_angles")) {
    const json& a = h.json_()["arm_angles"];
    if (!a.is_array() || (!a.empty() && a.size() != static_cast<std::size_t>(n_arms)))
      h.bad("arm_angles", "must list one angle per arm");
    for (const auto& v : a) {
      if (!v.is_number()) h.bad("arm_angles", "must hold numbers");
      t.arm_angles.push_back(v.get<double>());
    }
  }
  const std::uint64_t n = product({n_arms, t.samples_per_arm});
  h.payload_fits(n, 8);
  t.k.resize(n);
  for (auto& p : t.k) {
    const float kx = r.f32();
    const float ky = r.f32();
    p = {kx, ky};
  }
  r.expect_end();
  return t;
}

void write_traj(const std::string& path, const traj::Trajectory& t) { io::write_file_atomic(path, encode_traj(t)); }
traj::Trajectory read_traj(const std::string& path) { return decode_traj(io::read_file(path), path); }

}  // namespace spiralrt::formats
