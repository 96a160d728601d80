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

#include <cstring>
#include <random>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "spiralrt/formats.hpp"
#include "spiralrt/io.hpp"

using namespace spiralrt;
using namespace spiralrt::formats;

namespace {

std::vector<std::uint8_t> le32(std::uint32_t v) {
  return {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
}

void append(std::vector<std::uint8_t>& b, const std::vector<std::uint8_t>& x) { b.insert(b.end(), x.begin(), x.end()); }

ImageStack sample_stack(DType dt) {
  ImageStack s;
  s.height = 5;
  s.width = 7;
  s.n_frames = 3;
  s.n_slices = 2;
  s.n_coils = 2;
  s.dtype = dt;
  s.pixel_size_mm = 1.29;
  s.slice_thickness_mm = 8.0;
  s.meta = R"({"method":"cgsense","iters":10})";
  s.allocate();
  std::mt19937 rng(3);
  std::normal_distribution<float> nd;
  for (auto& v : s.values) v = nd(rng);
  return s;
}

template <class F>
Error catch_error(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(ErrorCode::Internal, "unreachable");
}

}  // namespace

TEST_CASE("crc32 check value") {
  const std::string s = "123456789";
  CHECK(io::crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xCBF43926u);
}

TEST_CASE("IMGS matches a hand-assembled file") {
  ImageStack s;
  s.height = 1;
  s.width = 2;
  s.pixel_size_mm = 1.5;
  s.slice_thickness_mm = 8.0;
  s.frame_dt_ms = 48.0;
  s.values = {1.0f, -2.5f};
  const std::string header =
      R"({"H":1,"W":2,"dtype":"f32","frame_dt":48.0,"meta":{},"n_coils":1,"n_frames":1,"n_slices":1,)"
      R"("pixel_size":1.5,"slice_thickness":8.0})";
  std::vector<std::uint8_t> want = {'I', 'M', 'G', 'S'};
  append(want, le32(1));
  append(want, le32(static_cast<std::uint32_t>(header.size())));
  want.insert(want.end(), header.begin(), header.end());
  append(want, le32(0x3f800000u));  // 1.0f
  append(want, le32(0xc0200000u));  // -2.5f
  append(want, le32(io::crc32(want)));
  CHECK(encode_imgs(s) == want);
  const ImageStack back = decode_imgs(want);
  CHECK(back.values == s.values);
  CHECK(back.pixel_size_mm == 1.5);
}

TEST_CASE("IMGS round trips for real and complex stacks") {
  for (DType dt : {DType::F32, DType::C64}) {
    const ImageStack s = sample_stack(dt);
    const auto bytes = encode_imgs(s);
    const ImageStack back = decode_imgs(bytes);
    CHECK(encode_imgs(back) == bytes);
    CHECK(back.values == s.values);
    CHECK(back.n_coils == 2);
    CHECK(nlohmann::json::parse(back.meta)["iters"] == 10);
  }
  ImageStack c = sample_stack(DType::C64);
  CImage img(5, 7);
  for (int i = 0; i < 35; ++i) img.data[i] = cplx(i, -0.5 * i);
  c.set(2, 1, 1, img);
  const CImage got = c.complex_image(2, 1, 1);
  CHECK(got.data == img.data);
  CHECK(c.magnitude_image(2, 1, 1)(1, 1) == doctest::Approx(std::abs(img(1, 1))));
  CHECK_THROWS_AS(c.real_image(0, 0), Error);

  const std::string path = "test_formats.imgs";
  write_imgs(path, c);
  CHECK(io::read_file(path) == encode_imgs(c));
  CHECK(read_imgs(path).values == c.values);
  std::remove(path.c_str());
}

TEST_CASE("corruption is reported with file and offset") {
  const auto bytes = encode_imgs(sample_stack(DType::F32));
  for (std::size_t pos : {std::size_t(0), std::size_t(5), std::size_t(20), bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= 0x01;
    const Error e = catch_error([&] { decode_imgs(bad, "x.imgs"); });
    CHECK(e.code() == ErrorCode::Checksum);
    CHECK(e.file() == "x.imgs");
    CHECK(e.offset() == static_cast<std::int64_t>(bytes.size() - 4));
  }
  // Truncated files still fail, as checksum or format errors.
  for (std::size_t n : {std::size_t(0), std::size_t(3), std::size_t(12), bytes.size() - 8})
    CHECK_THROWS_AS(decode_imgs(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + n)), Error);

  // Valid checksum over a bad magic.
  auto wrong = bytes;
  wrong[0] = 'X';
  wrong.resize(wrong.size() - 4);
  append(wrong, le32(io::crc32(wrong)));
  const Error e = catch_error([&] { decode_imgs(wrong, "y.imgs"); });
  CHECK(e.code() == ErrorCode::Format);
  CHECK(e.offset() == 0);

  CHECK_THROWS_AS(decode_mask(bytes), Error);  // an IMGS is not a MASK
}

TEST_CASE("header field errors name the field") {
  auto build = [](const std::string& header, std::size_t payload) {
    std::vector<std::uint8_t> b = {'I', 'M', 'G', 'S'};
    append(b, le32(1));
    append(b, le32(static_cast<std::uint32_t>(header.size())));
    b.insert(b.end(), header.begin(), header.end());
    b.resize(b.size() + payload, 0);
    append(b, le32(io::crc32(b)));
    return b;
  };
  const std::string ok_tail = R"("n_frames":1,"n_slices":1,"n_coils":1,"pixel_size":1,"slice_thickness":1})";
  {
    const Error e = catch_error([&] { decode_imgs(build(R"({"H":2,"W":2,"dtype":"f16",)" + ok_tail, 16)); });
    CHECK(std::string(e.what()).find("dtype") != std::string::npos);
    CHECK(e.offset() == 12);
  }
  {
    const Error e = catch_error([&] { decode_imgs(build(R"({"W":2,"dtype":"f32",)" + ok_tail, 16)); });
    CHECK(std::string(e.what()).find("'H'") != std::string::npos);
  }
  {
    const Error e = catch_error([&] { decode_imgs(build(R"({"H":-2,"W":2,"dtype":"f32",)" + ok_tail, 16)); });
    CHECK(std::string(e.what()).find("'H'") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_imgs(build(R"({"H":2,"W":2,"dtype":"f32",)" + ok_tail, 12)), Error);
  CHECK_THROWS_AS(decode_imgs(build(R"({"H":2,"W":2,"dtype":"f32",)" + ok_tail, 20)), Error);
  CHECK_NOTHROW(decode_imgs(build(R"({"H":2,"W":2,"dtype":"f32",)" + ok_tail, 16)));
  CHECK_THROWS_AS(decode_imgs(build("{not json", 0)), Error);
  // Huge declared sizes are rejected before allocating.
  CHECK_THROWS_AS(decode_imgs(build(R"({"H":2000000000,"W":2000000000,"dtype":"f32",)" + ok_tail, 16)), Error);
}

TEST_CASE("MASK round trip and legend checks") {
  MaskStack m;
  m.height = 4;
  m.width = 6;
  m.n_frames = 2;
  m.n_slices = 3;
  m.pixel_size_mm = 1.29;
  m.slice_thickness_mm = 8;
  m.allocate();
  for (std::size_t i = 0; i < m.labels.size(); ++i) m.labels[i] = static_cast<std::uint8_t>(i % 4);
  const auto bytes = encode_mask(m);
  const MaskStack back = decode_mask(bytes);
  CHECK(encode_mask(back) == bytes);
  CHECK(back.labels == m.labels);
  CHECK(back.legend == m.legend);
  CHECK(back.mask(1, 2).data == m.mask(1, 2).data);

  MaskStack bad = m;
  bad.labels[5] = 4;
  CHECK_THROWS_AS(encode_mask(bad), Error);

  // Patch a label byte in the payload and refresh the checksum.
  auto patched = bytes;
  const std::size_t payload = patched.size() - 4 - m.labels.size();
  patched[payload + 7] = 9;
  patched.resize(patched.size() - 4);
  append(patched, le32(io::crc32(patched)));
  const Error e = catch_error([&] { decode_mask(patched); });
  CHECK(e.offset() == static_cast<std::int64_t>(payload + 7));
}

TEST_CASE("RAWK and TRAJ round trip") {
  const auto tr = fixture::protocol_trajectory(165.12);
  const auto tb = encode_traj(tr);
  const auto tback = decode_traj(tb);
  CHECK(encode_traj(tback) == tb);
  CHECK(tback.arms_per_frame == 13);
  CHECK(tback.n_orientations == tr.n_orientations);
  CHECK(tback.samples_per_arm == tr.samples_per_arm);
  CHECK(tback.arm_angles == tr.arm_angles);
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.k.size(); ++i) {
    CHECK(tback.k[i].kx == static_cast<float>(tr.k[i].kx));
    worst = std::max(worst, std::abs(tback.k[i].ky - tr.k[i].ky));
  }
  CHECK(worst < 1e-5);

  RawAcquisition raw;
  raw.n_frames = 3;
  raw.n_coils = 2;
  raw.arms_per_frame = 13;
  raw.samples_per_arm = 17;
  raw.dwell_us = 2.5;
  raw.trajectory_file = "spiral.traj";
  raw.allocate();
  std::mt19937 rng(1);
  std::normal_distribution<double> nd;
  for (auto& z : raw.data) z = cplx(nd(rng), nd(rng));
  const auto rb = encode_rawk(raw);
  // 8 bytes per complex sample plus framing.
  const std::uint32_t hlen = rb[8] | rb[9] << 8 | rb[10] << 16 | std::uint32_t(rb[11]) << 24;
  CHECK(rb.size() == 12 + hlen + raw.data.size() * 8 + 4);
  const auto rback = decode_rawk(rb);
  CHECK(encode_rawk(rback) == rb);
  CHECK(rback.trajectory_file == "spiral.traj");
  CHECK(rback.frame_dt_ms == 48.0);
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    CHECK(rback.data[i].real() == static_cast<float>(raw.data[i].real()));
    CHECK(rback.data[i].imag() == static_cast<float>(raw.data[i].imag()));
  }
  // Order is [frame][coil][arm][sample].
  const std::size_t idx = ((2 * 2 + 1) * 13 + 4) * 17 + 6;
  float re;
  std::memcpy(&re, rb.data() + 12 + hlen + idx * 8, 4);
  CHECK(re == static_cast<float>(raw.arm(2, 1, 4)[6].real()));

  auto wrong = rb;
  wrong.resize(wrong.size() - 4);
  wrong[12 + hlen + 3] ^= 0xff;
  append(wrong, le32(io::crc32(wrong)));
  CHECK_NOTHROW(decode_rawk(wrong));  // payload bytes are opaque floats
  CHECK_THROWS_AS(decode_traj(rb), Error);
}
