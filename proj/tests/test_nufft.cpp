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

#include <thread>

#include "doctest.h"
#include "oracles.hpp"
#include "spiralrt/nufft.hpp"

using namespace spiralrt;
using spiralrt::nufft::GriddingPlan;

TEST_CASE("empty plan maps any image to no samples") {
  GriddingPlan plan({}, 16);
  CImage img(16, 16, 1.0);
  CHECK(plan.forward(img).empty());
  const CImage back = plan.adjoint({});
  for (const auto& v : back.data) CHECK(v == cplx(0.0));
}

TEST_CASE("grid-point samples reproduce the DFT") {
  // Smooth object: a sum of random Gaussian blobs inside the central FOV.
  std::mt19937 rng(1);
  const int n = 32;
  const CImage img = oracle::random_blobs(n, 12, rng);
  std::vector<KPoint> pos;
  for (int ky = -n / 2; ky < n / 2; ky += 3)
    for (int kx = -n / 2; kx < n / 2; kx += 5) pos.push_back({double(kx), double(ky)});
  GriddingPlan plan(pos, n, 2.0, 6);
  const auto got = plan.forward(img);
  const auto ref = oracle::direct_dft(img, pos);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  MESSAGE("grid-point max error / max " << worst / scale << ", rel l2 " << oracle::rel_l2(got, ref));
  CHECK(oracle::rel_l2(got, ref) < 1e-5);
}

TEST_CASE("duplicate positions accumulate in the adjoint") {
  std::vector<KPoint> one{{3.3, -1.7}};
  std::vector<KPoint> two{{3.3, -1.7}, {3.3, -1.7}};
  GriddingPlan p1(one, 16), p2(two, 16);
  std::vector<cplx> s1{cplx(1.0, 2.0)};
  std::vector<cplx> s2{cplx(1.0, 2.0), cplx(1.0, 2.0)};
  const CImage a = p1.adjoint(s1), b = p2.adjoint(s2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b.data[i] - 2.0 * a.data[i]) < 1e-12);
}

TEST_CASE("zero image gives zero samples and zero samples give zero image") {
  std::mt19937 rng(2);
  const auto pos = oracle::random_positions(50, 16, rng);
  GriddingPlan plan(pos, 16);
  for (const auto& v : plan.forward(CImage(16, 16))) CHECK(v == cplx(0.0));
  std::vector<cplx> zeros(pos.size());
  for (const auto& v : plan.adjoint(zeros).data) CHECK(v == cplx(0.0));
}

TEST_CASE("centered impulse has constant-magnitude spectrum") {
  std::mt19937 rng(3);
  const int n = 64;
  CImage img(n, n);
  img(n / 2, n / 2) = 1.0;
  const auto pos = oracle::random_positions(400, n, rng);
  GriddingPlan plan(pos, n);
  const auto got = plan.forward(img);
  const auto ref = oracle::direct_dft(img, pos);
  CHECK(oracle::rel_l2(got, ref) < 1e-3);
  for (const auto& v : got) CHECK(std::abs(std::abs(v) - 1.0) < 1e-3);
}

TEST_CASE("forward is linear") {
  std::mt19937 rng(4);
  const int n = 32;
  const auto pos = oracle::random_positions(300, n, rng);
  GriddingPlan plan(pos, n);
  const CImage x = oracle::random_image(n, rng), y = oracle::random_image(n, rng);
  const cplx a(0.7, -1.2), b(-2.0, 0.3);
  CImage z(n, n);
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = a * x.data[i] + b * y.data[i];
  const auto fx = plan.forward(x), fy = plan.forward(y), fz = plan.forward(z);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < fz.size(); ++i) {
    err = std::max(err, std::abs(fz[i] - (a * fx[i] + b * fy[i])));
    scale = std::max(scale, std::abs(fz[i]));
  }
  CHECK(err / scale < 1e-9);
}

TEST_CASE("adjoint passes the randomized dot test") {
  std::mt19937 rng(5);
  const int n = 64;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pos = oracle::random_positions(500, n, rng);
    GriddingPlan plan(pos, n);
    const CImage x = oracle::random_image(n, rng);
    const auto y = oracle::random_samples(pos.size(), rng);
    const auto fx = plan.forward(x);
    const CImage fhy = plan.adjoint(y);
    const cplx lhs = dot(fx, y);
    const cplx rhs = dot(x.span(), fhy.span());
    CHECK(std::abs(lhs - rhs) / (norm2(x.span()) * norm2(std::span<const cplx>(y))) < 1e-6);
  }
}

TEST_CASE("single DC sample spreads to a flat image") {
  const int n = 64;
  std::vector<KPoint> pos{{0.0, 0.0}};
  GriddingPlan plan(pos, n);
  std::vector<cplx> s{1.0};
  const CImage img = plan.adjoint(s);
  double lo = 1e300, hi = 0.0;
  for (int y = n / 4; y < 3 * n / 4; ++y)
    for (int x = n / 4; x < 3 * n / 4; ++x) {
      lo = std::min(lo, std::abs(img(y, x)));
      hi = std::max(hi, std::abs(img(y, x)));
    }
  CHECK(hi / lo < 1.01);
}

TEST_CASE("accuracy against the direct DFT at both kernel settings") {
  std::mt19937 rng(6);
  const int n = 48;
  const CImage img = oracle::random_image(n, rng);
  const auto pos = oracle::random_positions(600, n, rng);
  const auto ref = oracle::direct_dft(img, pos);
  CHECK(oracle::rel_l2(GriddingPlan(pos, n, 2.0, 6).forward(img), ref) < 1e-3);
  CHECK(oracle::rel_l2(GriddingPlan(pos, n, 1.5, 4).forward(img), ref) < 1e-2);
}

TEST_CASE("kernel weights are normalized per sample") {
  std::mt19937 rng(7);
  const auto pos = oracle::random_positions(200, 32, rng);
  for (auto [os, w] : {std::pair{2.0, 6}, std::pair{1.5, 4}, std::pair{1.25, 3}}) {
    GriddingPlan plan(pos, 32, os, w);
    for (std::size_t s = 0; s < pos.size(); ++s) {
      double sx = 0.0, sy = 0.0;
      for (double v : plan.weights_x(s)) sx += v;
      for (double v : plan.weights_y(s)) sy += v;
      CHECK(std::abs(sx * sy - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("plans are reusable and thread-safe") {
  std::mt19937 rng(8);
  const int n = 32;
  const auto pos = oracle::random_positions(500, n, rng);
  GriddingPlan plan(pos, n);
  const CImage img = oracle::random_image(n, rng);
  const auto a = plan.forward(img);
  std::vector<cplx> b, c;
  std::thread t1([&] { b = plan.forward(img); });
  std::thread t2([&] { c = plan.forward(img); });
  t1.join();
  t2.join();
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("plan rejects out-of-range positions and names the offender") {
  std::vector<KPoint> pos{{0.0, 0.0}, {1.0, 2.0}, {9.0, 0.0}};
  try {
    GriddingPlan plan(pos, 16);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
    CHECK(std::string(e.what()).find("sample 2") != std::string::npos);
  }
  CHECK_THROWS_AS(GriddingPlan(pos, 16, 1.0, 6), Error);
}

TEST_CASE("edge frequency +N/2 is the same as -N/2") {
  std::mt19937 rng(9);
  const int n = 16;
  const CImage img = oracle::random_image(n, rng);
  std::vector<KPoint> pos{{8.0, 3.0}, {-8.0, 3.0}};
  const auto got = GriddingPlan(pos, n).forward(img);
  CHECK(std::abs(got[0] - got[1]) < 1e-12 * std::abs(got[1]) + 1e-14);
}
