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

#include "doctest.h"
#include "json.hpp"
#include "spiralrt/evalstats.hpp"

using namespace spiralrt;
using namespace spiralrt::stats;

TEST_CASE("Bland-Altman hand-computed cases") {
  const std::vector<double> a = {10, 20}, b = {8, 16};
  const auto r = bland_altman(a, b);
  // d = [2, 4]: mean 3, sample sd sqrt(2).
  CHECK(std::abs(r.bias - 3.0) < 1e-9);
  CHECK(std::abs(r.loa_low - (3.0 - 1.96 * std::sqrt(2.0))) < 1e-9);
  CHECK(std::abs(r.loa_high - (3.0 + 1.96 * std::sqrt(2.0))) < 1e-9);
  CHECK(std::abs(r.loa_low - 0.228) < 5e-4);
  CHECK(std::abs(r.loa_high - 5.772) < 5e-4);

  const auto c = bland_altman(std::vector<double>{50, 60, 70}, std::vector<double>{48, 58, 68});
  CHECK(c.bias == doctest::Approx(2.0));
  CHECK(c.loa_low == doctest::Approx(2.0));
  CHECK(c.loa_high == doctest::Approx(2.0));

  const std::vector<double> s = {1.5, 2.5, 9.0};
  const auto z = bland_altman(s, s);
  CHECK(z.bias == 0.0);
  CHECK(z.loa_low == 0.0);
  CHECK(z.loa_high == 0.0);

  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["bias"].get<double>() == doctest::Approx(3.0));
}

TEST_CASE("Bland-Altman antisymmetry and errors") {
  const std::vector<double> a = {3.1, 4.7, 2.2, 8.0}, b = {2.0, 5.5, 2.1, 7.2};
  const auto ab = bland_altman(a, b), ba = bland_altman(b, a);
  CHECK(ab.bias == doctest::Approx(-ba.bias));
  CHECK(ab.loa_low == doctest::Approx(-ba.loa_high));
  CHECK(ab.loa_high == doctest::Approx(-ba.loa_low));
  CHECK_THROWS_AS(bland_altman(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(bland_altman(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("nrmse and psnr") {
  const std::vector<double> ref = {1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1};
  std::vector<double> inv(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) inv[i] = 1.0 - ref[i];
  CHECK(nrmse(ref, ref) == 0.0);
  // Every pixel differs by 1: sqrt(16 / 8).
  CHECK(nrmse(inv, ref) == doctest::Approx(std::sqrt(2.0)));
  // rmse 1, peak 1 -> 0 dB.
  CHECK(psnr(inv, ref) == doctest::Approx(0.0));
  std::vector<double> half = ref;
  half[0] = 0.5;
  CHECK(psnr(half, ref) == doctest::Approx(20.0 * std::log10(1.0 / std::sqrt(0.25 / 16))));
  CHECK(std::isinf(psnr(ref, ref)));
  CHECK_THROWS_AS(nrmse(ref, std::vector<double>(3, 1.0)), Error);
  const std::vector<cplx> z = {{1, 1}, {0, 2}};
  const std::vector<cplx> zr = {{1, 0}, {0, 2}};
  CHECK(nrmse(z, zr) == doctest::Approx(std::sqrt(1.0 / 5.0)));
}

TEST_CASE("dice") {
  LabelImage a(4, 4), b(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      a(y, x) = (x + y) % 2 ? kLeftVentricle : kBackground;
      b(y, x) = (x + y) % 2 ? kBackground : kLeftVentricle;
    }
  CHECK(dice(a, b, kLeftVentricle) == 0.0);
  CHECK(dice(a, a, kLeftVentricle) == 1.0);
  CHECK(dice(a, b, kMyocardium) == 1.0);  // both empty
  LabelImage c = a;
  c(0, 1) = kBackground;  // |A| = 8, |C| = 7, overlap 7
  CHECK(dice(a, c, kLeftVentricle) == doctest::Approx(14.0 / 15.0));
  CHECK(dice(c, a, kLeftVentricle) == dice(a, c, kLeftVentricle));
  CHECK_THROWS_AS(dice(a, LabelImage(3, 4), kLeftVentricle), Error);
}
