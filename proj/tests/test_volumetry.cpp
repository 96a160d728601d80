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
#include "fixtures.hpp"
#include "json.hpp"
#include "spiralrt/volumetry.hpp"

using namespace spiralrt;
using namespace spiralrt::volumetry;

namespace {

std::vector<std::vector<LabelImage>> phantom_masks(const phantom::DynamicPhantom& p) {
  const auto& c = p.config;
  std::vector<std::vector<LabelImage>> m(c.n_slices);
  for (int s = 0; s < c.n_slices; ++s)
    for (int f = 0; f < c.n_frames; ++f) m[s].push_back(p.mask(f, s));
  return m;
}

VolumeCurve curve_of(std::vector<double> v, double dt) {
  VolumeCurve c;
  c.volume_ml = std::move(v);
  c.frame_dt_ms = dt;
  return c;
}

void check_alternation(const Extrema& e) {
  for (std::size_t i = 1; i < e.sequence.size(); ++i) CHECK(e.sequence[i].second != e.sequence[i - 1].second);
}

}  // namespace

TEST_CASE("mask_to_volume arithmetic") {
  LabelImage m(16, 16, kBackground);
  for (int i = 0; i < 100; ++i) m.data[i] = kLeftVentricle;
  m.data[200] = kMyocardium;
  m.data[201] = kRightVentricle;
  const auto c = mask_to_volume({{m}}, 1.29, 8.0, 48.0);
  REQUIRE(c.volume_ml.size() == 1u);
  CHECK(std::abs(c.volume_ml[0] - 100 * 1.6641 * 8 / 1000.0) < 1e-12);
  CHECK(std::abs(c.volume_ml[0] - 1.331) < 5e-4);

  const auto z = mask_to_volume({{LabelImage(8, 8), LabelImage(8, 8)}}, 1.0, 1.0, 10.0);
  CHECK(z.volume_ml == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(mask_to_volume({}, 1.0, 1.0, 10.0), Error);
  CHECK_THROWS_AS(mask_to_volume({{}}, 1.0, 1.0, 10.0), Error);

  // Uneven frame counts: a 2-frame slice is stretched over 3 frames.
  LabelImage one(4, 4);
  one.data[0] = kLeftVentricle;
  const auto u = mask_to_volume({{one, one, one}, {LabelImage(4, 4), one}}, 10.0, 10.0, 10.0);
  CHECK(u.slice_frames == std::vector<int>{3, 2});
  CHECK(u.volume_ml[0] == doctest::Approx(1.0));
  CHECK(u.volume_ml[2] == doctest::Approx(2.0));
}

TEST_CASE("phantom masks reproduce the analytic volume curve") {
  auto cfg = fixture::small_config(24, 10);
  const auto p = phantom::generate_phantom(cfg);
  const auto c = mask_to_volume(phantom_masks(p), cfg.pixel_size_mm, cfg.slice_thickness_mm, cfg.frame_dt_ms);
  REQUIRE(c.volume_ml.size() == 24u);
  double worst = 0.0;
  for (int f = 0; f < 24; ++f) {
    double analytic = 0.0;
    for (int s = 0; s < cfg.n_slices; ++s) analytic += p.lv_area_mm2(f, s) * cfg.slice_thickness_mm / 1000.0;
    worst = std::max(worst, std::abs(c.volume_ml[f] - analytic) / analytic);
  }
  MESSAGE("worst relative volume error " << worst);
  CHECK(worst < 0.02);
}

TEST_CASE("extrema of a sinusoid") {
  const double dt = 48.0, period = 1000.0;
  const int n = static_cast<int>(3 * period / dt);
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 100.0 + 40.0 * std::sin(2 * kPi * i * dt / period);
  const auto e = detect_extrema(curve_of(v, dt));
  REQUIRE(e.ed_frames.size() == 3u);
  REQUIRE(e.es_frames.size() == 3u);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(e.ed_frames[k] - (k + 0.25) * period / dt) <= 1.0);
    CHECK(std::abs(e.es_frames[k] - (k + 0.75) * period / dt) <= 1.0);
  }
  check_alternation(e);

  // Small ripples are below the prominence threshold.
  for (int i = 0; i < n; ++i) v[i] += (i % 2 ? 0.5 : -0.5);
  const auto r = detect_extrema(curve_of(v, dt));
  CHECK(r.ed_frames.size() == 3u);
  CHECK(r.es_frames.size() == 3u);
  check_alternation(r);
}

TEST_CASE("degenerate curves") {
  std::vector<double> mono(30);
  for (int i = 0; i < 30; ++i) mono[i] = i;
  CHECK_THROWS_AS(detect_extrema(curve_of(mono, 48.0)), Error);
  CHECK_THROWS_AS(detect_extrema(curve_of(std::vector<double>(30, 5.0), 48.0)), Error);
}

TEST_CASE("irregular rhythm: per-cycle EDV follows the simulator") {
  auto cfg = fixture::small_config(104, 10);
  cfg.arrhythmia_jitter = 0.2;
  cfg.seed = 21;
  const auto p = phantom::generate_phantom(cfg);
  const auto c = mask_to_volume(phantom_masks(p), cfg.pixel_size_mm, cfg.slice_thickness_mm, cfg.frame_dt_ms);
  const auto e = detect_extrema(c);
  check_alternation(e);
  REQUIRE(e.edv_ml.size() >= 3u);
  // Every cycle reaches the same analytic ED volume; jitter only changes its length.
  for (double edv : e.edv_ml) CHECK(std::abs(edv - p.edv_ml) <= 0.02 * p.edv_ml);
  for (double esv : e.esv_ml) CHECK(std::abs(esv - p.esv_ml) <= 0.02 * p.esv_ml);
}

TEST_CASE("ejection fraction") {
  CHECK(ejection_fraction({150}, {60}).ef_percent == doctest::Approx(60.0));
  CHECK(ejection_fraction({120, 100}, {120, 100}).ef_percent == 0.0);
  const auto r = ejection_fraction({150, 140, 160}, {60, 70, 50});
  CHECK(r.edv_median_ml == 150.0);
  CHECK(r.esv_median_ml == 60.0);
  CHECK_THROWS_AS(ejection_fraction({}, {1.0}), Error);
  CHECK_THROWS_AS(ejection_fraction({0.0}, {0.0}), Error);

  const std::vector<double> edv = {151.3, 149.9, 152.4, 150.2}, esv = {61.7, 60.2, 59.8};
  const double ef = ejection_fraction(edv, esv).ef_percent;
  for (double k : {1e-3, 0.37, 2.0, 1234.5}) {
    std::vector<double> a = edv, b = esv;
    for (auto& x : a) x *= k;
    for (auto& x : b) x *= k;
    CHECK(std::abs(ejection_fraction(a, b).ef_percent - ef) < 1e-12);
  }
}

TEST_CASE("end-to-end EF from ground-truth masks") {
  auto cfg = fixture::small_config(63, 10);
  const auto p = phantom::generate_phantom(cfg);
  const auto c = mask_to_volume(phantom_masks(p), cfg.pixel_size_mm, cfg.slice_thickness_mm, cfg.frame_dt_ms);
  const auto e = detect_extrema(c);
  const auto ef = ejection_fraction(e.edv_ml, e.esv_ml);
  MESSAGE("EF " << ef.ef_percent << " %");
  CHECK(ef.ef_percent >= 58.0);
  CHECK(ef.ef_percent <= 62.0);
  const auto j = nlohmann::json::parse(volume_report(c, e, ef));
  CHECK(j["ef_percent"].get<double>() == ef.ef_percent);
  CHECK(j["volume_ml"].size() == 63u);
}
