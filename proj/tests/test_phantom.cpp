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

#include <algorithm>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "spiralrt/phantom.hpp"

using namespace spiralrt;
using namespace spiralrt::phantom;

namespace {

// Analytic stack-of-elliptic-cylinders LV volume (mL) at a cardiac phase,
// written independently of the generator: raised-cosine radius, linear
// apical taper of the radius, ellipse area pi * a * b per slice.
double ellipse_stack_volume(const PhantomConfig& c, double phase) {
  const double d = c.lv_radius_ed_mm - c.lv_radius_es_mm;
  double r;
  if (phase <= c.es_phase)
    r = c.lv_radius_ed_mm - d * (1.0 - std::cos(kPi * phase / c.es_phase)) / 2.0;
  else
    r = c.lv_radius_es_mm + d * (1.0 - std::cos(kPi * (phase - c.es_phase) / (1.0 - c.es_phase))) / 2.0;
  double v = 0.0;
  for (int s = 0; s < c.n_slices; ++s) {
    const double t = c.n_slices > 1 ? static_cast<double>(s) / (c.n_slices - 1) : 0.0;
    const double a = r * (1.0 - t * (1.0 - c.apex_scale));
    v += kPi * a * (a * c.lv_aspect) * c.slice_thickness_mm;
  }
  return v / 1000.0;
}

int count_label(const LabelImage& m, Label l) {
  return static_cast<int>(std::count(m.data.begin(), m.data.end(), static_cast<std::uint8_t>(l)));
}

double ef_percent(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  const double mn = *std::min_element(v.begin(), v.end());
  return 100.0 * (mx - mn) / mx;
}

}  // namespace

TEST_CASE("default phantom: volume curve matches the ellipse-stack oracle and EF is 60 %") {
  PhantomConfig c;  // 104 frames, 10 slices
  const auto p = generate_phantom(c);
  REQUIRE(p.true_volume_ml.size() == 104u);
  const double px_ml = c.pixel_size_mm * c.pixel_size_mm * c.slice_thickness_mm / 1000.0;
  std::vector<double> oracle(c.n_frames);
  for (int f = 0; f < c.n_frames; ++f) {
    const double t = (f + 0.5) * c.frame_dt_ms;
    const double phase = std::fmod(t, c.heart_period_ms) / c.heart_period_ms;
    oracle[f] = ellipse_stack_volume(c, phase);
    CHECK(std::abs(p.true_volume_ml[f] - oracle[f]) <= c.n_slices * px_ml);
  }
  const double ef = ef_percent(p.true_volume_ml);
  CHECK(ef >= 59.0);
  CHECK(ef <= 61.0);
  CHECK(ef_percent(oracle) == doctest::Approx(ef).epsilon(0.01));
  CHECK(100.0 * (p.edv_ml - p.esv_ml) / p.edv_ml == doctest::Approx(60.0).epsilon(1e-9));
}

TEST_CASE("per-slice LV pixel count is within one pixel area of the analytic ellipse") {
  const auto c = fixture::small_config(22, 4);
  const auto p = generate_phantom(c);
  const double px2 = c.pixel_size_mm * c.pixel_size_mm;
  for (int f = 0; f < c.n_frames; ++f) {
    double vol = 0.0;
    for (int s = 0; s < c.n_slices; ++s) {
      const int n = count_label(p.mask(f, s), kLeftVentricle);
      CHECK(std::abs(n * px2 - p.lv_area_mm2(f, s)) <= px2);
      vol += n * px2 * c.slice_thickness_mm / 1000.0;
    }
    CHECK(vol == doctest::Approx(p.true_volume_ml[f]).epsilon(1e-12));
  }
}

TEST_CASE("labels are valid and intensities follow the tissue labels") {
  const auto c = fixture::small_config(12, 2);
  const auto p = generate_phantom(c);
  int interior_lv = 0, interior_myo = 0;
  for (int f = 0; f < c.n_frames; ++f)
    for (int s = 0; s < c.n_slices; ++s) {
      const auto& m = p.mask(f, s);
      const auto& im = p.image(f, s);
      for (auto v : m.data) CHECK(v < kNumLabels);
      // Pixels whose blur footprint is a single label carry that label's intensity.
      for (int y = 3; y < m.height - 3; ++y)
        for (int x = 3; x < m.width - 3; ++x) {
          const auto l = m(y, x);
          if (l != kLeftVentricle && l != kMyocardium) continue;
          bool uniform = true;
          for (int dy = -3; dy <= 3 && uniform; ++dy)
            for (int dx = -3; dx <= 3 && uniform; ++dx) uniform = m(y + dy, x + dx) == l;
          if (!uniform) continue;
          const double want = l == kLeftVentricle ? c.intensity.blood : c.intensity.myocardium;
          if (std::abs(im(y, x) - want) > 1e-6) {
            FAIL("intensity mismatch at " << x << "," << y);
          }
          (l == kLeftVentricle ? interior_lv : interior_myo)++;
        }
    }
  CHECK(interior_lv > 0);
  CHECK(interior_myo > 0);
  CHECK(c.intensity.blood != c.intensity.myocardium);
}

TEST_CASE("myocardial wall area is conserved over the cycle") {
  const auto c = fixture::small_config(21, 3);
  const auto p = generate_phantom(c);
  const double px2 = c.pixel_size_mm * c.pixel_size_mm;
  for (int s = 0; s < c.n_slices; ++s) {
    const double sc = 1.0 - (1.0 - c.apex_scale) * s / (c.n_slices - 1);
    const double r = c.lv_radius_ed_mm, ro = r + c.wall_thickness_ed_mm;
    const double wall = kPi * c.lv_aspect * sc * sc * (ro * ro - r * r);
    for (int f = 0; f < c.n_frames; ++f) {
      const int n = count_label(p.mask(f, s), kMyocardium);
      CHECK(std::abs(n * px2 - wall) <= px2);
    }
  }
  // Wall thickens at systole: the epicardium shrinks less than the endocardium.
  CHECK(count_label(p.mask(8, 0), kRightVentricle) > 0);
}

TEST_CASE("regular rhythm gives a periodic volume curve") {
  auto c = fixture::small_config(60, 2);
  c.heart_period_ms = 960.0;  // 20 frames
  const auto p = generate_phantom(c);
  for (int f = 0; f + 20 < c.n_frames; ++f)
    CHECK(p.true_volume_ml[f] == doctest::Approx(p.true_volume_ml[f + 20]).epsilon(1e-12));

  c.heart_period_ms = 1000.0;
  const auto q = generate_phantom(c);
  // Local maxima spaced by period / frame_dt within one frame.
  std::vector<int> peaks;
  for (int f = 1; f + 1 < c.n_frames; ++f)
    if (q.true_volume_ml[f] >= q.true_volume_ml[f - 1] && q.true_volume_ml[f] > q.true_volume_ml[f + 1])
      peaks.push_back(f);
  REQUIRE(peaks.size() >= 2u);
  for (std::size_t i = 1; i < peaks.size(); ++i)
    CHECK(std::abs((peaks[i] - peaks[i - 1]) - 1000.0 / 48.0) <= 1.0);
}

TEST_CASE("volume extrema align with ED and ES phases within one frame") {
  const auto c = fixture::small_config(104, 2);
  const auto p = generate_phantom(c);
  for (std::size_t i = 0; i < p.cycle_start_ms.size(); ++i) {
    const double ed = p.cycle_start_ms[i];
    const double es = ed + c.es_phase * p.cycle_length_ms[i];
    const double end = ed + p.cycle_length_ms[i];
    if (ed < 0.0 || end > c.n_frames * c.frame_dt_ms) continue;
    int fmax = -1, fmin = -1;
    for (int f = 0; f < c.n_frames; ++f) {
      const double t = p.frame_times_ms[f];
      if (t < ed - 0.5 * c.frame_dt_ms || t >= end - 0.5 * c.frame_dt_ms) continue;
      if (fmax < 0 || p.true_volume_ml[f] > p.true_volume_ml[fmax]) fmax = f;
      if (fmin < 0 || p.true_volume_ml[f] < p.true_volume_ml[fmin]) fmin = f;
    }
    CHECK(std::abs((fmax + 0.5) * c.frame_dt_ms - ed) <= c.frame_dt_ms);
    CHECK(std::abs((fmin + 0.5) * c.frame_dt_ms - es) <= c.frame_dt_ms);
  }
  CHECK(p.cycle_boundaries.size() >= 4u);
}

TEST_CASE("static heart gives a constant volume curve") {
  auto c = fixture::small_config(30, 2);
  c.lv_radius_es_mm = c.lv_radius_ed_mm;
  const auto p = generate_phantom(c);
  for (double v : p.true_volume_ml) CHECK(v == p.true_volume_ml[0]);
  for (int f = 1; f < c.n_frames; ++f) CHECK(p.image(f, 0).data == p.image(0, 0).data);
}

TEST_CASE("arrhythmia jitter perturbs cycle lengths deterministically") {
  auto c = fixture::small_config(80, 1);
  c.arrhythmia_jitter = 0.2;
  c.seed = 7;
  const auto a = generate_phantom(c);
  const auto b = generate_phantom(c);
  CHECK(a.cycle_length_ms == b.cycle_length_ms);
  CHECK(a.true_volume_ml == b.true_volume_ml);
  std::set<double> lengths(a.cycle_length_ms.begin(), a.cycle_length_ms.end());
  CHECK(lengths.size() == a.cycle_length_ms.size());
  for (double l : a.cycle_length_ms) {
    CHECK(l >= 800.0);
    CHECK(l <= 1200.0);
  }
  c.seed = 8;
  CHECK(generate_phantom(c).cycle_length_ms != a.cycle_length_ms);
}

TEST_CASE("breathing translates the heart rigidly") {
  auto c = fixture::small_config(105, 1);
  c.lv_radius_es_mm = c.lv_radius_ed_mm;
  c.breathing_amplitude_mm = 5.0;
  c.heart_period_ms = 500.0;  // breathing period 5000 ms
  const auto p = generate_phantom(c);
  auto centroid_y = [&](int f) {
    double s = 0.0;
    int n = 0;
    const auto& m = p.mask(f, 0);
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m(y, x) == kLeftVentricle) s += y, ++n;
    return s / n * c.pixel_size_mm;
  };
  double lo = 1e9, hi = -1e9;
  for (int f = 0; f < c.n_frames; ++f) {
    lo = std::min(lo, centroid_y(f));
    hi = std::max(hi, centroid_y(f));
    CHECK(count_label(p.mask(f, 0), kLeftVentricle) == count_label(p.mask(0, 0), kLeftVentricle));
  }
  CHECK(hi - lo == doctest::Approx(10.0).epsilon(0.1));
}

TEST_CASE("invalid configurations are rejected") {
  auto c = fixture::small_config();
  auto expect_invalid = [](PhantomConfig cfg) {
    try {
      (void)generate_phantom(cfg);
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
  };
  auto bad = c;
  bad.lv_radius_es_mm = c.lv_radius_ed_mm + 1.0;
  expect_invalid(bad);
  bad = c;
  bad.heart_period_ms = 90.0;
  expect_invalid(bad);
  bad = c;
  bad.frame_dt_ms = 0.0;
  expect_invalid(bad);
  bad = c;
  bad.lv_radius_ed_mm = 45.0;  // epicardium plus RV overflows the body
  expect_invalid(bad);
  bad = c;
  bad.breathing_amplitude_mm = 40.0;
  expect_invalid(bad);
  bad = c;
  bad.breathing_period_ms = 2000.0;
  expect_invalid(bad);
}

TEST_CASE("coil maps: deterministic, smooth, rss positive") {
  const auto a = generate_coils(8, 128, 3);
  const auto b = generate_coils(8, 128, 3);
  REQUIRE(a.maps.size() == 8u);
  for (int c = 0; c < 8; ++c) CHECK(a.maps[c].data == b.maps[c].data);
  CHECK(generate_coils(8, 128, 4).maps[0].data != a.maps[0].data);
  const auto rss = root_sum_of_squares(a.maps);
  CHECK(*std::min_element(rss.data.begin(), rss.data.end()) > 0.1);
  for (const auto& m : a.maps) CHECK(max_second_difference(m) < kCoilSmoothnessBound);
  const auto n = normalize_rss(a);
  for (const auto& m : n.maps) CHECK(max_second_difference(m) < kCoilSmoothnessBound);
  const auto rn = root_sum_of_squares(n.maps);
  for (double v : rn.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  // Lobe peaks sit at distinct border positions.
  std::set<std::pair<int, int>> peaks;
  for (const auto& m : a.maps) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (std::abs(m.data[i]) > std::abs(m.data[best])) best = i;
    const int y = static_cast<int>(best) / 128, x = static_cast<int>(best) % 128;
    CHECK((x == 0 || y == 0 || x == 127 || y == 127));
    peaks.insert({y, x});
  }
  CHECK(peaks.size() == 8u);
  const auto unit = generate_coils(1, 16, 1, true);
  for (auto v : unit.maps[0].data) CHECK(v == cplx(1.0, 0.0));
}

TEST_CASE("simulate_kspace: impulse matches direct DFT, zero image gives zero") {
  const int n = 64;
  const auto tr = fixture::protocol_trajectory(n * 1.29, 1, 2);
  CImage imp(n, n);
  imp(n / 2 + 5, n / 2 - 9) = 1.0;
  const auto unit = generate_coils(1, n, 1, true);
  const auto raw = simulate_kspace(std::vector<CImage>{imp}, 48.0, unit, tr, 0.0, 1);
  REQUIRE(raw.n_frames == 1);
  REQUIRE(raw.arms_per_frame == 13);
  const auto pos = tr.frame_samples(0);
  std::vector<cplx> want(pos.size());
  for (std::size_t s = 0; s < pos.size(); ++s)
    want[s] = std::polar(1.0, -2.0 * kPi * (pos[s].kx * -9 + pos[s].ky * 5) / n);
  const std::vector<cplx> got(raw.data.begin(), raw.data.end());
  CHECK(oracle::rel_l2(got, want) < 1e-3);

  const auto zero = simulate_kspace(std::vector<CImage>{CImage(n, n)}, 48.0, unit, tr, 0.0, 1);
  for (auto z : zero.data) CHECK(z == cplx{});
}

TEST_CASE("simulate_kspace on the phantom: DC sample, repeat orientations, noise, FOV check") {
  auto c = fixture::small_config(16, 1);
  c.lv_radius_es_mm = c.lv_radius_ed_mm;  // static
  const auto p = generate_phantom(c);
  const auto tr = fixture::protocol_trajectory(c.fov_mm(), 1, 8);
  const auto coils = normalize_rss(generate_coils(4, c.grid_size, 2));
  const auto raw = simulate_kspace(p, 0, coils, tr, 0.0, 1);
  CHECK(raw.n_coils == 4);
  CHECK(raw.samples_per_arm == tr.samples_per_arm);
  // Frames f and f + 8 share an orientation.
  for (int cc = 0; cc < 4; ++cc) {
    const auto a = raw.frame_coil(0, cc), b = raw.frame_coil(8, cc);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  // First sample of every arm is k = 0: the coil-weighted image sum.
  for (int cc = 0; cc < 4; ++cc) {
    cplx sum = 0.0;
    const auto& im = p.image(0, 0);
    for (std::size_t i = 0; i < im.size(); ++i) sum += static_cast<double>(im.data[i]) * coils.maps[cc].data[i];
    for (int a = 0; a < 13; ++a) CHECK(std::abs(raw.arm(3, cc, a)[0] - sum) < 1e-4 * std::abs(sum));
  }
  // Noise: reproducible under seed, standard deviation relative to mean |signal|.
  const auto n1 = simulate_kspace(p, 0, coils, tr, 0.05, 11);
  const auto n2 = simulate_kspace(p, 0, coils, tr, 0.05, 11, 2);
  CHECK(n1.data == n2.data);
  double mean_abs = 0.0, var = 0.0;
  for (std::size_t i = 0; i < raw.data.size(); ++i) {
    mean_abs += std::abs(raw.data[i]);
    var += std::norm(n1.data[i] - raw.data[i]);
  }
  mean_abs /= raw.data.size();
  var /= raw.data.size();
  CHECK(std::sqrt(var) == doctest::Approx(0.05 * mean_abs).epsilon(0.01));

  const auto wrong = fixture::protocol_trajectory(c.fov_mm() * 1.1, 1, 8);
  CHECK_THROWS_AS(simulate_kspace(p, 0, coils, wrong, 0.0, 1), Error);
}
