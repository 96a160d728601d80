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

// Independent reference computations used only by the test suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spiralrt/core.hpp"
#include "spiralrt/trajectory.hpp"

namespace oracle {

using spiralrt::CImage;
using spiralrt::cplx;
using spiralrt::KPoint;
using spiralrt::kPi;

/// Direct Fourier sum at arbitrary positions (cycles/FOV), centered pixels.
inline std::vector<cplx> direct_dft(const CImage& image, const std::vector<KPoint>& pos) {
  const int h = image.height, w = image.width;
  std::vector<cplx> out(pos.size());
  for (std::size_t s = 0; s < pos.size(); ++s) {
    cplx acc = 0.0;
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix) {
        const double ph =
            -2.0 * kPi * (pos[s].kx * (ix - w / 2) / w + pos[s].ky * (iy - h / 2) / h);
        acc += image(iy, ix) * cplx(std::cos(ph), std::sin(ph));
      }
    out[s] = acc;
  }
  return out;
}

inline CImage random_image(int n, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  CImage img(n, n);
  for (auto& v : img.data) v = cplx(nd(rng), nd(rng));
  return img;
}

inline CImage random_blobs(int n, int count, std::mt19937& rng) {
  std::uniform_real_distribution<double> pos(0.25 * n, 0.75 * n), width(1.5, 4.0), amp(-1.0, 1.0);
  CImage img(n, n);
  for (int b = 0; b < count; ++b) {
    const double cy = pos(rng), cx = pos(rng), w = width(rng);
    const cplx a(amp(rng), amp(rng));
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        img(y, x) += a * std::exp(-((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (2 * w * w));
  }
  return img;
}

inline std::vector<cplx> random_samples(std::size_t m, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  std::vector<cplx> v(m);
  for (auto& z : v) z = cplx(nd(rng), nd(rng));
  return v;
}

inline std::vector<KPoint> random_positions(std::size_t m, int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-0.5 * n, 0.5 * n);
  std::vector<KPoint> p(m);
  for (auto& k : p) k = {u(rng), u(rng)};
  return p;
}

inline double rel_l2(const std::vector<cplx>& a, const std::vector<cplx>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return std::sqrt(num / den);
}

// Smallest interleave count whose rotated copies of the base arm keep every radial
// gap between neighbouring crossings along a ray at or below 1/fov.
inline int brute_force_nyquist_arms(const spiralrt::traj::InterleaveSet& set, double fov_m, int n_start) {
  const auto& s = set.base_arm.samples;
  std::vector<double> theta(s.size()), radius(s.size());
  double unwrap = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    radius[i] = std::hypot(s[i].kx, s[i].ky);
    double a = std::atan2(s[i].ky, s[i].kx);
    if (i > 0) {
      while (a + unwrap < theta[i - 1] - kPi) unwrap += 2 * kPi;
      while (a + unwrap > theta[i - 1] + kPi) unwrap -= 2 * kPi;
    }
    theta[i] = a + unwrap;
  }
  auto radius_at = [&](double th) {
    auto it = std::lower_bound(theta.begin() + 1, theta.end(), th);
    const std::size_t i = static_cast<std::size_t>(it - theta.begin());
    const double t = (th - theta[i - 1]) / (theta[i] - theta[i - 1]);
    return radius[i - 1] + t * (radius[i] - radius[i - 1]);
  };
  for (int n = n_start; n < 100000; ++n) {
    double worst = 0.0;
    for (int ray = 0; ray < 64; ++ray) {
      const double phi = 2 * kPi * ray / 64.0;
      std::vector<double> hits;
      for (int a = 0; a < n; ++a) {
        const double rot = 2 * kPi * a / n;
        for (int m = -2; m < 200; ++m) {
          const double th = phi - rot + 2 * kPi * m;
          if (th <= theta[1] || th >= theta.back()) continue;
          hits.push_back(radius_at(th));
        }
      }
      std::sort(hits.begin(), hits.end());
      for (std::size_t i = 1; i < hits.size(); ++i) worst = std::max(worst, hits[i] - hits[i - 1]);
    }
    if (worst <= 1.0 / fov_m) return n;
  }
  return -1;
}

}  // namespace oracle
