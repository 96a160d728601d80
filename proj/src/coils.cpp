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

#include "spiralrt/coils.hpp"

#include <algorithm>
#include <cmath>

#include "spiralrt/nufft.hpp"

namespace spiralrt::coils {

std::vector<CImage> temporal_average(const RawAcquisition& raw, const traj::Trajectory& tr,
                                     int grid_size, int threads) {
  require(raw.arms_per_frame == tr.arms_per_frame && raw.samples_per_arm == tr.samples_per_arm,
          ErrorCode::ShapeMismatch, "temporal_average: acquisition and trajectory shapes differ");
  require(raw.n_coils >= 1, ErrorCode::InvalidArgument, "temporal_average: no coils");
  const int n_orient = tr.n_orientations;
  std::vector<int> frames_per(n_orient, 0);
  for (int f = 0; f < raw.n_frames; ++f) frames_per[tr.orientation_of_frame(f)]++;
  for (int o = 0; o < n_orient; ++o)
    require(frames_per[o] > 0, ErrorCode::InsufficientData,
            "temporal_average: " + std::to_string(raw.n_frames) +
                " frames do not cover all " + std::to_string(n_orient) + " orientations");

  const std::size_t per = raw.frame_coil_size();
  const auto w_arm = traj::density_weights(tr.arm(0, 0), n_orient * tr.arms_per_frame);
  std::vector<double> w(per * n_orient);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = w_arm[i % w_arm.size()];
  const nufft::GriddingPlan plan(tr.union_samples(), grid_size);
  const double scale = 1.0 / (static_cast<double>(grid_size) * grid_size);

  std::vector<CImage> out(raw.n_coils);
  parallel_for(raw.n_coils, threads, [&](int c) {
    std::vector<cplx> pooled(per * n_orient);
    for (int f = 0; f < raw.n_frames; ++f) {
      const int o = tr.orientation_of_frame(f);
      const auto d = raw.frame_coil(f, c);
      cplx* dst = pooled.data() + per * o;
      for (std::size_t i = 0; i < per; ++i) dst[i] += d[i];
    }
    for (int o = 0; o < n_orient; ++o)
      for (std::size_t i = 0; i < per; ++i) pooled[per * o + i] /= frames_per[o];
    CImage img = plan.adjoint(pooled, std::span<const double>(w));
    for (auto& v : img.data) v *= scale;
    out[c] = std::move(img);
  });
  return out;
}

void anchor_phase(std::span<cplx> v) {
  for (const auto& z : v) {
    const double m = std::abs(z);
    if (m > 0.0) {
      const cplx rot = std::conj(z) / m;
      for (auto& x : v) x *= rot;
      return;
    }
  }
}

std::vector<cplx> dominant_eigenvector(std::span<const cplx> a, int n, double tol, int max_iter) {
  require(n >= 1 && a.size() == static_cast<std::size_t>(n) * n, ErrorCode::InvalidArgument,
          "dominant_eigenvector: matrix must be n x n");
  auto apply = [&](const std::vector<cplx>& x) {
    std::vector<cplx> y(n);
    for (int i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (int j = 0; j < n; ++j) s += a[static_cast<std::size_t>(i) * n + j] * x[j];
      y[i] = s;
    }
    return y;
  };
  auto normalize = [](std::vector<cplx>& x) {
    const double s = norm2(std::span<const cplx>(x));
    if (s > 0.0)
      for (auto& z : x) z /= s;
    return s;
  };

  std::vector<cplx> v(n, cplx(1.0, 0.0));
  normalize(v);
  {
    // The all-ones start can be orthogonal to the range; restart on the
    // largest diagonal entry then.
    auto y = apply(v);
    if (normalize(y) == 0.0) {
      int best = 0;
      for (int i = 1; i < n; ++i)
        if (a[static_cast<std::size_t>(i) * n + i].real() >
            a[static_cast<std::size_t>(best) * n + best].real())
          best = i;
      std::fill(v.begin(), v.end(), cplx{});
      v[best] = 1.0;
    }
  }
  for (int it = 0; it < max_iter; ++it) {
    auto y = apply(v);
    if (normalize(y) == 0.0) return y;
    // Fix the phase relative to the previous iterate before comparing.
    const cplx ip = dot(std::span<const cplx>(y), std::span<const cplx>(v));
    if (std::abs(ip) > 0.0)
      for (auto& z : y) z *= ip / std::abs(ip);
    double diff = 0.0;
    for (int i = 0; i < n; ++i) diff += std::norm(y[i] - v[i]);
    v = std::move(y);
    if (std::sqrt(diff) < tol) break;
  }
  return v;
}

SensitivityMaps walsh_maps(const std::vector<CImage>& imgs, const WalshOptions& opt) {
  require(!imgs.empty(), ErrorCode::InvalidArgument, "walsh_maps: need at least one coil");
  require(opt.block_size >= 2, ErrorCode::InvalidArgument, "walsh_maps: block_size must be >= 2");
  require(opt.divisor >= 1, ErrorCode::InvalidArgument, "walsh_maps: divisor must be >= 1");
  const int nc = static_cast<int>(imgs.size());
  const int h = imgs[0].height, w = imgs[0].width;
  for (const auto& im : imgs)
    require(im.height == h && im.width == w, ErrorCode::ShapeMismatch,
            "walsh_maps: coil images differ in size");
  const int d = opt.divisor;
  const int lh = std::max(1, (h + d - 1) / d), lw = std::max(1, (w + d - 1) / d);
  const double centre_off = 0.5 * (d - 1);

  // Low-resolution estimates: [ly][lx][coil].
  std::vector<cplx> low(static_cast<std::size_t>(lh) * lw * nc);
  std::vector<double> energy(static_cast<std::size_t>(lh) * lw, 0.0);
  parallel_for(lh, opt.threads, [&](int ly) {
    std::vector<cplx> r(static_cast<std::size_t>(nc) * nc);
    std::vector<cplx> s(nc);
    for (int lx = 0; lx < lw; ++lx) {
      std::fill(r.begin(), r.end(), cplx{});
      const int y0 = static_cast<int>(std::floor(ly * d + centre_off - 0.5 * opt.block_size + 0.5));
      const int x0 = static_cast<int>(std::floor(lx * d + centre_off - 0.5 * opt.block_size + 0.5));
      for (int y = std::max(0, y0); y < std::min(h, y0 + opt.block_size); ++y)
        for (int x = std::max(0, x0); x < std::min(w, x0 + opt.block_size); ++x) {
          for (int c = 0; c < nc; ++c) s[c] = imgs[c](y, x);
          for (int i = 0; i < nc; ++i)
            for (int j = 0; j < nc; ++j) r[static_cast<std::size_t>(i) * nc + j] += s[i] * std::conj(s[j]);
        }
      double tr = 0.0;
      for (int i = 0; i < nc; ++i) tr += r[static_cast<std::size_t>(i) * nc + i].real();
      const std::size_t idx = static_cast<std::size_t>(ly) * lw + lx;
      energy[idx] = tr;
      if (tr <= 0.0) continue;
      auto v = dominant_eigenvector(r, nc);
      anchor_phase(v);
      std::copy(v.begin(), v.end(), low.begin() + static_cast<std::ptrdiff_t>(idx * nc));
    }
  });

  const double emax = *std::max_element(energy.begin(), energy.end());
  std::vector<std::uint8_t> valid(energy.size());
  for (std::size_t i = 0; i < energy.size(); ++i)
    valid[i] = emax > 0.0 && energy[i] > opt.energy_threshold * emax;

  SensitivityMaps out;
  out.maps.assign(nc, CImage(h, w));
  out.mask = LabelImage(h, w, 0);
  auto axis = [&](int p, int n_low, int& i0, int& i1, double& t) {
    double u = (p - centre_off) / d;
    u = std::clamp(u, 0.0, static_cast<double>(n_low - 1));
    i0 = static_cast<int>(std::floor(u));
    i1 = std::min(i0 + 1, n_low - 1);
    t = u - i0;
  };
  std::vector<cplx> s(nc);
  for (int y = 0; y < h; ++y) {
    int y0, y1;
    double ty;
    axis(y, lh, y0, y1, ty);
    for (int x = 0; x < w; ++x) {
      int x0, x1;
      double tx;
      axis(x, lw, x0, x1, tx);
      const std::size_t q[4] = {static_cast<std::size_t>(y0) * lw + x0, static_cast<std::size_t>(y0) * lw + x1,
                                static_cast<std::size_t>(y1) * lw + x0, static_cast<std::size_t>(y1) * lw + x1};
      const double wt[4] = {(1 - ty) * (1 - tx), (1 - ty) * tx, ty * (1 - tx), ty * tx};
      bool ok = true;
      for (int k = 0; k < 4; ++k)
        if (wt[k] > 0.0 && !valid[q[k]]) ok = false;
      if (!ok) continue;
      // Align the neighbours' free global phase to the first one before
      // blending, so the result does not depend on the anchor coil.
      cplx align[4];
      int ref = -1;
      for (int k = 0; k < 4; ++k) {
        align[k] = 1.0;
        if (wt[k] <= 0.0) continue;
        if (ref < 0) {
          ref = k;
          continue;
        }
        cplx ip = 0.0;
        for (int c = 0; c < nc; ++c) ip += std::conj(low[q[k] * nc + c]) * low[q[ref] * nc + c];
        if (std::abs(ip) > 0.0) align[k] = ip / std::abs(ip);
      }
      double rss = 0.0;
      for (int c = 0; c < nc; ++c) {
        cplx z = 0.0;
        for (int k = 0; k < 4; ++k)
          if (wt[k] > 0.0) z += wt[k] * align[k] * low[q[k] * nc + c];
        s[c] = z;
        rss += std::norm(z);
      }
      rss = std::sqrt(rss);
      if (!(rss > 0.0)) continue;
      anchor_phase(s);
      for (int c = 0; c < nc; ++c) out.maps[c](y, x) = s[c] / rss;
      out.mask(y, x) = 1;
    }
  }
  return out;
}

}  // namespace spiralrt::coils
