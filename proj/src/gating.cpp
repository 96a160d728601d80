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

#include "spiralrt/gating.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "spiralrt/fft.hpp"
#include "spiralrt/nufft.hpp"

namespace spiralrt::gating {

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  double hi = v[m];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lo + hi);
}

// FFT band-pass with even reflection at both ends, so the circular
// transform does not wrap the last cycle onto the first.
std::vector<double> band_pass(const std::vector<double>& x, double dt_ms, double lo_hz,
                              double hi_hz) {
  const std::size_t n = x.size();
  const std::size_t pad = n / 2;
  const std::size_t m = n + 2 * pad;
  std::vector<cplx> z(m);
  for (std::size_t i = 0; i < m; ++i) {
    long j = static_cast<long>(i) - static_cast<long>(pad);
    if (j < 0) j = -j - 1;
    if (j >= static_cast<long>(n)) j = 2 * static_cast<long>(n) - j - 1;
    z[i] = x[static_cast<std::size_t>(j)];
  }
  fft::forward_1d(z);
  const double df = 1000.0 / (dt_ms * m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t kk = std::min(k, m - k);
    const double f = kk * df;
    if (f < lo_hz || f > hi_hz) z[k] = 0.0;
  }
  fft::inverse_1d(z);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = z[i + pad].real() / m;
  return out;
}

}  // namespace

GatingSignal extract_gating(const RawAcquisition& raw, const traj::Trajectory& tr,
                            double median_window_ms) {
  require(raw.arms_per_frame == tr.arms_per_frame && raw.samples_per_arm == tr.samples_per_arm,
          ErrorCode::ShapeMismatch, "gating: acquisition and trajectory shapes differ");
  require(median_window_ms > 0.0, ErrorCode::InvalidArgument, "gating: median window must be > 0");
  for (int o = 0; o < tr.n_orientations; ++o)
    for (int a = 0; a < tr.arms_per_frame; ++a) {
      const KPoint k0 = tr.arm(o, a)[0];
      if (std::hypot(k0.kx, k0.ky) > 1e-6) {
        std::ostringstream m;
        m << "gating: arm " << a << " of orientation " << o << " starts at |k| = "
          << std::hypot(k0.kx, k0.ky) << " cycles/FOV, not at the k-space centre";
        fail(ErrorCode::InvalidArgument, m.str());
      }
    }

  GatingSignal g;
  const int total = raw.n_frames * raw.arms_per_frame;
  g.arm_dt_ms = raw.frame_dt_ms / raw.arms_per_frame;
  g.dc.resize(total);
  g.times_ms.resize(total);
  for (int f = 0; f < raw.n_frames; ++f)
    for (int a = 0; a < raw.arms_per_frame; ++a) {
      double s = 0.0;
      for (int c = 0; c < raw.n_coils; ++c) s += std::norm(raw.arm(f, c, a)[0]);
      const int i = f * raw.arms_per_frame + a;
      g.dc[i] = std::sqrt(s);
      g.times_ms[i] = raw.arm_time_ms(f, a);
    }

  // Centred moving median, truncated at the ends.
  const int half = std::max(1, static_cast<int>(std::lround(median_window_ms / g.arm_dt_ms))) / 2;
  g.detrended.resize(total);
  std::vector<double> win;
  for (int i = 0; i < total; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(total, i + half + 1);
    win.assign(g.dc.begin() + lo, g.dc.begin() + hi);
    g.detrended[i] = g.dc[i] - median_of(win);
  }
  return g;
}

std::vector<double> detect_cycles(const GatingSignal& g, const CycleOptions& opt) {
  const std::size_t n = g.detrended.size();
  require(n >= 4 && g.arm_dt_ms > 0.0, ErrorCode::InsufficientData,
          "gating: signal too short for cycle detection");
  require(opt.band_lo_hz >= 0.0 && opt.band_hi_hz > opt.band_lo_hz, ErrorCode::InvalidArgument,
          "gating: invalid band-pass limits");
  const auto y = band_pass(g.detrended, g.arm_dt_ms, opt.band_lo_hz, opt.band_hi_hz);
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  double ref = 0.0;
  for (double v : g.dc) ref = std::max(ref, std::abs(v));

  std::vector<std::size_t> cand;
  if (scale > 1e-9 * std::max(ref, 1e-300)) {
    for (std::size_t i = 1; i + 1 < n; ++i)
      if (y[i] > 0.0 && y[i] > y[i - 1] && y[i] >= y[i + 1]) cand.push_back(i);
  }
  // Tallest first; drop anything closer than the minimum distance to a kept peak.
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  const double min_d = opt.min_distance_ms / g.arm_dt_ms;
  std::vector<std::size_t> kept;
  for (std::size_t c : cand) {
    bool ok = true;
    for (std::size_t k : kept)
      if (std::abs(static_cast<double>(c) - static_cast<double>(k)) < min_d) ok = false;
    if (ok) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  if (kept.size() < 2) {
    std::ostringstream m;
    m << "gating: found " << kept.size()
      << " cardiac peak(s); at least 2 are needed, acquire a longer series";
    fail(ErrorCode::InsufficientData, m.str());
  }

  std::vector<double> out;
  for (std::size_t k : kept) {
    double idx = static_cast<double>(k);
    // Parabolic interpolation on the filtered signal.
    const double a = y[k - 1], c = y[k], d = y[k + 1];
    const double den = a - 2.0 * c + d;
    if (den < 0.0) idx += std::clamp(0.5 * (a - d) / den, -0.5, 0.5);
    out.push_back(g.times_ms[0] + idx * g.arm_dt_ms);
  }
  return out;
}

SegmentedSet assign_phases(const RawAcquisition& raw, const traj::Trajectory& tr,
                           const std::vector<double>& b, int phase_count) {
  require(phase_count >= 1, ErrorCode::InvalidArgument, "gating: phase_count must be >= 1");
  require(b.size() >= 2, ErrorCode::InsufficientData, "gating: need at least two cycle boundaries");
  require(std::is_sorted(b.begin(), b.end()) && std::adjacent_find(b.begin(), b.end()) == b.end(),
          ErrorCode::InvalidArgument, "gating: boundaries must be strictly increasing");
  require(raw.arms_per_frame == tr.arms_per_frame, ErrorCode::ShapeMismatch,
          "gating: acquisition and trajectory shapes differ");

  std::vector<double> rr;
  for (std::size_t i = 1; i < b.size(); ++i) rr.push_back(b[i] - b[i - 1]);
  std::vector<double> tmp = rr;
  const double rr_med = median_of(tmp);

  // Extend with median-RR cycles to cover the whole acquisition.
  const double t_lo = raw.arm_time_ms(0, 0);
  const double t_hi = raw.arm_time_ms(raw.n_frames - 1, raw.arms_per_frame - 1);
  std::vector<double> bounds = b;
  while (bounds.front() > t_lo) bounds.insert(bounds.begin(), bounds.front() - rr_med);
  while (bounds.back() <= t_hi) bounds.push_back(bounds.back() + rr_med);

  SegmentedSet s;
  s.phase_count = phase_count;
  s.n_slots = tr.n_orientations * tr.arms_per_frame;
  s.slots.assign(phase_count, std::vector<std::vector<ArmRef>>(s.n_slots));
  for (int f = 0; f < raw.n_frames; ++f) {
    const int o = tr.orientation_of_frame(f);
    for (int a = 0; a < raw.arms_per_frame; ++a) {
      const double t = raw.arm_time_ms(f, a);
      const auto it = std::upper_bound(bounds.begin(), bounds.end(), t);
      const std::size_t c = static_cast<std::size_t>(it - bounds.begin()) - 1;
      const double frac = (t - bounds[c]) / (bounds[c + 1] - bounds[c]);
      const int p = std::clamp(static_cast<int>(std::floor(frac * phase_count)), 0, phase_count - 1);
      s.slots[p][o * tr.arms_per_frame + a].push_back({f, a});
    }
  }
  s.completeness.resize(phase_count);
  s.missing_orientations.resize(phase_count);
  for (int p = 0; p < phase_count; ++p) {
    int filled = 0;
    for (int o = 0; o < tr.n_orientations; ++o) {
      bool full = true;
      for (int a = 0; a < tr.arms_per_frame; ++a) {
        if (!s.slots[p][o * tr.arms_per_frame + a].empty())
          ++filled;
        else
          full = false;
      }
      if (!full) s.missing_orientations[p].push_back(o);
    }
    s.completeness[p] = static_cast<double>(filled) / s.n_slots;
  }
  return s;
}

std::string SegmentedSet::report_json() const {
  nlohmann::json j;
  j["phase_count"] = phase_count;
  j["slots_per_phase"] = n_slots;
  auto phases = nlohmann::json::array();
  for (int p = 0; p < phase_count; ++p) {
    int arms = 0, filled = 0;
    for (const auto& slot : slots[p]) {
      arms += static_cast<int>(slot.size());
      filled += !slot.empty();
    }
    phases.push_back({{"phase", p},
                      {"arm_count", arms},
                      {"filled_slots", filled},
                      {"completeness", completeness[p]},
                      {"missing_orientations", missing_orientations[p]}});
  }
  j["phases"] = phases;
  return j.dump(2);
}

SegmentedImages bin_segmented(const RawAcquisition& raw, const traj::Trajectory& tr,
                              const std::vector<double>& boundaries_ms, int phase_count,
                              int grid_size, bool require_complete, int threads) {
  SegmentedImages out;
  out.set = assign_phases(raw, tr, boundaries_ms, phase_count);
  const auto& s = out.set;
  if (require_complete) {
    for (int p = 0; p < phase_count; ++p) {
      if (s.completeness[p] >= 1.0) continue;
      std::ostringstream m;
      m << "gating: phase " << p << " is incomplete (completeness " << s.completeness[p]
        << "); missing orientations:";
      for (int o : s.missing_orientations[p]) m << ' ' << o;
      fail(ErrorCode::InsufficientData, m.str());
    }
  }

  const int ns = raw.samples_per_arm;
  const int total_arms = s.n_slots;
  const auto w_arm = traj::density_weights(tr.arm(0, 0), total_arms);
  const double scale = 1.0 / (static_cast<double>(grid_size) * grid_size);

  out.coil_images.assign(phase_count, std::vector<CImage>(raw.n_coils));
  parallel_for(phase_count, threads, [&](int p) {
    std::vector<KPoint> pos;
    std::vector<double> w;
    std::vector<int> used;
    for (int slot = 0; slot < total_arms; ++slot) {
      if (s.slots[p][slot].empty()) continue;
      used.push_back(slot);
      const auto arm = tr.arm(slot / tr.arms_per_frame, slot % tr.arms_per_frame);
      pos.insert(pos.end(), arm.begin(), arm.end());
      w.insert(w.end(), w_arm.begin(), w_arm.end());
    }
    if (used.empty()) {
      for (auto& im : out.coil_images[p]) im = CImage(grid_size, grid_size);
      return;
    }
    const nufft::GriddingPlan plan(pos, grid_size);
    std::vector<cplx> d(pos.size());
    for (int c = 0; c < raw.n_coils; ++c) {
      std::fill(d.begin(), d.end(), cplx{});
      for (std::size_t u = 0; u < used.size(); ++u) {
        const auto& refs = s.slots[p][used[u]];
        for (const auto& r : refs) {
          const auto src = raw.arm(r.frame, c, r.arm);
          for (int i = 0; i < ns; ++i) d[u * ns + i] += src[i];
        }
        for (int i = 0; i < ns; ++i) d[u * ns + i] /= static_cast<double>(refs.size());
      }
      CImage img = plan.adjoint(d, std::span<const double>(w));
      for (auto& v : img.data) v *= scale;
      out.coil_images[p][c] = std::move(img);
    }
  });
  return out;
}

}  // namespace spiralrt::gating
