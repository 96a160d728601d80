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

#include "spiralrt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <memory>
#include <sstream>
#include <thread>

#include "spiralrt/nufft.hpp"

namespace spiralrt::phantom {

namespace {

// Body outline and heart placement as fractions of the FOV.
constexpr double kBodySemiX = 0.46;
constexpr double kBodySemiY = 0.40;
constexpr double kFatRing = 0.035;
constexpr double kHeartOffsetX = -0.10;
// RV circle relative to the LV epicardial semi-axis.
constexpr double kRvOffset = 0.75;
constexpr double kRvRadius = 1.25;

struct SliceGeometry {
  double cx, cy;      // heart centre, mm
  double a, b;        // endocardial semi-axes, mm
  double a_out, b_out;
};

double wall_area_per_aspect(const PhantomConfig& c) {
  // Annulus area divided by pi * aspect, fixed over the cycle.
  const double r = c.lv_radius_ed_mm;
  const double ro = r + c.wall_thickness_ed_mm;
  return ro * ro - r * r;
}

double slice_scale(const PhantomConfig& c, int slice) {
  if (c.n_slices <= 1) return 1.0;
  return 1.0 - (1.0 - c.apex_scale) * slice / (c.n_slices - 1);
}

double breathing_period(const PhantomConfig& c) {
  return c.breathing_period_ms > 0.0 ? c.breathing_period_ms : 10.0 * c.heart_period_ms;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    s += k[i + r];
  }
  for (auto& v : k) v /= s;
  return k;
}

RImage blur(const RImage& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  RImage tmp(in.height, in.width), out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) {
        const int xx = x + j;
        if (xx >= 0 && xx < in.width) s += k[j + r] * in(y, xx);
      }
      tmp(y, x) = s;
    }
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int j = -r; j <= r; ++j) {
        const int yy = y + j;
        if (yy >= 0 && yy < in.height) s += k[j + r] * tmp(yy, x);
      }
      out(y, x) = s;
    }
  return out;
}

// Pixel centre in mm relative to the FOV centre (integer lattice, index N/2 at 0).
double pixel_mm(int i, const PhantomConfig& c) {
  return (i - c.grid_size / 2) * c.pixel_size_mm;
}

void render(const PhantomConfig& c, const SliceGeometry& g, LabelImage& mask, RImage& img,
            int& lv_count) {
  const int n = c.grid_size;
  const double px_area = c.pixel_size_mm * c.pixel_size_mm;
  const std::size_t total = static_cast<std::size_t>(n) * n;

  // Same centre and aspect for both contours, so one ranking serves both.
  std::vector<double> rho(total);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double dx = (pixel_mm(x, c) - g.cx) / g.a;
      const double dy = (pixel_mm(y, c) - g.cy) / g.b;
      rho[static_cast<std::size_t>(y) * n + x] = dx * dx + dy * dy;
    }
  const auto n_in = static_cast<std::size_t>(std::llround(kPi * g.a * g.b / px_area));
  const auto n_out = static_cast<std::size_t>(std::llround(kPi * g.a_out * g.b_out / px_area));
  require(n_out < total, ErrorCode::InvalidArgument, "phantom: heart exceeds grid");
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_out), order.end(),
                    [&](std::uint32_t i, std::uint32_t j) {
                      return rho[i] < rho[j] || (rho[i] == rho[j] && i < j);
                    });

  mask = LabelImage(n, n, kBackground);
  for (std::size_t i = 0; i < n_out; ++i)
    mask.data[order[i]] = i < n_in ? kLeftVentricle : kMyocardium;
  lv_count = static_cast<int>(n_in);

  const double rv_cx = g.cx + kRvOffset * g.a_out;
  const double rv_r2 = (kRvRadius * g.a_out) * (kRvRadius * g.a_out);
  const double fov = c.fov_mm();
  const double bx = kBodySemiX * fov, by = kBodySemiY * fov;
  const double ix = bx - kFatRing * fov, iy = by - kFatRing * fov;
  img = RImage(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double px = pixel_mm(x, c), py = pixel_mm(y, c);
      std::uint8_t& lab = mask(y, x);
      if (lab == kBackground) {
        const double ddx = px - rv_cx, ddy = py - g.cy;
        if (ddx * ddx + ddy * ddy <= rv_r2) lab = kRightVentricle;
      }
      double v;
      switch (lab) {
        case kLeftVentricle:
        case kRightVentricle: v = c.intensity.blood; break;
        case kMyocardium: v = c.intensity.myocardium; break;
        default: {
          const double outer = (px / bx) * (px / bx) + (py / by) * (py / by);
          const double inner = (px / ix) * (px / ix) + (py / iy) * (py / iy);
          v = inner <= 1.0 ? c.intensity.chest_wall
              : outer <= 1.0 ? c.intensity.fat
                             : c.intensity.background;
        }
      }
      img(y, x) = v;
    }
  img = blur(img, c.edge_blur_px);
}

}  // namespace

void PhantomConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::InvalidArgument, "phantom: " + m); };
  if (grid_size < 16 || grid_size % 2) bad("grid_size must be even and >= 16");
  if (!(pixel_size_mm > 0.0)) bad("pixel_size must be positive");
  if (n_slices < 1) bad("n_slices must be >= 1");
  if (!(slice_thickness_mm > 0.0)) bad("slice_thickness must be positive");
  if (n_frames < 1) bad("n_frames must be >= 1");
  if (!(frame_dt_ms > 0.0)) bad("frame_dt must be positive");
  if (!(heart_period_ms >= 2.0 * frame_dt_ms)) bad("heart_period must be >= 2 * frame_dt");
  if (!(lv_radius_es_mm > 0.0)) bad("lv_radius_es must be positive");
  if (!(lv_radius_es_mm <= lv_radius_ed_mm)) bad("lv_radius_es must not exceed lv_radius_ed");
  if (!(lv_radius_ed_mm < 0.5 * fov_mm())) bad("lv_radius_ed exceeds half the grid extent");
  if (!(es_phase > 0.0 && es_phase < 1.0)) bad("es_phase must lie in (0, 1)");
  if (!(arrhythmia_jitter >= 0.0 && arrhythmia_jitter < 0.5)) bad("arrhythmia_jitter must lie in [0, 0.5)");
  if (!(breathing_amplitude_mm >= 0.0)) bad("breathing_amplitude must be >= 0");
  if (breathing_period_ms != 0.0 && !(breathing_period_ms >= 10.0 * heart_period_ms))
    bad("breathing_period must be >= 10 heart periods");
  if (!(wall_thickness_ed_mm > 0.0)) bad("wall_thickness must be positive");
  if (!(lv_aspect > 0.0 && lv_aspect <= 1.0)) bad("lv_aspect must lie in (0, 1]");
  if (!(apex_scale > 0.0 && apex_scale <= 1.0)) bad("apex_scale must lie in (0, 1]");
  if (!(edge_blur_px >= 0.0)) bad("edge_blur must be >= 0");

  // Largest heart footprint (ED, basal slice, full breathing excursion) must
  // stay inside the chest wall. Checked on sampled outlines of the
  // epicardium and the RV circle.
  const double fov = fov_mm();
  const double a_out = std::sqrt(lv_radius_ed_mm * lv_radius_ed_mm + wall_area_per_aspect(*this));
  const double cx = kHeartOffsetX * fov;
  const double ix = (kBodySemiX - kFatRing) * fov, iy = (kBodySemiY - kFatRing) * fov;
  double worst = 0.0;
  for (int i = 0; i < 360; ++i) {
    const double t = 2.0 * kPi * i / 360.0;
    const double pts[2][2] = {
        {cx + a_out * std::cos(t), a_out * lv_aspect * std::sin(t)},
        {cx + kRvOffset * a_out + kRvRadius * a_out * std::cos(t), kRvRadius * a_out * std::sin(t)}};
    for (const auto& q : pts)
      for (double sgn : {-1.0, 1.0}) {
        const double y = q[1] + sgn * breathing_amplitude_mm;
        worst = std::max(worst, (q[0] / ix) * (q[0] / ix) + (y / iy) * (y / iy));
      }
  }
  if (worst > 1.0) {
    std::ostringstream m;
    m << "heart geometry exceeds the body support (outline reaches " << std::sqrt(worst)
      << " of the chest-wall radius)";
    bad(m.str());
  }
}

double lv_radius_at_phase(const PhantomConfig& c, double phase) {
  phase -= std::floor(phase);
  const double d = c.lv_radius_ed_mm - c.lv_radius_es_mm;
  if (phase <= c.es_phase)
    return c.lv_radius_es_mm + d * 0.5 * (1.0 + std::cos(kPi * phase / c.es_phase));
  return c.lv_radius_es_mm +
         d * 0.5 * (1.0 - std::cos(kPi * (phase - c.es_phase) / (1.0 - c.es_phase)));
}

CardiacState cardiac_state(const DynamicPhantom& p, double t) {
  const auto& s = p.cycle_start_ms;
  require(!s.empty(), ErrorCode::InvalidArgument, "phantom: no cycles");
  auto it = std::upper_bound(s.begin(), s.end(), t);
  int i = static_cast<int>(it - s.begin()) - 1;
  i = std::clamp(i, 0, static_cast<int>(s.size()) - 1);
  CardiacState st;
  st.cycle = i;
  st.phase = (t - s[i]) / p.cycle_length_ms[i];
  st.phase -= std::floor(st.phase);
  return st;
}

double DynamicPhantom::lv_area_mm2(int frame, int slice) const {
  const double r = lv_radius_at_phase(config, cardiac_state(*this, frame_times_ms[frame]).phase) *
                   slice_scale(config, slice);
  return kPi * r * r * config.lv_aspect;
}

DynamicPhantom generate_phantom(const PhantomConfig& config) {
  config.validate();
  const PhantomConfig& c = config;
  DynamicPhantom p;
  p.config = c;

  // Frame times at the centre of each acquisition window.
  p.frame_times_ms.resize(c.n_frames);
  for (int f = 0; f < c.n_frames; ++f) p.frame_times_ms[f] = (f + 0.5) * c.frame_dt_ms;
  const double t_end = c.n_frames * c.frame_dt_ms;

  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto next_length = [&] { return c.heart_period_ms * (1.0 + c.arrhythmia_jitter * uni(rng)); };
  double len = next_length();
  double start = -c.start_phase * len;
  while (start <= t_end) {
    p.cycle_start_ms.push_back(start);
    p.cycle_length_ms.push_back(len);
    start += len;
    len = next_length();
  }
  for (double s : p.cycle_start_ms) {
    if (s < 0.0) continue;
    const int f = static_cast<int>(std::lround(s / c.frame_dt_ms - 0.5));
    if (f >= 0 && f < c.n_frames) p.cycle_boundaries.push_back(f);
  }

  const double wall = wall_area_per_aspect(c);
  const double fov = c.fov_mm();
  const double px_area = c.pixel_size_mm * c.pixel_size_mm;
  const std::size_t count = static_cast<std::size_t>(c.n_frames) * c.n_slices;
  p.images.resize(count);
  p.masks.resize(count);
  p.true_volume_ml.assign(c.n_frames, 0.0);
  std::vector<int> lv_counts(count);

  parallel_for(static_cast<int>(count), static_cast<int>(std::max(1u, std::thread::hardware_concurrency())), [&](int idx) {
    const int f = idx / c.n_slices, s = idx % c.n_slices;
    const double t = p.frame_times_ms[f];
    const double r = lv_radius_at_phase(c, cardiac_state(p, t).phase);
    const double sc = slice_scale(c, s);
    SliceGeometry g;
    g.cx = kHeartOffsetX * fov;
    g.cy = c.breathing_amplitude_mm * std::sin(2.0 * kPi * t / breathing_period(c));
    g.a = sc * r;
    g.b = g.a * c.lv_aspect;
    g.a_out = sc * std::sqrt(r * r + wall);
    g.b_out = g.a_out * c.lv_aspect;
    RImage img;
    render(c, g, p.masks[idx], img, lv_counts[idx]);
    Image<float> out(img.height, img.width);
    for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = static_cast<float>(img.data[i]);
    p.images[idx] = std::move(out);
  });

  for (std::size_t idx = 0; idx < count; ++idx)
    p.true_volume_ml[idx / c.n_slices] += lv_counts[idx] * px_area * c.slice_thickness_mm / 1000.0;

  double sum_s2 = 0.0;
  for (int s = 0; s < c.n_slices; ++s) sum_s2 += slice_scale(c, s) * slice_scale(c, s);
  const double k = kPi * c.lv_aspect * sum_s2 * c.slice_thickness_mm / 1000.0;
  p.edv_ml = k * c.lv_radius_ed_mm * c.lv_radius_ed_mm;
  p.esv_ml = k * c.lv_radius_es_mm * c.lv_radius_es_mm;
  return p;
}

CoilSet generate_coils(int n_coils, int grid_size, std::uint64_t seed, bool unit_single) {
  require(n_coils >= 1, ErrorCode::InvalidArgument, "coils: n_coils must be >= 1");
  require(grid_size >= 2, ErrorCode::InvalidArgument, "coils: grid_size must be >= 2");
  CoilSet set;
  set.n_coils = n_coils;
  const int n = grid_size;
  if (n_coils == 1 && unit_single) {
    set.maps.emplace_back(n, n, cplx(1.0, 0.0));
    return set;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int c = 0; c < n_coils; ++c) {
    const double ang = 2.0 * kPi * (c + 0.4 * (uni(rng) - 0.5)) / n_coils;
    // Lobe centre on the grid border along direction `ang`.
    const double reach = 0.5 * n / std::max(std::abs(std::cos(ang)), std::abs(std::sin(ang)));
    const double cx = reach * std::cos(ang), cy = reach * std::sin(ang);
    const double sigma = 0.55 * n * (0.9 + 0.2 * uni(rng));
    const double phi0 = 2.0 * kPi * uni(rng);
    const double gx = (2.0 * uni(rng) - 1.0) * 0.25 * kPi / n;
    const double gy = (2.0 * uni(rng) - 1.0) * 0.25 * kPi / n;
    CImage m(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double px = x - n / 2, py = y - n / 2;
        const double d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
        m(y, x) = std::exp(-0.5 * d2 / (sigma * sigma)) * std::polar(1.0, phi0 + gx * px + gy * py);
      }
    set.maps.push_back(std::move(m));
  }
  return set;
}

RImage root_sum_of_squares(const std::vector<CImage>& maps) {
  require(!maps.empty(), ErrorCode::InvalidArgument, "rss: no maps");
  RImage out(maps[0].height, maps[0].width);
  for (const auto& m : maps) {
    require(m.same_shape(maps[0]), ErrorCode::ShapeMismatch, "rss: map shapes differ");
    for (std::size_t i = 0; i < m.size(); ++i) out.data[i] += std::norm(m.data[i]);
  }
  for (auto& v : out.data) v = std::sqrt(v);
  return out;
}

CoilSet normalize_rss(const CoilSet& coils) {
  const RImage rss = root_sum_of_squares(coils.maps);
  CoilSet out = coils;
  for (auto& m : out.maps)
    for (std::size_t i = 0; i < m.size(); ++i)
      m.data[i] = rss.data[i] > 0.0 ? m.data[i] / rss.data[i] : cplx{};
  return out;
}

double max_second_difference(const CImage& m) {
  double worst = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 1; x + 1 < m.width; ++x)
      worst = std::max(worst, std::abs(m(y, x - 1) - 2.0 * m(y, x) + m(y, x + 1)));
  for (int y = 1; y + 1 < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      worst = std::max(worst, std::abs(m(y - 1, x) - 2.0 * m(y, x) + m(y + 1, x)));
  return worst;
}

RawAcquisition simulate_kspace(const std::vector<CImage>& frames, double frame_dt_ms,
                               const CoilSet& coils, const traj::Trajectory& trajectory,
                               double noise_sigma, std::uint64_t seed, int threads) {
  require(!frames.empty(), ErrorCode::InvalidArgument, "simulate: no frames");
  require(coils.n_coils >= 1 && static_cast<int>(coils.maps.size()) == coils.n_coils,
          ErrorCode::InvalidArgument, "simulate: inconsistent coil set");
  require(noise_sigma >= 0.0, ErrorCode::InvalidArgument, "simulate: noise_sigma must be >= 0");
  const int n = frames[0].height;
  for (const auto& f : frames)
    require(f.height == n && f.width == n, ErrorCode::ShapeMismatch,
            "simulate: frames must be square and equally sized");
  for (const auto& m : coils.maps)
    require(m.height == n && m.width == n, ErrorCode::ShapeMismatch,
            "simulate: coil map size differs from image grid");
  require(trajectory.arms_per_frame > 0 && trajectory.samples_per_arm > 0,
          ErrorCode::InvalidArgument, "simulate: empty trajectory");
  // Relative slack covers trajectories stored at float precision.
  require(trajectory.k_max() <= 0.5 * n * (1.0 + 1e-6), ErrorCode::ShapeMismatch,
          "simulate: trajectory k_max exceeds the image grid Nyquist limit");

  RawAcquisition raw;
  raw.n_frames = static_cast<int>(frames.size());
  raw.n_coils = coils.n_coils;
  raw.arms_per_frame = trajectory.arms_per_frame;
  raw.samples_per_arm = trajectory.samples_per_arm;
  raw.dwell_us = trajectory.dwell_us;
  raw.frame_dt_ms = frame_dt_ms;
  raw.allocate();

  std::vector<std::unique_ptr<nufft::GriddingPlan>> plans(trajectory.n_orientations);
  for (int f = 0; f < raw.n_frames; ++f) {
    const int o = trajectory.orientation_of_frame(f);
    if (!plans[o]) {
      const auto pos = trajectory.orientation_samples(o);
      plans[o] = std::make_unique<nufft::GriddingPlan>(pos, n);
    }
  }
  parallel_for(raw.n_frames * raw.n_coils, threads, [&](int idx) {
    const int f = idx / raw.n_coils, c = idx % raw.n_coils;
    CImage weighted(n, n);
    const auto& img = frames[f];
    const auto& map = coils.maps[c];
    for (std::size_t i = 0; i < weighted.size(); ++i) weighted.data[i] = img.data[i] * map.data[i];
    const auto samples = plans[trajectory.orientation_of_frame(f)]->forward(weighted);
    std::copy(samples.begin(), samples.end(), raw.frame_coil(f, c).begin());
  });

  if (noise_sigma > 0.0) {
    double mean_abs = 0.0;
    for (const auto& z : raw.data) mean_abs += std::abs(z);
    mean_abs /= static_cast<double>(raw.data.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, noise_sigma * mean_abs / std::sqrt(2.0));
    for (auto& z : raw.data) {
      const double re = g(rng);
      const double im = g(rng);
      z += cplx(re, im);
    }
  }
  return raw;
}

RawAcquisition simulate_kspace(const DynamicPhantom& phantom, int slice, const CoilSet& coils,
                               const traj::Trajectory& trajectory, double noise_sigma,
                               std::uint64_t seed, int threads) {
  const auto& c = phantom.config;
  require(slice >= 0 && slice < c.n_slices, ErrorCode::InvalidArgument,
          "simulate: slice index out of range");
  require(std::abs(trajectory.fov_mm - c.fov_mm()) <= 1e-6 * c.fov_mm(), ErrorCode::ShapeMismatch,
          "simulate: trajectory FOV " + std::to_string(trajectory.fov_mm) +
              " mm does not match phantom FOV " + std::to_string(c.fov_mm()) + " mm");
  std::vector<CImage> frames;
  frames.reserve(c.n_frames);
  for (int f = 0; f < c.n_frames; ++f) {
    const auto& im = phantom.image(f, slice);
    CImage z(im.height, im.width);
    for (std::size_t i = 0; i < im.size(); ++i) z.data[i] = im.data[i];
    frames.push_back(std::move(z));
  }
  return simulate_kspace(frames, c.frame_dt_ms, coils, trajectory, noise_sigma, seed, threads);
}

}  // namespace spiralrt::phantom
