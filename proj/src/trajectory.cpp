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

#include "spiralrt/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spiralrt/fft.hpp"

namespace spiralrt::traj {
namespace {

KPoint rotate(const KPoint& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {p.kx * c - p.ky * s, p.kx * s + p.ky * c};
}

double slew_law(const SpiralShape& s, double u) {
  if (u <= 0.0) return 0.0;
  return 0.5 * s.beta * u * u / (s.ramp + s.beta / (2.0 * s.a) * std::pow(u, 4.0 / 3.0));
}

double warp(const SpiralShape& s, double u) {
  if (u <= 0.0) return 0.0;
  return u * u * u / (u * u + s.onset * s.onset);
}

double unwarp(const SpiralShape& s, double v) {
  double lo = 0.0, hi = v + 2.0 * s.onset + 1e-12;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (warp(s, mid) < v ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Warped time at which theta reaches target; theta is monotone in v.
double solve_time(const SpiralShape& s, double target) {
  if (std::isfinite(s.t_switch) && target >= s.theta_switch)
    return s.t_switch + (target * target - s.theta_switch * s.theta_switch) / (2.0 * s.speed);
  double lo = 0.0, hi = 1e-4;
  while (slew_law(s, hi) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (slew_law(s, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

KPoint k_at(const SpiralShape& s, double t) {
  const double th = s.theta(t);
  return {s.lambda * th * std::cos(th), s.lambda * th * std::sin(th)};
}

// Peak |dk/dt| / gamma and |d2k/dt2| / gamma of the continuous law (T/m, T/m/s).
std::pair<double, double> continuous_limits(const SpiralShape& s, double t_end) {
  const int n = 20000;
  const double h = t_end / n;
  double gmax = 0.0, smax = 0.0;
  KPoint prev = k_at(s, 0.0);
  double pgx = 0.0, pgy = 0.0;
  for (int i = 1; i <= n; ++i) {
    const KPoint cur = k_at(s, i * h);
    const double gx = (cur.kx - prev.kx) / h / kGammaHzPerT;
    const double gy = (cur.ky - prev.ky) / h / kGammaHzPerT;
    gmax = std::max(gmax, std::hypot(gx, gy));
    smax = std::max(smax, std::hypot(gx - pgx, gy - pgy) / h);
    pgx = gx;
    pgy = gy;
    prev = cur;
  }
  return {gmax, smax};
}

// Rewinder for one axis, sampled at the dwell time: a cubic Hermite segment
// brings (g, dg/dt) from their end-of-readout values to zero, then a sin^2
// lobe nulls the zeroth moment. Both pieces join with continuous slope.
struct AxisEnd {
  double g;      // T/m
  double slope;  // T/m/s
  double k;      // cycles/m
};

std::vector<double> hermite_ramp(const AxisEnd& e, int samples, double dwell_s) {
  std::vector<double> out(samples);
  const double duration = samples * dwell_s;
  for (int j = 1; j <= samples; ++j) {
    const double x = static_cast<double>(j) / samples;
    const double h00 = 2 * x * x * x - 3 * x * x + 1;
    const double h10 = x * x * x - 2 * x * x + x;
    out[j - 1] = h00 * e.g + h10 * duration * e.slope;
  }
  return out;
}

bool within_limits(std::span<const double> w, double first, double dwell_s, double gmax,
                   double slew) {
  double prev = first;
  for (double v : w) {
    if (std::abs(v) > gmax * (1 + 1e-9) || std::abs(v - prev) / dwell_s > slew * (1 + 1e-9))
      return false;
    prev = v;
  }
  return true;
}

std::vector<KPoint> design_rewinder(const AxisEnd& ex, const AxisEnd& ey, double dwell_s,
                                    double gmax, double slew) {
  int ramp = 2;
  while (!(within_limits(hermite_ramp(ex, ramp, dwell_s), ex.g, dwell_s, gmax, slew) &&
           within_limits(hermite_ramp(ey, ramp, dwell_s), ey.g, dwell_s, gmax, slew)))
    ++ramp;
  const auto rx = hermite_ramp(ex, ramp, dwell_s);
  const auto ry = hermite_ramp(ey, ramp, dwell_s);
  const double unit = kGammaHzPerT * dwell_s;
  double need_x = -ex.k / unit, need_y = -ey.k / unit;  // remaining area, T/m * samples
  for (int j = 0; j < ramp; ++j) {
    need_x -= rx[j];
    need_y -= ry[j];
  }
  // sin^2 lobe of L samples has area ~ h L / 2 and peak slope ~ pi h / (L dwell).
  const double area = std::max(std::abs(need_x), std::abs(need_y));
  int lobe = 4;
  while (2.0 * area / lobe > gmax || 2.0 * kPi * area / (lobe * lobe * dwell_s) > slew) ++lobe;
  std::vector<double> shape(lobe + 1);
  double shape_area = 0.0;
  for (int j = 0; j <= lobe; ++j) {
    const double v = std::sin(kPi * j / lobe);
    shape[j] = v * v;
    shape_area += shape[j];
  }
  std::vector<KPoint> out;
  for (int j = 0; j < ramp; ++j) out.push_back({rx[j] * 1e3, ry[j] * 1e3});
  for (int j = 1; j <= lobe; ++j)
    out.push_back({need_x / shape_area * shape[j] * 1e3, need_y / shape_area * shape[j] * 1e3});
  return out;
}

}  // namespace

double SpiralShape::theta(double t_seconds) const {
  const double u = warp(*this, t_seconds / time_scale);
  if (u <= 0.0) return 0.0;
  if (u <= t_switch) return slew_law(*this, u);
  return std::sqrt(theta_switch * theta_switch + 2.0 * speed * (u - t_switch));
}

std::vector<KPoint> integrate_gradient(std::span<const KPoint> gradient_mt_m, double dwell_us) {
  const double scale = kGammaHzPerT * 1e-3 * dwell_us * 1e-6;
  std::vector<KPoint> k(gradient_mt_m.size());
  double kx = 0.0, ky = 0.0;
  for (std::size_t i = 0; i < gradient_mt_m.size(); ++i) {
    kx += gradient_mt_m[i].kx * scale;
    ky += gradient_mt_m[i].ky * scale;
    k[i] = {kx, ky};
  }
  return k;
}

double peak_gradient(std::span<const KPoint> g) {
  double m = 0.0;
  for (const auto& p : g) m = std::max(m, std::hypot(p.kx, p.ky));
  return m;
}

double peak_slew(std::span<const KPoint> g, double dwell_us) {
  double m = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i)
    m = std::max(m, std::hypot(g[i].kx - g[i - 1].kx, g[i].ky - g[i - 1].ky));
  return m * 1e-3 / (dwell_us * 1e-6);
}

double InterleaveSet::k_max() const { return 1.0 / (2.0 * params.resolution_mm * 1e-3); }

std::vector<KPoint> InterleaveSet::rotated(double angle) const {
  std::vector<KPoint> out(base_arm.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rotate(base_arm.samples[i], angle);
  return out;
}

KPoint InterleaveSet::analytic_k(double t_seconds) const { return k_at(shape, t_seconds); }

int InterleaveSet::nyquist_arms(double fov_mm) const {
  const double needed = 2.0 * kPi * shape.lambda * fov_mm * 1e-3;
  return static_cast<int>(std::ceil(needed - 1e-9));
}

double InterleaveSet::readout_us() const {
  return base_arm.samples.empty() ? 0.0
                                  : (base_arm.samples.size() - 1) * base_arm.dwell_us;
}

InterleaveSet design_spiral(const SpiralParams& p) {
  require(p.resolution_mm > 0.0, ErrorCode::InvalidArgument,
          "design_spiral: resolution must be positive");
  require(p.fov_mm >= p.resolution_mm, ErrorCode::InvalidArgument,
          "design_spiral: fov must be >= resolution");
  require(p.n_arms >= 1, ErrorCode::InvalidArgument, "design_spiral: n_arms must be >= 1");
  require(p.max_gradient_mt_m > 0.0 && p.max_slew_t_m_s > 0.0 && p.dwell_us > 0.0,
          ErrorCode::InvalidArgument, "design_spiral: hardware limits must be positive");

  InterleaveSet set;
  set.params = p;
  set.n_arms = p.n_arms;
  for (int j = 0; j < p.n_arms; ++j) set.angles.push_back(2.0 * kPi * j / p.n_arms);

  const double gmax = p.max_gradient_mt_m * 1e-3;  // T/m
  const double smax = p.max_slew_t_m_s;
  SpiralShape& s = set.shape;
  s.lambda = p.n_arms / (2.0 * kPi * p.fov_mm * 1e-3);
  s.beta = kGammaHzPerT * smax / s.lambda;
  s.a = std::cbrt(9.0 * s.beta / 4.0);
  s.speed = kGammaHzPerT * gmax / s.lambda;
  s.theta_max = set.k_max() / s.lambda;
  s.onset = 8.0 * p.dwell_us * 1e-6;

  // First time where lambda * theta * theta' reaches the amplitude limit.
  s.t_switch = std::numeric_limits<double>::infinity();
  {
    const double h = 1e-7;
    double u = h;
    while (true) {
      const double th = slew_law(s, u);
      if (th >= s.theta_max) break;
      const double dth = (slew_law(s, u + h) - slew_law(s, u - h)) / (2.0 * h);
      if (th * dth >= s.speed) {
        s.t_switch = u;
        s.theta_switch = th;
        break;
      }
      u += h;
    }
  }

  const double u_end = unwarp(s, solve_time(s, s.theta_max));
  for (int it = 0; it < 20; ++it) {
    const auto [g, sl] = continuous_limits(s, u_end * s.time_scale);
    const double stretch = std::max(g / gmax, std::sqrt(sl / smax));
    if (stretch <= 1.0) break;
    s.time_scale *= stretch * (1.0 + 1e-6);
  }
  const double dwell = p.dwell_us * 1e-6;
  const auto n_intervals = static_cast<long>(std::ceil(u_end * s.time_scale / dwell - 1e-9));
  s.time_scale = n_intervals * dwell / u_end;
  const double readout_us = n_intervals * p.dwell_us;
  if (readout_us > p.max_readout_us) {
    std::ostringstream msg;
    msg << "design_spiral: infeasible limits, reaching k_max needs " << readout_us
        << " us of readout but max_readout_us is " << p.max_readout_us;
    fail(ErrorCode::InvalidArgument, msg.str());
  }

  SpiralArm& arm = set.base_arm;
  arm.dwell_us = p.dwell_us;
  const double to_mt = 1e3 / (kGammaHzPerT * dwell);
  arm.gradient.resize(n_intervals + 1);
  KPoint prev{0.0, 0.0};
  for (long i = 1; i <= n_intervals; ++i) {
    const KPoint cur = (i == n_intervals) ? KPoint{s.lambda * s.theta_max * std::cos(s.theta_max),
                                                   s.lambda * s.theta_max * std::sin(s.theta_max)}
                                          : k_at(s, i * dwell);
    arm.gradient[i] = {(cur.kx - prev.kx) * to_mt, (cur.ky - prev.ky) * to_mt};
    prev = cur;
  }
  arm.samples = integrate_gradient(arm.gradient, p.dwell_us);

  const std::size_t last = arm.gradient.size() - 1;
  const auto& g = arm.gradient;
  const AxisEnd ex{g[last].kx * 1e-3, (g[last].kx - g[last - 1].kx) * 1e-3 / dwell,
                   arm.samples.back().kx};
  const AxisEnd ey{g[last].ky * 1e-3, (g[last].ky - g[last - 1].ky) * 1e-3 / dwell,
                   arm.samples.back().ky};
  arm.rewinder = design_rewinder(ex, ey, dwell, gmax, smax);
  return set;
}

int RotationSchedule::orientation_of_frame(int frame) const {
  return (frame / std::max(frames_per_orientation, 1)) % n_orientations;
}

std::vector<double> RotationSchedule::all_angles() const {
  std::vector<double> out;
  for (double off : offsets)
    for (int j = 0; j < n_arms; ++j) out.push_back(off + 2.0 * kPi * j / n_arms);
  return out;
}

RotationSchedule build_schedule(const InterleaveSet& interleaves, int n_orientations,
                                int frames_per_orientation) {
  require(n_orientations >= 1, ErrorCode::InvalidArgument,
          "build_schedule: n_orientations must be >= 1");
  require(frames_per_orientation >= 1, ErrorCode::InvalidArgument,
          "build_schedule: frames_per_orientation must be >= 1");
  RotationSchedule sched;
  sched.n_arms = interleaves.n_arms;
  sched.n_orientations = n_orientations;
  sched.frames_per_orientation = frames_per_orientation;

  // The union is invariant under rotation by one arm spacing, so the search
  // reduces to gaps between offsets on the circle [0, spacing).
  const double spacing = 2.0 * kPi / interleaves.n_arms;
  std::vector<double> used{0.0};
  sched.offsets.push_back(0.0);
  for (int o = 1; o < n_orientations; ++o) {
    std::vector<double> sorted = used;
    std::sort(sorted.begin(), sorted.end());
    double best_gap = -1.0, best_mid = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double lo = sorted[i];
      const double hi = (i + 1 < sorted.size()) ? sorted[i + 1] : sorted[0] + spacing;
      const double gap = hi - lo;
      double mid = lo + 0.5 * gap;
      if (mid >= spacing) mid -= spacing;
      const double tol = 1e-12 * spacing;
      if (gap > best_gap + tol || (std::abs(gap - best_gap) <= tol && mid < best_mid)) {
        best_gap = gap;
        best_mid = mid;
      }
    }
    used.push_back(best_mid);
    sched.offsets.push_back(best_mid);
  }
  return sched;
}

GstfModel::GstfModel(std::vector<double> freq_hz, std::vector<cplx> response_x,
                     std::vector<cplx> response_y, double delay_us)
    : freq_(std::move(freq_hz)),
      hx_(std::move(response_x)),
      hy_(std::move(response_y)),
      delay_us_(delay_us) {
  require(freq_.size() >= 2 && hx_.size() == freq_.size() && hy_.size() == freq_.size(),
          ErrorCode::InvalidArgument, "GstfModel: response must match the frequency grid");
  require(freq_.front() == 0.0, ErrorCode::InvalidArgument,
          "GstfModel: frequency grid must start at 0 Hz");
  for (std::size_t i = 1; i < freq_.size(); ++i)
    require(freq_[i] > freq_[i - 1], ErrorCode::InvalidArgument,
            "GstfModel: frequency grid must be strictly increasing");
  for (std::size_t i = 0; i < freq_.size(); ++i)
    require(std::abs(hx_[i]) <= 1.0 + 1e-6 && std::abs(hy_[i]) <= 1.0 + 1e-6,
            ErrorCode::InvalidArgument, "GstfModel: |H| exceeds 1 (non-passive model)");
}

GstfModel GstfModel::identity(double max_freq_hz, double delay_us) {
  return GstfModel({0.0, max_freq_hz}, {1.0, 1.0}, {1.0, 1.0}, delay_us);
}

GstfModel GstfModel::low_pass(double cutoff_hz, double max_freq_hz, double delay_us,
                              int n_points) {
  std::vector<double> f(n_points);
  std::vector<cplx> h(n_points);
  for (int i = 0; i < n_points; ++i) {
    f[i] = max_freq_hz * i / (n_points - 1);
    h[i] = 1.0 / cplx(1.0, f[i] / cutoff_hz);
  }
  return GstfModel(f, h, h, delay_us);
}

cplx GstfModel::response(int axis, double f_hz) const {
  const auto& h = axis == 0 ? hx_ : hy_;
  const double af = std::abs(f_hz);
  require(af <= freq_.back() * (1.0 + 1e-12), ErrorCode::InvalidArgument,
          "GstfModel: frequency outside the model grid");
  const auto it = std::upper_bound(freq_.begin(), freq_.end(), af);
  cplx v;
  if (it == freq_.end()) {
    v = h.back();
  } else {
    const std::size_t i = static_cast<std::size_t>(it - freq_.begin()) - 1;
    const double t = (af - freq_[i]) / (freq_[i + 1] - freq_[i]);
    v = h[i] * (1.0 - t) + h[i + 1] * t;
  }
  return f_hz < 0.0 ? std::conj(v) : v;
}

SpiralArm gstf_correct(const SpiralArm& arm, const GstfModel& model) {
  require(!arm.gradient.empty(), ErrorCode::InvalidArgument,
          "gstf_correct: arm has no gradient waveform");
  const std::size_t n_read = arm.gradient.size();
  const std::size_t total = n_read + arm.rewinder.size();
  std::size_t padded = 1;
  while (padded < 2 * total) padded <<= 1;
  const double dwell = arm.dwell_us * 1e-6;
  const double nyquist = 0.5 / dwell;
  if (nyquist > model.max_freq_hz() * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "gstf_correct: model grid ends at " << model.max_freq_hz()
        << " Hz but the waveform needs up to " << nyquist << " Hz";
    fail(ErrorCode::InvalidArgument, msg.str());
  }

  SpiralArm out = arm;
  for (int axis = 0; axis < 2; ++axis) {
    std::vector<cplx> buf(padded);
    for (std::size_t i = 0; i < total; ++i) {
      const KPoint& g = i < n_read ? arm.gradient[i] : arm.rewinder[i - n_read];
      buf[i] = axis == 0 ? g.kx : g.ky;
    }
    fft::forward_1d(buf);
    for (std::size_t m = 0; m < padded; ++m) {
      const long idx = m <= padded / 2 ? static_cast<long>(m)
                                       : static_cast<long>(m) - static_cast<long>(padded);
      const double f = idx / (padded * dwell);
      cplx h = model.response(axis, f);
      if (m == padded / 2) h = std::real(h);  // Nyquist bin must stay real
      const double ph = -2.0 * kPi * f * model.delay_us() * 1e-6;
      cplx d(std::cos(ph), std::sin(ph));
      if (m == padded / 2) d = std::cos(ph);
      buf[m] *= h * d;
    }
    fft::inverse_1d(buf);
    for (std::size_t i = 0; i < total; ++i) {
      const double v = buf[i].real() / static_cast<double>(padded);
      KPoint& g = i < n_read ? out.gradient[i] : out.rewinder[i - n_read];
      (axis == 0 ? g.kx : g.ky) = v;
    }
  }
  out.samples = integrate_gradient(out.gradient, arm.dwell_us);
  return out;
}

std::vector<double> density_weights(std::span<const KPoint> arm, int total_arms) {
  const std::size_t n = arm.size();
  require(n >= 2 && total_arms >= 1, ErrorCode::InvalidArgument,
          "density_weights: arm must have at least two samples");
  std::vector<double> w(n);
  double kmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 < n ? i + 1 : n - 1;
    // Radial speed: an interleaved set covers 2*pi*|k| / n_arms of arc per
    // ring, so the area per sample is |k| * d|k|.
    const double step =
        std::abs(std::hypot(arm[b].kx, arm[b].ky) - std::hypot(arm[a].kx, arm[a].ky)) / (b - a);
    const double r = std::hypot(arm[i].kx, arm[i].ky);
    kmax = std::max(kmax, r);
    w[i] = r * step;
  }
  w[0] = w[1];
  double sum = 0.0;
  for (double v : w) sum += v;
  require(sum > 0.0, ErrorCode::InvalidArgument, "density_weights: degenerate arm");
  const double scale = kPi * kmax * kmax / (sum * total_arms);
  for (double& v : w) v *= scale;
  return w;
}

int Trajectory::orientation_of_frame(int frame) const {
  return (frame / std::max(frames_per_orientation, 1)) % n_orientations;
}

std::span<const KPoint> Trajectory::arm(int orientation, int a) const {
  const std::size_t off =
      (static_cast<std::size_t>(orientation) * arms_per_frame + a) * samples_per_arm;
  return {k.data() + off, static_cast<std::size_t>(samples_per_arm)};
}

std::vector<KPoint> Trajectory::orientation_samples(int orientation) const {
  std::vector<KPoint> out;
  out.reserve(static_cast<std::size_t>(arms_per_frame) * samples_per_arm);
  for (int a = 0; a < arms_per_frame; ++a) {
    auto s = arm(orientation, a);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::vector<KPoint> Trajectory::frame_samples(int frame) const {
  return orientation_samples(orientation_of_frame(frame));
}

std::vector<KPoint> Trajectory::union_samples() const { return k; }

double Trajectory::k_max() const {
  double m = 0.0;
  for (const auto& p : k) m = std::max(m, std::hypot(p.kx, p.ky));
  return m;
}

Trajectory make_trajectory(const SpiralArm& base, const InterleaveSet& interleaves,
                           const RotationSchedule& schedule, double fov_mm) {
  require(fov_mm > 0.0, ErrorCode::InvalidArgument, "make_trajectory: fov must be positive");
  require(schedule.n_arms == interleaves.n_arms, ErrorCode::ShapeMismatch,
          "make_trajectory: schedule does not match the interleave set");
  Trajectory t;
  t.arms_per_frame = interleaves.n_arms;
  t.n_orientations = schedule.n_orientations;
  t.frames_per_orientation = schedule.frames_per_orientation;
  t.samples_per_arm = static_cast<int>(base.samples.size());
  t.dwell_us = base.dwell_us;
  t.fov_mm = fov_mm;
  t.arm_angles = schedule.all_angles();
  const double scale = fov_mm * 1e-3;
  t.k.reserve(t.arm_angles.size() * base.samples.size());
  for (double angle : t.arm_angles)
    for (const auto& p : base.samples) {
      const KPoint r = rotate(p, angle);
      t.k.push_back({r.kx * scale, r.ky * scale});
    }
  return t;
}

Trajectory make_trajectory(const InterleaveSet& interleaves, const RotationSchedule& schedule,
                           double fov_mm) {
  return make_trajectory(interleaves.base_arm, interleaves, schedule, fov_mm);
}

}  // namespace spiralrt::traj
