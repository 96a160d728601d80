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

#include <span>
#include <vector>

#include "spiralrt/core.hpp"

namespace spiralrt::traj {

/// Proton gyromagnetic ratio in Hz/T.
inline constexpr double kGammaHzPerT = 42.577478518e6;

/// Time law of the Archimedean spiral k(theta) = lambda * theta * exp(i theta).
///
/// theta(t) follows a slew-limited law that starts with constant angular
/// acceleration and blends into theta ~ t^(2/3), then switches to a
/// constant-speed (gradient-limited) law once |dk/dt| hits the amplitude
/// limit. The law runs on a warped clock v = u^3 / (u^2 + onset^2) so the
/// waveform leaves zero with continuous slew. `time_scale` stretches the whole
/// law so the last sample lands exactly on k_max.
struct SpiralShape {
  double lambda = 0.0;        // cycles/m per radian
  double beta = 0.0;          // rad/s^2
  double ramp = 1.0;          // blend constant of the slew-limited law
  double a = 0.0;             // rad / s^(2/3)
  double t_switch = 0.0;      // s, start of gradient-limited regime (inf if never)
  double theta_switch = 0.0;  // rad
  double speed = 0.0;         // gamma * Gmax / lambda, rad^2/s
  double onset = 0.0;         // s
  double time_scale = 1.0;
  double theta_max = 0.0;

  double theta(double t_seconds) const;
};

struct SpiralArm {
  std::vector<KPoint> samples;   // cycles/m
  double dwell_us = 0.0;
  std::vector<KPoint> gradient;  // mT/m; gradient[i] is held over (t_{i-1}, t_i]
  std::vector<KPoint> rewinder;  // mT/m, played after the readout, not sampled
};

struct SpiralParams {
  double fov_mm = 74.0;  // field of view sampled at Nyquist by n_arms interleaves
  double resolution_mm = 1.29;
  int n_arms = 13;
  double max_gradient_mt_m = 40.0;
  double max_slew_t_m_s = 150.0;
  double dwell_us = 2.5;
  double max_readout_us = 3000.0;
};

struct InterleaveSet {
  SpiralParams params;
  SpiralShape shape;
  SpiralArm base_arm;
  int n_arms = 0;
  std::vector<double> angles;

  double k_max() const;  // cycles/m
  /// Base arm rotated by `angle`, in cycles/m.
  std::vector<KPoint> rotated(double angle) const;
  /// Nominal k at time t (seconds) along the unrotated arm.
  KPoint analytic_k(double t_seconds) const;
  /// Analytic count of interleaves needed for Nyquist turn spacing at `fov_mm`.
  int nyquist_arms(double fov_mm) const;
  double readout_us() const;
};

InterleaveSet design_spiral(const SpiralParams& params);

/// k[i] = sum_{j<=i} gamma * g[j] * dt, the discrete integral used throughout.
std::vector<KPoint> integrate_gradient(std::span<const KPoint> gradient_mt_m,
                                       double dwell_us);

/// Peak |g| (mT/m) and peak |dg/dt| (T/m/s) of a sampled waveform.
double peak_gradient(std::span<const KPoint> gradient_mt_m);
double peak_slew(std::span<const KPoint> gradient_mt_m, double dwell_us);

struct RotationSchedule {
  int n_arms = 0;
  int n_orientations = 0;
  int frames_per_orientation = 1;
  std::vector<double> offsets;  // radians, one per orientation

  /// Orientation index of frame f; the pattern sequence repeats cyclically.
  int orientation_of_frame(int frame) const;
  /// All n_orientations * n_arms arm angles, orientation-major.
  std::vector<double> all_angles() const;
};

/// Greedy largest-gap rotation schedule. Ties go to the smallest offset.
RotationSchedule build_schedule(const InterleaveSet& interleaves, int n_orientations,
                                int frames_per_orientation);

/// Linear gradient system model with an optional pure delay.
class GstfModel {
 public:
  GstfModel(std::vector<double> freq_hz, std::vector<cplx> response_x,
            std::vector<cplx> response_y, double delay_us);

  static GstfModel identity(double max_freq_hz = 1e6, double delay_us = 0.0);
  static GstfModel low_pass(double cutoff_hz, double max_freq_hz = 1e6,
                            double delay_us = 0.0, int n_points = 4001);

  /// Interpolated response at frequency f (Hz); negative f uses conj symmetry.
  cplx response(int axis, double f_hz) const;
  double delay_us() const { return delay_us_; }
  double max_freq_hz() const { return freq_.back(); }
  const std::vector<double>& freq_hz() const { return freq_; }
  const std::vector<cplx>& response_x() const { return hx_; }
  const std::vector<cplx>& response_y() const { return hy_; }

 private:
  std::vector<double> freq_;
  std::vector<cplx> hx_, hy_;
  double delay_us_;
};

/// Applies the model to the full played-out waveform (readout + rewinder)
/// and re-integrates the sampled part of the trajectory.
SpiralArm gstf_correct(const SpiralArm& arm, const GstfModel& model);

/// Density compensation for one arm (samples in any consistent unit),
/// w ~ |k| |d|k||, scaled so the weights of `total_arms` copies sum to pi*k_max^2.
std::vector<double> density_weights(std::span<const KPoint> arm, int total_arms);

/// Sampled trajectory of an acquisition in cycles/FOV, orientation-major:
/// k[(orientation * arms_per_frame + arm) * samples_per_arm + sample].
struct Trajectory {
  int arms_per_frame = 0;
  int n_orientations = 0;
  int frames_per_orientation = 1;
  int samples_per_arm = 0;
  double dwell_us = 0.0;
  double fov_mm = 0.0;
  std::vector<double> arm_angles;
  std::vector<KPoint> k;

  int orientation_of_frame(int frame) const;
  std::span<const KPoint> arm(int orientation, int arm) const;
  std::vector<KPoint> frame_samples(int frame) const;
  std::vector<KPoint> orientation_samples(int orientation) const;
  /// All distinct arms of all orientations.
  std::vector<KPoint> union_samples() const;
  double k_max() const;  // cycles/FOV
  double arm_duration_ms(double frame_dt_ms) const {
    return frame_dt_ms / arms_per_frame;
  }
};

/// Samples the schedule into cycles/FOV for a reconstruction FOV of fov_mm.
Trajectory make_trajectory(const InterleaveSet& interleaves,
                           const RotationSchedule& schedule, double fov_mm);
/// As make_trajectory but with each arm taken from `arm` instead of the
/// nominal base arm (e.g. after GSTF correction).
Trajectory make_trajectory(const SpiralArm& arm, const InterleaveSet& interleaves,
                           const RotationSchedule& schedule, double fov_mm);

}  // namespace spiralrt::traj
