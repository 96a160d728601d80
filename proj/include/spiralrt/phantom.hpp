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

#include <cstdint>
#include <vector>

#include "spiralrt/acquisition.hpp"
#include "spiralrt/core.hpp"
#include "spiralrt/trajectory.hpp"

namespace spiralrt::phantom {

/// Tissue intensities of the piecewise-constant phantom.
struct Intensities {
  double blood = 1.0;
  double myocardium = 0.35;
  double chest_wall = 0.6;
  double fat = 0.8;
  double background = 0.0;
};

struct PhantomConfig {
  int grid_size = 128;
  double pixel_size_mm = 1.29;
  int n_slices = 10;
  double slice_thickness_mm = 8.0;
  double heart_period_ms = 1000.0;
  int n_frames = 104;
  double frame_dt_ms = 48.0;
  double lv_radius_ed_mm = 24.0;
  double lv_radius_es_mm = 15.178932768808;  // 24 * sqrt(0.4): EF 60 %
  double arrhythmia_jitter = 0.0;
  double breathing_amplitude_mm = 0.0;
  std::uint64_t seed = 1;

  double es_phase = 0.4;           // fraction of the cycle from ED to ES
  double start_phase = 0.0;        // cardiac phase at t = 0
  double wall_thickness_ed_mm = 8.0;
  double lv_aspect = 0.92;         // minor / major axis of the LV ellipse
  double apex_scale = 0.4;         // radius scale of the most apical slice
  double breathing_period_ms = 0.0;  // 0 selects 10 heart periods
  double edge_blur_px = 1.0;
  Intensities intensity;

  double fov_mm() const { return grid_size * pixel_size_mm; }
  void validate() const;
};

struct DynamicPhantom {
  PhantomConfig config;
  std::vector<Image<float>> images;  // frame-major: frame * n_slices + slice
  std::vector<LabelImage> masks;
  std::vector<double> true_volume_ml;  // analytic LV blood-pool volume per frame
  std::vector<double> frame_times_ms;
  std::vector<double> cycle_start_ms;   // ED times (cycles may start before t = 0)
  std::vector<double> cycle_length_ms;
  std::vector<int> cycle_boundaries;    // frames nearest to each ED inside the series
  double edv_ml = 0.0;                  // analytic volumes at ED and ES
  double esv_ml = 0.0;

  const Image<float>& image(int frame, int slice) const {
    return images[static_cast<std::size_t>(frame) * config.n_slices + slice];
  }
  const LabelImage& mask(int frame, int slice) const {
    return masks[static_cast<std::size_t>(frame) * config.n_slices + slice];
  }
  /// Analytic LV endocardial ellipse area (mm^2) of a slice at a frame.
  double lv_area_mm2(int frame, int slice) const;
};

/// Cardiac phase in [0, 1) and cycle index at time t (ms).
struct CardiacState {
  double phase = 0.0;
  int cycle = 0;
};

CardiacState cardiac_state(const DynamicPhantom& phantom, double t_ms);

DynamicPhantom generate_phantom(const PhantomConfig& config);

/// LV endocardial radius (mm, basal slice) at a cardiac phase.
double lv_radius_at_phase(const PhantomConfig& config, double phase);

/// Bound on the largest absolute second finite difference of a coil map.
inline constexpr double kCoilSmoothnessBound = 5e-3;

struct CoilSet {
  int n_coils = 0;
  std::vector<CImage> maps;
};

/// Gaussian-lobe receive coils around the FOV border with smooth linear
/// phase. `unit_single` returns one constant unit map when n_coils == 1.
CoilSet generate_coils(int n_coils, int grid_size, std::uint64_t seed, bool unit_single = false);

/// Scales all maps so their root-sum-of-squares is one at every pixel.
CoilSet normalize_rss(const CoilSet& coils);

RImage root_sum_of_squares(const std::vector<CImage>& maps);
double max_second_difference(const CImage& map);

/// Forward-simulates multi-coil k-space of one phantom slice along the
/// trajectory's frame schedule, adding complex white noise with standard
/// deviation noise_sigma * mean |signal|.
RawAcquisition simulate_kspace(const DynamicPhantom& phantom, int slice, const CoilSet& coils,
                               const traj::Trajectory& trajectory, double noise_sigma,
                               std::uint64_t seed, int threads = 1);

/// Same as above for an explicit image series (frame-major, one image per frame).
RawAcquisition simulate_kspace(const std::vector<CImage>& frames, double frame_dt_ms,
                               const CoilSet& coils, const traj::Trajectory& trajectory,
                               double noise_sigma, std::uint64_t seed, int threads = 1);

}  // namespace spiralrt::phantom
