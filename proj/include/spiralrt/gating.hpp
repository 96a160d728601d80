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

#include <string>
#include <vector>

#include "spiralrt/acquisition.hpp"
#include "spiralrt/core.hpp"
#include "spiralrt/trajectory.hpp"

namespace spiralrt::gating {

/// Self-gating signal, one value per acquired arm (frame-major).
struct GatingSignal {
  std::vector<double> dc;          // rss over coils of |first sample|
  std::vector<double> detrended;   // dc minus its moving median
  std::vector<double> times_ms;    // arm start times
  double arm_dt_ms = 0.0;
};

/// Extracts the DC signal. Every arm of the trajectory must start at k = 0.
GatingSignal extract_gating(const RawAcquisition& raw, const traj::Trajectory& trajectory,
                            double median_window_ms = 2000.0);

struct CycleOptions {
  double band_lo_hz = 0.5;
  double band_hi_hz = 3.0;
  double min_distance_ms = 400.0;
};

/// Cycle boundary times (ms) at peaks of the band-passed signal.
std::vector<double> detect_cycles(const GatingSignal& signal, const CycleOptions& options = {});

struct ArmRef {
  int frame = 0;
  int arm = 0;
};

struct SegmentedSet {
  int phase_count = 0;
  int n_slots = 0;  // n_orientations * arms_per_frame
  // slots[phase][slot]: arms pooled into that phase, slot = orientation * arms + arm.
  std::vector<std::vector<std::vector<ArmRef>>> slots;
  std::vector<double> completeness;                   // per phase
  std::vector<std::vector<int>> missing_orientations;  // per phase

  /// Summary: phase -> arm count, filled slots, completeness.
  std::string report_json() const;
};

/// Phase of every arm by its fractional position within its cycle; arms
/// outside the detected boundaries use cycles extended by the median RR.
SegmentedSet assign_phases(const RawAcquisition& raw, const traj::Trajectory& trajectory,
                           const std::vector<double>& boundaries_ms, int phase_count);

struct SegmentedImages {
  SegmentedSet set;
  std::vector<std::vector<CImage>> coil_images;  // [phase][coil]
};

/// Bins arms into phases and grids each phase from the pooled union of
/// arms (arms sharing a slot are averaged). Throws InsufficientData when a
/// phase is incomplete and require_complete is set.
SegmentedImages bin_segmented(const RawAcquisition& raw, const traj::Trajectory& trajectory,
                              const std::vector<double>& boundaries_ms, int phase_count,
                              int grid_size, bool require_complete = true, int threads = 1);

}  // namespace spiralrt::gating
