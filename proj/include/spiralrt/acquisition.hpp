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
#include <string>
#include <vector>

#include "spiralrt/core.hpp"

namespace spiralrt {

/// Multi-coil spiral k-space data, stored [frame][coil][arm][sample].
struct RawAcquisition {
  int n_frames = 0;
  int n_coils = 0;
  int arms_per_frame = 0;
  int samples_per_arm = 0;
  double dwell_us = 0.0;
  double frame_dt_ms = 48.0;
  std::string trajectory_file;
  std::vector<cplx> data;

  std::size_t frame_coil_size() const {
    return static_cast<std::size_t>(arms_per_frame) * samples_per_arm;
  }
  std::span<cplx> frame_coil(int frame, int coil) {
    return {data.data() + (static_cast<std::size_t>(frame) * n_coils + coil) * frame_coil_size(),
            frame_coil_size()};
  }
  std::span<const cplx> frame_coil(int frame, int coil) const {
    return {data.data() + (static_cast<std::size_t>(frame) * n_coils + coil) * frame_coil_size(),
            frame_coil_size()};
  }
  std::span<const cplx> arm(int frame, int coil, int arm) const {
    return frame_coil(frame, coil).subspan(static_cast<std::size_t>(arm) * samples_per_arm,
                                           samples_per_arm);
  }
  /// Acquisition time of an arm in ms, arms evenly spaced within each frame.
  double arm_time_ms(int frame, int arm) const {
    return (frame + static_cast<double>(arm) / arms_per_frame) * frame_dt_ms;
  }
  void allocate() {
    data.assign(static_cast<std::size_t>(n_frames) * n_coils * frame_coil_size(), cplx{});
  }
};

}  // namespace spiralrt
