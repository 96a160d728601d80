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

#include "spiralrt/phantom.hpp"
#include "spiralrt/trajectory.hpp"

namespace fixture {

using namespace spiralrt;

/// Protocol spiral (13 arms, 8 orientations) sampled for a reconstruction FOV.
inline traj::Trajectory protocol_trajectory(double fov_mm, int frames_per_orientation = 1,
                                            int n_orientations = 8) {
  const auto set = traj::design_spiral(traj::SpiralParams{});
  const auto sched = traj::build_schedule(set, n_orientations, frames_per_orientation);
  return traj::make_trajectory(set, sched, fov_mm);
}

/// Small, fast phantom configuration.
inline phantom::PhantomConfig small_config(int n_frames = 24, int n_slices = 3) {
  phantom::PhantomConfig c;
  c.n_frames = n_frames;
  c.n_slices = n_slices;
  return c;
}

}  // namespace fixture
