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

#include "spiralrt/acquisition.hpp"
#include "spiralrt/core.hpp"
#include "spiralrt/trajectory.hpp"

namespace spiralrt::coils {

struct SensitivityMaps {
  std::vector<CImage> maps;  // rss-normalized inside mask, zero outside
  LabelImage mask;           // 1 where maps are valid

  int n_coils() const { return static_cast<int>(maps.size()); }
};

/// Pools all arms of all frames per coil and grids them with density
/// compensation onto an N x N image (N = grid_size). Frames that share an
/// orientation are averaged first, so uneven orientation counts do not bias
/// the result. Throws InsufficientData when some orientation has no frame.
std::vector<CImage> temporal_average(const RawAcquisition& raw, const traj::Trajectory& trajectory,
                                     int grid_size, int threads = 1);

struct WalshOptions {
  int block_size = 8;
  int divisor = 4;                // estimation grid is N / divisor per axis
  double energy_threshold = 1e-8;  // relative to the largest block energy
  int threads = 1;
};

SensitivityMaps walsh_maps(const std::vector<CImage>& coil_images, const WalshOptions& options = {});

/// Dominant eigenvector of a Hermitian n x n matrix (row-major) by power
/// iteration from the all-ones vector, stopping when successive iterates
/// differ by less than tol. The result has unit norm and is not phase-anchored.
std::vector<cplx> dominant_eigenvector(std::span<const cplx> matrix, int n, double tol = 1e-10,
                                       int max_iter = 10000);

/// Rotates the global phase so that the first non-zero entry is real positive.
void anchor_phase(std::span<cplx> v);

}  // namespace spiralrt::coils
