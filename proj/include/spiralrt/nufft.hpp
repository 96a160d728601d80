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

#include <optional>
#include <span>
#include <vector>

#include "spiralrt/core.hpp"

namespace spiralrt::nufft {

/// Kaiser-Bessel shape parameter for a given oversampling and kernel width.
double kaiser_bessel_beta(double oversampling, int kernel_width);

/// Precomputed 2D gridding geometry for a fixed sample set.
///
/// Sample positions are given in cycles/FOV, i.e. the image is N x N pixels
/// and a position k corresponds to exp(-2*pi*i * k . r / N) for a pixel at
/// centered integer coordinate r in [-N/2, N/2). Valid positions satisfy
/// |k / N| <= 0.5 per axis (plus 1e-9 rounding slack); +0.5 is folded onto
/// -0.5, which is the same frequency on an integer pixel lattice.
class GriddingPlan {
 public:
  GriddingPlan(std::span<const KPoint> positions, int grid_size,
               double oversampling = 2.0, int kernel_width = 6);

  int grid_size() const { return grid_size_; }
  int oversampled_size() const { return os_size_; }
  double oversampling() const { return oversampling_; }
  int kernel_width() const { return width_; }
  double kernel_beta() const { return beta_; }
  std::size_t num_samples() const { return positions_.size(); }
  const std::vector<KPoint>& positions() const { return positions_; }

  /// Interpolation weights of sample s along one axis. The closed kernel
  /// support spans kernel_width + 1 cells when a sample sits on a grid line,
  /// so kernel_width + 1 taps are stored (the last is zero otherwise).
  std::span<const double> weights_x(std::size_t s) const;
  std::span<const double> weights_y(std::size_t s) const;

  /// Image -> samples.
  std::vector<cplx> forward(const CImage& image) const;
  /// Samples -> image. With density weights the samples are scaled first;
  /// without them this is the exact adjoint of forward().
  CImage adjoint(std::span<const cplx> samples,
                 std::optional<std::span<const double>> density = std::nullopt) const;

 private:
  int grid_size_;
  int os_size_;
  double oversampling_;
  int width_;
  int taps_;
  double beta_;
  std::vector<KPoint> positions_;
  std::vector<int> start_x_, start_y_;
  std::vector<double> wx_, wy_;
  std::vector<double> deapod_;  // per centered image coordinate, length N
};

}  // namespace spiralrt::nufft
