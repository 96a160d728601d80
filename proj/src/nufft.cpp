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

#include "spiralrt/nufft.hpp"

#include <cmath>
#include <sstream>

#include "spiralrt/fft.hpp"

namespace spiralrt::nufft {
namespace {

// Modified Bessel function I0 by its power series; converges quickly for
// the arguments used here (|x| < ~40).
double bessel_i0(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double kb_kernel(double t, int width, double beta) {
  const double r = 2.0 * t / width;
  const double arg = 1.0 - r * r;
  if (arg < 0.0) return 0.0;
  return bessel_i0(beta * std::sqrt(arg));
}

// Continuous Fourier transform of kb_kernel at frequency x (cycles/cell).
double kb_transform(double x, int width, double beta) {
  const double a = kPi * width * x;
  const double d = beta * beta - a * a;
  if (d > 1e-12) {
    const double s = std::sqrt(d);
    return width * std::sinh(s) / s;
  }
  if (d < -1e-12) {
    const double s = std::sqrt(-d);
    return width * std::sin(s) / s;
  }
  return width;
}

int wrap(int m, int n) {
  const int r = m % n;
  return r < 0 ? r + n : r;
}

}  // namespace

double kaiser_bessel_beta(double oversampling, int kernel_width) {
  const double a = oversampling;
  const double w = kernel_width;
  return kPi * std::sqrt(w * w / (a * a) * (a - 0.5) * (a - 0.5) - 0.8);
}

GriddingPlan::GriddingPlan(std::span<const KPoint> positions, int grid_size,
                           double oversampling, int kernel_width)
    : grid_size_(grid_size),
      oversampling_(oversampling),
      width_(kernel_width),
      taps_(kernel_width + 1),
      beta_(kaiser_bessel_beta(oversampling, kernel_width)) {
  require(grid_size > 0 && grid_size % 2 == 0, ErrorCode::InvalidArgument,
          "nufft: grid_size must be positive and even");
  require(oversampling >= 1.25, ErrorCode::InvalidArgument,
          "nufft: oversampling must be >= 1.25");
  require(kernel_width >= 2, ErrorCode::InvalidArgument,
          "nufft: kernel_width must be >= 2");
  os_size_ = static_cast<int>(std::ceil(oversampling * grid_size));
  if (os_size_ % 2) ++os_size_;
  require(os_size_ >= kernel_width, ErrorCode::InvalidArgument,
          "nufft: kernel wider than oversampled grid");

  const double n = grid_size;
  positions_.reserve(positions.size());
  for (std::size_t s = 0; s < positions.size(); ++s) {
    KPoint p{positions[s].kx / n, positions[s].ky / n};
    constexpr double kEdge = 0.5 + 1e-9;
    if (!(std::abs(p.kx) <= kEdge && std::abs(p.ky) <= kEdge)) {
      std::ostringstream msg;
      msg << "nufft: sample " << s << " at (" << positions[s].kx << ", "
          << positions[s].ky << ") cycles/FOV lies outside [-" << n / 2 << ", "
          << n / 2 << "]";
      fail(ErrorCode::InvalidArgument, msg.str());
    }
    if (p.kx >= 0.5) p.kx -= 1.0;
    if (p.ky >= 0.5) p.ky -= 1.0;
    if (p.kx < -0.5) p.kx += 1.0;
    if (p.ky < -0.5) p.ky += 1.0;
    positions_.push_back({p.kx * n, p.ky * n});
  }

  const std::size_t m = positions_.size();
  start_x_.resize(m);
  start_y_.resize(m);
  wx_.resize(m * taps_);
  wy_.resize(m * taps_);
  const double half = 0.5 * width_;
  const double g = os_size_;
  auto fill = [&](double u, int& start, double* w) {
    const double pos = u * g;
    start = static_cast<int>(std::ceil(pos - half));
    double sum = 0.0;
    for (int j = 0; j < taps_; ++j) {
      w[j] = kb_kernel(pos - (start + j), width_, beta_);
      sum += w[j];
    }
    for (int j = 0; j < taps_; ++j) w[j] /= sum;
  };
  for (std::size_t s = 0; s < m; ++s) {
    fill(positions_[s].kx / n, start_x_[s], &wx_[s * taps_]);
    fill(positions_[s].ky / n, start_y_[s], &wy_[s * taps_]);
  }

  deapod_.resize(grid_size_);
  const double norm = kb_transform(0.0, width_, beta_);
  for (int i = 0; i < grid_size_; ++i) {
    const double x = (i - grid_size_ / 2) / g;
    deapod_[i] = kb_transform(x, width_, beta_) / norm;
  }
}

std::span<const double> GriddingPlan::weights_x(std::size_t s) const {
  return {wx_.data() + s * taps_, static_cast<std::size_t>(taps_)};
}

std::span<const double> GriddingPlan::weights_y(std::size_t s) const {
  return {wy_.data() + s * taps_, static_cast<std::size_t>(taps_)};
}

std::vector<cplx> GriddingPlan::forward(const CImage& image) const {
  require(image.height == grid_size_ && image.width == grid_size_,
          ErrorCode::ShapeMismatch, "nufft::forward: image does not match grid");
  const int n = grid_size_;
  const int g = os_size_;
  std::vector<cplx> grid(static_cast<std::size_t>(g) * g);
  for (int iy = 0; iy < n; ++iy) {
    const int row = wrap(iy - n / 2, g);
    for (int ix = 0; ix < n; ++ix) {
      const int col = wrap(ix - n / 2, g);
      grid[static_cast<std::size_t>(row) * g + col] =
          image(iy, ix) / (deapod_[iy] * deapod_[ix]);
    }
  }
  fft::forward_2d(grid, g, g);

  std::vector<cplx> out(positions_.size());
  std::vector<int> cols(taps_);
  for (std::size_t s = 0; s < positions_.size(); ++s) {
    const double* wx = &wx_[s * taps_];
    const double* wy = &wy_[s * taps_];
    for (int jx = 0; jx < taps_; ++jx) cols[jx] = wrap(start_x_[s] + jx, g);
    double ar = 0.0, ai = 0.0;
    for (int jy = 0; jy < taps_; ++jy) {
      const cplx* row = &grid[static_cast<std::size_t>(wrap(start_y_[s] + jy, g)) * g];
      double rr = 0.0, ri = 0.0;
      for (int jx = 0; jx < taps_; ++jx) {
        const cplx v = row[cols[jx]];
        rr += wx[jx] * v.real();
        ri += wx[jx] * v.imag();
      }
      ar += wy[jy] * rr;
      ai += wy[jy] * ri;
    }
    out[s] = cplx(ar, ai);
  }
  return out;
}

CImage GriddingPlan::adjoint(std::span<const cplx> samples,
                             std::optional<std::span<const double>> density) const {
  require(samples.size() == positions_.size(), ErrorCode::ShapeMismatch,
          "nufft::adjoint: sample count does not match plan");
  if (density)
    require(density->size() == positions_.size(), ErrorCode::ShapeMismatch,
            "nufft::adjoint: density weight count does not match plan");
  const int n = grid_size_;
  const int g = os_size_;
  std::vector<cplx> grid(static_cast<std::size_t>(g) * g);
  std::vector<int> cols(taps_);
  for (std::size_t s = 0; s < positions_.size(); ++s) {
    const cplx v = density ? samples[s] * (*density)[s] : samples[s];
    const double* wx = &wx_[s * taps_];
    const double* wy = &wy_[s * taps_];
    for (int jx = 0; jx < taps_; ++jx) cols[jx] = wrap(start_x_[s] + jx, g);
    for (int jy = 0; jy < taps_; ++jy) {
      double* row = reinterpret_cast<double*>(&grid[static_cast<std::size_t>(wrap(start_y_[s] + jy, g)) * g]);
      const double vr = wy[jy] * v.real(), vi = wy[jy] * v.imag();
      for (int jx = 0; jx < taps_; ++jx) {
        row[2 * cols[jx]] += wx[jx] * vr;
        row[2 * cols[jx] + 1] += wx[jx] * vi;
      }
    }
  }
  fft::inverse_2d(grid, g, g);

  CImage out(n, n);
  for (int iy = 0; iy < n; ++iy) {
    const int row = wrap(iy - n / 2, g);
    for (int ix = 0; ix < n; ++ix) {
      const int col = wrap(ix - n / 2, g);
      out(iy, ix) = grid[static_cast<std::size_t>(row) * g + col] /
                    (deapod_[iy] * deapod_[ix]);
    }
  }
  return out;
}

}  // namespace spiralrt::nufft
