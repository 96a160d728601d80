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

#include "spiralrt/core.hpp"

namespace spiralrt::stats {

struct BlandAltman {
  double bias = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  double sd = 0.0;  // sample standard deviation of the differences
  int n = 0;

  std::string to_json() const;
};

/// d = a - b; bias = mean(d); limits = bias -/+ 1.96 * sd(d) with n - 1.
BlandAltman bland_altman(std::span<const double> a, std::span<const double> b);

/// ||x - ref||_2 / ||ref||_2.
double nrmse(std::span<const double> x, std::span<const double> ref);
double nrmse(std::span<const cplx> x, std::span<const cplx> ref);

/// 20 log10(max|ref| / rmse(x, ref)); +inf when x == ref.
double psnr(std::span<const double> x, std::span<const double> ref);

/// 2|A n B| / (|A| + |B|) for pixels equal to `label`; 1 when both are empty.
double dice(const LabelImage& a, const LabelImage& b, std::uint8_t label);

}  // namespace spiralrt::stats
