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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "spiralrt/xsdnet.hpp"

namespace oracle {

using spiralrt::xsdnet::Tensor;

inline Tensor random_tensor(std::vector<int> shape, std::mt19937& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = u(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a.data[i]) - b.data[i]));
  return m;
}

// Nested-loop convolution with explicit zero padding, accumulated in double.
inline Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int ci = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const int co = w.shape[0], k = w.shape[2];
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor y({co, oh, ow});
  for (int o = 0; o < co; ++o)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b.data[o];
        for (int i = 0; i < ci; ++i)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += double(w.data[((o * ci + i) * k + ky) * k + kx]) * x.at(i, iy, ix);
            }
        y.at(o, oy, ox) = static_cast<float>(acc);
      }
  return y;
}

}  // namespace oracle
