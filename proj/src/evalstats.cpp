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

#include "spiralrt/evalstats.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace spiralrt::stats {

BlandAltman bland_altman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::ShapeMismatch,
          "bland_altman: series lengths differ (" + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()) + ")");
  require(a.size() >= 2, ErrorCode::InsufficientData, "bland_altman: need at least two pairs");
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (a[i] - b[i]) - mean;
    ss += e * e;
  }
  BlandAltman r;
  r.n = static_cast<int>(n);
  r.bias = mean;
  r.sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.loa_low = mean - 1.96 * r.sd;
  r.loa_high = mean + 1.96 * r.sd;
  return r;
}

std::string BlandAltman::to_json() const {
  nlohmann::json j = {{"n", n}, {"bias", bias}, {"sd", sd}, {"loa_low", loa_low}, {"loa_high", loa_high}};
  return j.dump(2);
}

namespace {
template <class T>
double nrmse_impl(std::span<const T> x, std::span<const T> ref) {
  require(x.size() == ref.size(), ErrorCode::ShapeMismatch, "nrmse: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += std::norm(x[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  require(den > 0.0, ErrorCode::InvalidArgument, "nrmse: reference is all zero");
  return std::sqrt(num / den);
}
}  // namespace

double nrmse(std::span<const double> x, std::span<const double> ref) { return nrmse_impl(x, ref); }
double nrmse(std::span<const cplx> x, std::span<const cplx> ref) { return nrmse_impl(x, ref); }

double psnr(std::span<const double> x, std::span<const double> ref) {
  require(x.size() == ref.size() && !x.empty(), ErrorCode::ShapeMismatch, "psnr: shape mismatch");
  double mse = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mse += (x[i] - ref[i]) * (x[i] - ref[i]);
    peak = std::max(peak, std::abs(ref[i]));
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak / std::sqrt(mse));
}

double dice(const LabelImage& a, const LabelImage& b, std::uint8_t label) {
  require(a.same_shape(b), ErrorCode::ShapeMismatch, "dice: mask shapes differ");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ia = a.data[i] == label, ib = b.data[i] == label;
    na += ia;
    nb += ib;
    both += ia && ib;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

}  // namespace spiralrt::stats
