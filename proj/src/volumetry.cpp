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

#include "spiralrt/volumetry.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace spiralrt::volumetry {

VolumeCurve mask_to_volume(const std::vector<std::vector<LabelImage>>& masks, double pixel_size_mm,
                           double slice_thickness_mm, double frame_dt_ms) {
  require(!masks.empty(), ErrorCode::InsufficientData, "mask_to_volume: no slices");
  require(pixel_size_mm > 0.0 && slice_thickness_mm > 0.0 && frame_dt_ms > 0.0, ErrorCode::InvalidArgument,
          "mask_to_volume: pixel size, thickness and frame time must be positive");
  int n_frames = 0;
  for (const auto& s : masks) {
    require(!s.empty(), ErrorCode::InsufficientData, "mask_to_volume: a slice has no frames");
    n_frames = std::max(n_frames, static_cast<int>(s.size()));
  }
  const double voxel_ml = pixel_size_mm * pixel_size_mm * slice_thickness_mm / 1000.0;

  VolumeCurve out;
  out.frame_dt_ms = frame_dt_ms;
  out.volume_ml.assign(n_frames, 0.0);
  for (const auto& s : masks) {
    const int fs = static_cast<int>(s.size());
    std::vector<double> own(fs);
    for (int f = 0; f < fs; ++f) {
      std::size_t count = 0;
      for (auto v : s[f].data) count += v == kLeftVentricle;
      own[f] = static_cast<double>(count) * voxel_ml;
    }
    std::vector<double> aligned(n_frames);
    for (int f = 0; f < n_frames; ++f) {
      const int src = n_frames == 1 ? 0
                                    : static_cast<int>(std::lround(static_cast<double>(f) * (fs - 1) /
                                                                   (n_frames - 1)));
      aligned[f] = own[src];
      out.volume_ml[f] += own[src];
    }
    out.slice_volume_ml.push_back(std::move(aligned));
    out.slice_frames.push_back(fs);
  }
  return out;
}

namespace {

// Prominence of an extremum at i of v (for minima pass the negated curve).
double prominence(const std::vector<double>& v, int i) {
  const int n = static_cast<int>(v.size());
  double left = v[i], right = v[i];
  for (int j = i - 1; j >= 0 && v[j] <= v[i]; --j) left = std::min(left, v[j]);
  for (int j = i + 1; j < n && v[j] <= v[i]; ++j) right = std::min(right, v[j]);
  return v[i] - std::max(left, right);
}

std::vector<int> find_peaks(const std::vector<double>& v, double min_prom, int min_dist) {
  const int n = static_cast<int>(v.size());
  std::vector<int> cand;
  for (int i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1])) continue;
    // Plateau: take its middle if it drops afterwards.
    int j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    if (j + 1 < n && v[j + 1] < v[i]) cand.push_back((i + j) / 2);
    i = j;
  }
  std::vector<int> kept;
  for (int c : cand)
    if (prominence(v, c) >= min_prom) kept.push_back(c);
  // Tallest first; drop neighbours closer than min_dist.
  std::vector<int> order = kept;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] > v[b]; });
  std::vector<int> out;
  for (int c : order) {
    bool ok = true;
    for (int o : out)
      if (std::abs(o - c) < min_dist) ok = false;
    if (ok) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Extrema detect_extrema(const VolumeCurve& curve, const ExtremaOptions& opt) {
  const auto& v = curve.volume_ml;
  require(v.size() >= 3, ErrorCode::InsufficientData, "detect_extrema: curve has fewer than 3 frames");
  require(curve.frame_dt_ms > 0.0, ErrorCode::InvalidArgument, "detect_extrema: frame_dt must be positive");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  require(range > 0.0, ErrorCode::InsufficientData, "detect_extrema: constant curve has no extrema");
  const double min_prom = opt.min_prominence * range;
  const int min_dist = std::max(1, static_cast<int>(std::ceil(opt.min_separation_ms / curve.frame_dt_ms)));

  std::vector<double> neg(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
  std::vector<std::pair<int, int>> seq;
  for (int i : find_peaks(v, min_prom, min_dist)) seq.emplace_back(i, +1);
  for (int i : find_peaks(neg, min_prom, min_dist)) seq.emplace_back(i, -1);
  std::sort(seq.begin(), seq.end());

  std::vector<std::pair<int, int>> alt;
  for (const auto& e : seq) {
    if (!alt.empty() && alt.back().second == e.second) {
      const bool better = e.second > 0 ? v[e.first] > v[alt.back().first] : v[e.first] < v[alt.back().first];
      if (better) alt.back() = e;
      continue;
    }
    alt.push_back(e);
  }
  Extrema out;
  out.sequence = alt;
  for (const auto& [f, kind] : alt) {
    if (kind > 0) {
      out.ed_frames.push_back(f);
      out.edv_ml.push_back(v[f]);
    } else {
      out.es_frames.push_back(f);
      out.esv_ml.push_back(v[f]);
    }
  }
  require(!out.ed_frames.empty() && !out.es_frames.empty(), ErrorCode::InsufficientData,
          "detect_extrema: no end-diastolic/end-systolic pair found (" + std::to_string(out.ed_frames.size()) +
              " maxima, " + std::to_string(out.es_frames.size()) + " minima)");
  return out;
}

double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::InsufficientData, "median: empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EjectionFraction ejection_fraction(const std::vector<double>& edv, const std::vector<double>& esv) {
  require(!edv.empty() && !esv.empty(), ErrorCode::InsufficientData,
          "ejection_fraction: EDV and ESV lists must be non-empty");
  EjectionFraction r;
  r.edv_median_ml = median(edv);
  r.esv_median_ml = median(esv);
  require(r.edv_median_ml != 0.0, ErrorCode::Numeric, "ejection_fraction: median EDV is zero");
  r.ef_percent = 100.0 * (r.edv_median_ml - r.esv_median_ml) / r.edv_median_ml;
  return r;
}

std::string volume_report(const VolumeCurve& curve, const Extrema& ext, const EjectionFraction& ef) {
  nlohmann::json j;
  j["frame_dt_ms"] = curve.frame_dt_ms;
  j["volume_ml"] = curve.volume_ml;
  j["slice_frames"] = curve.slice_frames;
  j["ed_frames"] = ext.ed_frames;
  j["es_frames"] = ext.es_frames;
  j["edv_ml"] = ext.edv_ml;
  j["esv_ml"] = ext.esv_ml;
  j["edv_median_ml"] = ef.edv_median_ml;
  j["esv_median_ml"] = ef.esv_median_ml;
  j["ef_percent"] = ef.ef_percent;
  return j.dump(2);
}

}  // namespace spiralrt::volumetry
