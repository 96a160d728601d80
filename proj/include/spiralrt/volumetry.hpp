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

#include "spiralrt/core.hpp"

namespace spiralrt::volumetry {

struct VolumeCurve {
  std::vector<double> volume_ml;  // per frame, summed over slices
  double frame_dt_ms = 0.0;
  /// Per-slice contributions [slice][frame] and each slice's own frame count.
  std::vector<std::vector<double>> slice_volume_ml;
  std::vector<int> slice_frames;
};

/// masks[slice][frame]. Volume = LV pixel count x pixel_size^2 x thickness,
/// summed over slices. Slices with fewer frames are aligned to the longest
/// by nearest relative position.
VolumeCurve mask_to_volume(const std::vector<std::vector<LabelImage>>& masks, double pixel_size_mm,
                           double slice_thickness_mm, double frame_dt_ms);

struct ExtremaOptions {
  double min_prominence = 0.05;     // fraction of the curve range
  double min_separation_ms = 400.0;
};

struct Extrema {
  std::vector<int> ed_frames;  // local maxima
  std::vector<int> es_frames;  // local minima
  std::vector<double> edv_ml;
  std::vector<double> esv_ml;
  /// Frames in time order with +1 for a maximum and -1 for a minimum.
  std::vector<std::pair<int, int>> sequence;
};

/// Interior local maxima / minima with prominence and separation filters,
/// then forced to alternate (the more extreme of two neighbours of the same
/// kind is kept).
Extrema detect_extrema(const VolumeCurve& curve, const ExtremaOptions& opt = {});

struct EjectionFraction {
  double ef_percent = 0.0;
  double edv_median_ml = 0.0;
  double esv_median_ml = 0.0;
};

double median(std::vector<double> v);

/// EF = 100 (median(EDV) - median(ESV)) / median(EDV).
EjectionFraction ejection_fraction(const std::vector<double>& edv, const std::vector<double>& esv);

/// JSON report: curve, per-cycle EDV/ESV, medians and EF.
std::string volume_report(const VolumeCurve& curve, const Extrema& ext, const EjectionFraction& ef);

}  // namespace spiralrt::volumetry
