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

#include "spiralrt/spiralrt.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <set>

#include "json.hpp"
#include "spiralrt/coils.hpp"
#include "spiralrt/evalstats.hpp"
#include "spiralrt/formats.hpp"
#include "spiralrt/gating.hpp"
#include "spiralrt/io.hpp"
#include "spiralrt/phantom.hpp"
#include "spiralrt/recon.hpp"
#include "spiralrt/trajectory.hpp"
#include "spiralrt/volumetry.hpp"
#include "spiralrt/xsdnet.hpp"

using nlohmann::json;
using namespace spiralrt;

struct spiralrt_images {
  formats::ImageStack s;
};
struct spiralrt_masks {
  formats::MaskStack s;
};
struct spiralrt_raw {
  RawAcquisition r;
};
struct spiralrt_traj {
  traj::Trajectory t;
};
struct spiralrt_model {
  explicit spiralrt_model(xsdnet::WeightStore w) : m(std::move(w)) {}
  xsdnet::Model m;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_report;

void report(std::string s) { g_report = std::move(s); }
void report(const json& j) { g_report = j.dump(2); }

template <class F>
int guarded(F&& f) {
  g_error.clear();
  try {
    f();
    return SPIRALRT_OK;
  } catch (const Error& e) {
    const int code = static_cast<int>(e.code());
    json j = {{"status", code}, {"error", to_string(e.code())}, {"message", e.what()}};
    if (!e.file().empty()) j["file"] = e.file();
    if (e.offset() >= 0) j["offset"] = e.offset();
    g_error = j.dump();
    return code;
  } catch (const std::bad_alloc&) {
    g_error = json{{"status", SPIRALRT_ERR_INTERNAL}, {"error", "internal"}, {"message", "out of memory"}}.dump();
    return SPIRALRT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = json{{"status", SPIRALRT_ERR_INTERNAL}, {"error", "internal"}, {"message", e.what()}}.dump();
    return SPIRALRT_ERR_INTERNAL;
  }
}

template <class T>
const T& deref(const T* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " is NULL");
  return *p;
}

void need_out(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string("output pointer ") + what + " is NULL");
}

// JSON options with typed, range-checked getters; leftover keys are errors.
class Options {
 public:
  Options(const char* text, std::string who) : who_(std::move(who)) {
    if (text != nullptr && *text != '\0') {
      try {
        j_ = json::parse(text);
      } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, who_ + ": options are not valid JSON: " + e.what());
      }
    } else {
      j_ = json::object();
    }
    require(j_.is_object(), ErrorCode::InvalidArgument, who_ + ": options must be a JSON object");
  }
  Options(json j, std::string who) : j_(std::move(j)), who_(std::move(who)) {
    require(j_.is_object(), ErrorCode::InvalidArgument, who_ + ": options must be a JSON object");
  }

  bool has(const char* k) const { return j_.contains(k); }

  int i(const char* k, int dflt, int lo = std::numeric_limits<int>::min(), int hi = std::numeric_limits<int>::max()) {
    const json* v = take(k);
    if (!v) return dflt;
    require(v->is_number_integer(), ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be an integer");
    const auto x = v->get<std::int64_t>();
    require(x >= lo && x <= hi, ErrorCode::InvalidArgument, who_ + ": '" + k + "' out of range");
    return static_cast<int>(x);
  }
  std::uint64_t u64(const char* k, std::uint64_t dflt) {
    const json* v = take(k);
    if (!v) return dflt;
    require(v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0),
            ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be a non-negative integer");
    return v->get<std::uint64_t>();
  }
  double d(const char* k, double dflt, double lo = -std::numeric_limits<double>::infinity(),
           double hi = std::numeric_limits<double>::infinity()) {
    const json* v = take(k);
    if (!v) return dflt;
    require(v->is_number(), ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be a number");
    const double x = v->get<double>();
    require(!std::isnan(x) && x >= lo && x <= hi, ErrorCode::InvalidArgument, who_ + ": '" + k + "' out of range");
    return x;
  }
  bool b(const char* k, bool dflt) {
    const json* v = take(k);
    if (!v) return dflt;
    require(v->is_boolean(), ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be true or false");
    return v->get<bool>();
  }
  std::string s(const char* k, const std::string& dflt) {
    const json* v = take(k);
    if (!v) return dflt;
    require(v->is_string(), ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be a string");
    return v->get<std::string>();
  }
  std::vector<int> ints(const char* k) {
    const json* v = take(k);
    if (!v) return {};
    require(v->is_array(), ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be an array of integers");
    std::vector<int> out;
    for (const auto& e : *v) {
      require(e.is_number_integer(), ErrorCode::InvalidArgument, who_ + ": '" + k + "' must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  Options sub(const char* k) {
    const json* v = take(k);
    return Options(v ? *v : json::object(), who_ + "." + k);
  }
  void done() const {
    for (const auto& [k, v] : j_.items())
      require(used_.count(k) > 0, ErrorCode::InvalidArgument, who_ + ": unknown option '" + k + "'");
  }

 private:
  const json* take(const char* k) {
    used_.insert(k);
    const auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  json j_;
  std::string who_;
  std::set<std::string> used_;
};

phantom::PhantomConfig phantom_config(Options& o) {
  phantom::PhantomConfig c;
  c.grid_size = o.i("grid_size", c.grid_size, 8, 4096);
  c.pixel_size_mm = o.d("pixel_size_mm", c.pixel_size_mm, 1e-6);
  c.n_slices = o.i("n_slices", c.n_slices, 1, 1000);
  c.slice_thickness_mm = o.d("slice_thickness_mm", c.slice_thickness_mm, 1e-6);
  c.heart_period_ms = o.d("heart_period_ms", c.heart_period_ms, 1e-6);
  c.n_frames = o.i("n_frames", c.n_frames, 1, 1000000);
  c.frame_dt_ms = o.d("frame_dt_ms", c.frame_dt_ms, 1e-6);
  c.lv_radius_ed_mm = o.d("lv_radius_ed_mm", c.lv_radius_ed_mm, 0.0);
  c.lv_radius_es_mm = o.d("lv_radius_es_mm", c.lv_radius_es_mm, 0.0);
  c.arrhythmia_jitter = o.d("arrhythmia_jitter", c.arrhythmia_jitter, 0.0);
  c.breathing_amplitude_mm = o.d("breathing_amplitude_mm", c.breathing_amplitude_mm, 0.0);
  c.seed = o.u64("seed", c.seed);
  c.es_phase = o.d("es_phase", c.es_phase);
  c.start_phase = o.d("start_phase", c.start_phase);
  c.wall_thickness_ed_mm = o.d("wall_thickness_ed_mm", c.wall_thickness_ed_mm, 0.0);
  c.lv_aspect = o.d("lv_aspect", c.lv_aspect);
  c.apex_scale = o.d("apex_scale", c.apex_scale);
  c.breathing_period_ms = o.d("breathing_period_ms", c.breathing_period_ms, 0.0);
  c.edge_blur_px = o.d("edge_blur_px", c.edge_blur_px, 0.0);
  Options in = o.sub("intensity");
  c.intensity.blood = in.d("blood", c.intensity.blood);
  c.intensity.myocardium = in.d("myocardium", c.intensity.myocardium);
  c.intensity.chest_wall = in.d("chest_wall", c.intensity.chest_wall);
  c.intensity.fat = in.d("fat", c.intensity.fat);
  c.intensity.background = in.d("background", c.intensity.background);
  in.done();
  o.done();
  c.validate();
  return c;
}

formats::ImageStack complex_stack(const std::vector<CImage>& imgs, int n_frames, int n_coils, double pixel_mm,
                                  double dt_ms, json meta) {
  formats::ImageStack s;
  s.height = imgs.at(0).height;
  s.width = imgs.at(0).width;
  s.n_frames = n_frames;
  s.n_coils = n_coils;
  s.dtype = formats::DType::C64;
  s.pixel_size_mm = pixel_mm;
  s.slice_thickness_mm = 1.0;
  s.frame_dt_ms = dt_ms;
  s.meta = meta.dump();
  s.allocate();
  for (int f = 0; f < n_frames; ++f)
    for (int c = 0; c < n_coils; ++c) s.set(f, 0, c, imgs[static_cast<std::size_t>(f) * n_coils + c]);
  return s;
}

std::vector<CImage> maps_from_stack(const formats::ImageStack& s) {
  require(s.dtype == formats::DType::C64 && s.n_frames == 1 && s.n_slices == 1, ErrorCode::ShapeMismatch,
          "coil maps must be a complex stack with one frame and one slice");
  std::vector<CImage> maps;
  for (int c = 0; c < s.n_coils; ++c) maps.push_back(s.complex_image(0, 0, c));
  return maps;
}

void check_pair(const RawAcquisition& raw, const traj::Trajectory& tr) {
  require(raw.arms_per_frame == tr.arms_per_frame && raw.samples_per_arm == tr.samples_per_arm,
          ErrorCode::ShapeMismatch,
          "acquisition (" + std::to_string(raw.arms_per_frame) + " arms x " + std::to_string(raw.samples_per_arm) +
              ") does not match trajectory (" + std::to_string(tr.arms_per_frame) + " x " +
              std::to_string(tr.samples_per_arm) + ")");
}

// Reconstruction grid: the FOV at the trajectory's Nyquist resolution.
int grid_for(const traj::Trajectory& tr) {
  const int n = 2 * static_cast<int>(std::ceil(tr.k_max() * (1.0 - 1e-6)));
  require(n >= 8, ErrorCode::InvalidArgument, "trajectory k_max too small for a reconstruction grid");
  return n;
}

Image<float> rss_float(const std::vector<CImage>& coil_images) {
  const RImage r = phantom::root_sum_of_squares(coil_images);
  Image<float> out(r.height, r.width);
  for (std::size_t i = 0; i < r.size(); ++i) out.data[i] = static_cast<float>(r.data[i]);
  return out;
}

json gating_report(const gating::GatingSignal& g, const std::vector<double>& b) {
  std::vector<double> spacing;
  for (std::size_t i = 1; i < b.size(); ++i) spacing.push_back(b[i] - b[i - 1]);
  double mean = 0.0;
  for (double s : spacing) mean += s;
  if (!spacing.empty()) mean /= static_cast<double>(spacing.size());
  return {{"arm_dt_ms", g.arm_dt_ms},
          {"n_arms", g.dc.size()},
          {"boundaries_ms", b},
          {"spacings_ms", spacing},
          {"mean_spacing_ms", mean},
          {"n_cycles", spacing.size()}};
}

}  // namespace

extern "C" {

const char* spiralrt_version(void) { return "1.0.0"; }

const char* spiralrt_status_name(int status) {
  if (status == SPIRALRT_OK) return "ok";
  switch (status) {
    case SPIRALRT_ERR_INVALID_ARGUMENT:
    case SPIRALRT_ERR_IO:
    case SPIRALRT_ERR_FORMAT:
    case SPIRALRT_ERR_CHECKSUM:
    case SPIRALRT_ERR_NUMERIC:
    case SPIRALRT_ERR_INSUFFICIENT_DATA:
    case SPIRALRT_ERR_SHAPE_MISMATCH:
    case SPIRALRT_ERR_INTERNAL:
      return to_string(static_cast<ErrorCode>(status));
    default:
      return "unknown";
  }
}

const char* spiralrt_last_error(void) { return g_error.c_str(); }
const char* spiralrt_last_report(void) { return g_report.c_str(); }

// ---------------------------------------------------------------- containers

int spiralrt_images_read(const char* path, spiralrt_images** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new spiralrt_images{formats::read_imgs(path ? path : "")};
  });
}

int spiralrt_images_write(const spiralrt_images* images, const char* path) {
  return guarded([&] { formats::write_imgs(path ? path : "", deref(images, "images").s); });
}

int spiralrt_images_create(int height, int width, int n_frames, int n_slices, int n_coils, int is_complex,
                           double pixel_size_mm, double slice_thickness_mm, double frame_dt_ms, const float* data,
                           spiralrt_images** out) {
  return guarded([&] {
    need_out(out, "out");
    require(height >= 1 && width >= 1 && n_frames >= 1 && n_slices >= 1 && n_coils >= 1, ErrorCode::InvalidArgument,
            "images_create: dimensions must be positive");
    require(data != nullptr, ErrorCode::InvalidArgument, "images_create: data is NULL");
    formats::ImageStack s;
    s.height = height;
    s.width = width;
    s.n_frames = n_frames;
    s.n_slices = n_slices;
    s.n_coils = n_coils;
    s.dtype = is_complex ? formats::DType::C64 : formats::DType::F32;
    s.pixel_size_mm = pixel_size_mm;
    s.slice_thickness_mm = slice_thickness_mm;
    s.frame_dt_ms = frame_dt_ms;
    s.allocate();
    std::copy(data, data + s.values.size(), s.values.begin());
    *out = new spiralrt_images{std::move(s)};
  });
}

int spiralrt_images_info(const spiralrt_images* images) {
  return guarded([&] {
    const auto& s = deref(images, "images").s;
    report(json{{"H", s.height},
                {"W", s.width},
                {"n_frames", s.n_frames},
                {"n_slices", s.n_slices},
                {"n_coils", s.n_coils},
                {"dtype", s.dtype == formats::DType::C64 ? "c64" : "f32"},
                {"pixel_size", s.pixel_size_mm},
                {"slice_thickness", s.slice_thickness_mm},
                {"frame_dt", s.frame_dt_ms},
                {"meta", json::parse(s.meta)}});
  });
}

int spiralrt_images_data(const spiralrt_images* images, const float** data, size_t* count) {
  return guarded([&] {
    need_out(data, "data");
    need_out(count, "count");
    const auto& s = deref(images, "images").s;
    *data = s.values.data();
    *count = s.values.size();
  });
}

void spiralrt_images_free(spiralrt_images* images) { delete images; }

int spiralrt_masks_read(const char* path, spiralrt_masks** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new spiralrt_masks{formats::read_mask(path ? path : "")};
  });
}

int spiralrt_masks_write(const spiralrt_masks* masks, const char* path) {
  return guarded([&] { formats::write_mask(path ? path : "", deref(masks, "masks").s); });
}

int spiralrt_masks_info(const spiralrt_masks* masks) {
  return guarded([&] {
    const auto& s = deref(masks, "masks").s;
    report(json{{"H", s.height},
                {"W", s.width},
                {"n_frames", s.n_frames},
                {"n_slices", s.n_slices},
                {"pixel_size", s.pixel_size_mm},
                {"slice_thickness", s.slice_thickness_mm},
                {"frame_dt", s.frame_dt_ms},
                {"legend", s.legend}});
  });
}

int spiralrt_masks_data(const spiralrt_masks* masks, const uint8_t** labels, size_t* count) {
  return guarded([&] {
    need_out(labels, "labels");
    need_out(count, "count");
    const auto& s = deref(masks, "masks").s;
    *labels = s.labels.data();
    *count = s.labels.size();
  });
}

void spiralrt_masks_free(spiralrt_masks* masks) { delete masks; }

int spiralrt_raw_read(const char* path, spiralrt_raw** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new spiralrt_raw{formats::read_rawk(path ? path : "")};
  });
}

int spiralrt_raw_write(const spiralrt_raw* raw, const char* path) {
  return guarded([&] { formats::write_rawk(path ? path : "", deref(raw, "raw").r); });
}

int spiralrt_raw_info(const spiralrt_raw* raw) {
  return guarded([&] {
    const auto& r = deref(raw, "raw").r;
    report(json{{"n_frames", r.n_frames},
                {"n_coils", r.n_coils},
                {"n_arms", r.arms_per_frame},
                {"samples_per_arm", r.samples_per_arm},
                {"dwell_time", r.dwell_us},
                {"frame_dt", r.frame_dt_ms},
                {"trajectory", r.trajectory_file}});
  });
}

int spiralrt_raw_set_trajectory_file(spiralrt_raw* raw, const char* name) {
  return guarded([&] {
    require(raw != nullptr && name != nullptr, ErrorCode::InvalidArgument, "raw_set_trajectory_file: NULL argument");
    raw->r.trajectory_file = name;
  });
}

void spiralrt_raw_free(spiralrt_raw* raw) { delete raw; }

int spiralrt_traj_read(const char* path, spiralrt_traj** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new spiralrt_traj{formats::read_traj(path ? path : "")};
  });
}

int spiralrt_traj_write(const spiralrt_traj* traj, const char* path) {
  return guarded([&] { formats::write_traj(path ? path : "", deref(traj, "traj").t); });
}

int spiralrt_traj_info(const spiralrt_traj* traj) {
  return guarded([&] {
    const auto& t = deref(traj, "traj").t;
    report(json{{"arms_per_frame", t.arms_per_frame},
                {"n_orientations", t.n_orientations},
                {"frames_per_orientation", t.frames_per_orientation},
                {"samples_per_arm", t.samples_per_arm},
                {"dwell_time", t.dwell_us},
                {"fov", t.fov_mm},
                {"k_max", t.k_max()}});
  });
}

void spiralrt_traj_free(spiralrt_traj* traj) { delete traj; }

// ---------------------------------------------------------------- pipeline

int spiralrt_phantom_generate(const char* config, spiralrt_images** images, spiralrt_masks** masks) {
  return guarded([&] {
    need_out(images, "images");
    need_out(masks, "masks");
    Options o(config, "phantom");
    const auto c = phantom_config(o);
    const auto ph = phantom::generate_phantom(c);
    formats::ImageStack s;
    s.height = s.width = c.grid_size;
    s.n_frames = c.n_frames;
    s.n_slices = c.n_slices;
    s.pixel_size_mm = c.pixel_size_mm;
    s.slice_thickness_mm = c.slice_thickness_mm;
    s.frame_dt_ms = c.frame_dt_ms;
    s.meta = json{{"kind", "phantom"}, {"seed", c.seed}}.dump();
    s.allocate();
    formats::MaskStack m;
    m.height = m.width = c.grid_size;
    m.n_frames = c.n_frames;
    m.n_slices = c.n_slices;
    m.pixel_size_mm = c.pixel_size_mm;
    m.slice_thickness_mm = c.slice_thickness_mm;
    m.frame_dt_ms = c.frame_dt_ms;
    m.allocate();
    for (int f = 0; f < c.n_frames; ++f)
      for (int sl = 0; sl < c.n_slices; ++sl) {
        s.set(f, sl, 0, ph.image(f, sl));
        m.set(f, sl, ph.mask(f, sl));
      }
    auto img = std::make_unique<spiralrt_images>(spiralrt_images{std::move(s)});
    auto msk = std::make_unique<spiralrt_masks>(spiralrt_masks{std::move(m)});
    report(json{{"grid_size", c.grid_size},
                {"pixel_size_mm", c.pixel_size_mm},
                {"fov_mm", c.fov_mm()},
                {"n_frames", c.n_frames},
                {"n_slices", c.n_slices},
                {"slice_thickness_mm", c.slice_thickness_mm},
                {"frame_dt_ms", c.frame_dt_ms},
                {"heart_period_ms", c.heart_period_ms},
                {"seed", c.seed},
                {"true_volume_ml", ph.true_volume_ml},
                {"frame_times_ms", ph.frame_times_ms},
                {"cycle_boundaries", ph.cycle_boundaries},
                {"cycle_start_ms", ph.cycle_start_ms},
                {"cycle_length_ms", ph.cycle_length_ms},
                {"edv_ml", ph.edv_ml},
                {"esv_ml", ph.esv_ml},
                {"ef_percent", 100.0 * (ph.edv_ml - ph.esv_ml) / ph.edv_ml}});
    *images = img.release();
    *masks = msk.release();
  });
}

int spiralrt_traj_design(const char* params, spiralrt_traj** out) {
  return guarded([&] {
    need_out(out, "out");
    Options o(params, "traj");
    traj::SpiralParams p;
    p.fov_mm = o.d("fov_mm", p.fov_mm, 1e-6);
    p.resolution_mm = o.d("resolution_mm", p.resolution_mm, 1e-6);
    p.n_arms = o.i("n_arms", p.n_arms, 1, 10000);
    p.max_gradient_mt_m = o.d("max_gradient", p.max_gradient_mt_m, 1e-6);
    p.max_slew_t_m_s = o.d("max_slew", p.max_slew_t_m_s, 1e-6);
    p.dwell_us = o.d("dwell_us", p.dwell_us, 1e-6);
    p.max_readout_us = o.d("max_readout_us", p.max_readout_us, 1e-6);
    const double recon_fov = o.d("recon_fov_mm", 165.12, 1e-6);
    const int n_orient = o.i("n_orientations", 1, 1, 10000);
    const int fpo = o.i("frames_per_orientation", 1, 1, 1000000);
    Options g = o.sub("gstf");
    const std::string model = g.s("model", "none");
    const double delay = g.d("delay_us", 0.0);
    const double cutoff = g.d("cutoff_hz", 10e3, 1e-6);
    g.done();
    o.done();

    const auto set = traj::design_spiral(p);
    const auto sched = traj::build_schedule(set, n_orient, fpo);
    traj::Trajectory t;
    json gj = nullptr;
    if (model == "none") {
      t = traj::make_trajectory(set, sched, recon_fov);
    } else {
      std::optional<traj::GstfModel> m;
      if (model == "identity")
        m = traj::GstfModel::identity(1e6, delay);
      else if (model == "lowpass")
        m = traj::GstfModel::low_pass(cutoff, 1e6, delay);
      else
        fail(ErrorCode::InvalidArgument, "traj: gstf.model must be none, identity or lowpass");
      t = traj::make_trajectory(traj::gstf_correct(set.base_arm, *m), set, sched, recon_fov);
      gj = {{"model", model}, {"delay_us", delay}};
      if (model == "lowpass") gj["cutoff_hz"] = cutoff;
    }
    const auto angles = sched.all_angles();
    std::vector<double> sorted = angles;
    for (auto& a : sorted) a = std::fmod(std::fmod(a, 2 * kPi) + 2 * kPi, 2 * kPi);
    std::sort(sorted.begin(), sorted.end());
    double gmin = 2 * kPi, gmax = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double gap = (i + 1 < sorted.size() ? sorted[i + 1] : sorted[0] + 2 * kPi) - sorted[i];
      gmin = std::min(gmin, gap);
      gmax = std::max(gmax, gap);
    }
    report(json{{"n_arms", set.n_arms},
                {"samples_per_arm", static_cast<int>(set.base_arm.samples.size())},
                {"readout_us", set.readout_us()},
                {"dwell_us", p.dwell_us},
                {"k_max_cycles_per_m", set.k_max()},
                {"k_max_cycles_per_fov", t.k_max()},
                {"nyquist_arms", set.nyquist_arms(p.fov_mm)},
                {"peak_gradient_mt_m", traj::peak_gradient(set.base_arm.gradient)},
                {"peak_slew_t_m_s", traj::peak_slew(set.base_arm.gradient, p.dwell_us)},
                {"recon_fov_mm", recon_fov},
                {"n_orientations", n_orient},
                {"frames_per_orientation", fpo},
                {"orientation_offsets", sched.offsets},
                {"distinct_angles", sorted.size()},
                {"min_angle_gap", gmin},
                {"max_angle_gap", gmax},
                {"gstf", gj}});
    *out = new spiralrt_traj{std::move(t)};
  });
}

int spiralrt_acquire(const spiralrt_images* phantom_imgs, const spiralrt_traj* traj, const char* options,
                     spiralrt_raw** raw, spiralrt_images** maps) {
  return guarded([&] {
    need_out(raw, "raw");
    const auto& ph = deref(phantom_imgs, "phantom").s;
    const auto& tr = deref(traj, "traj").t;
    Options o(options, "acquire");
    const int slice = o.i("slice", 0, 0, ph.n_slices - 1);
    const int n_coils = o.i("coils", 8, 1, 256);
    const double noise = o.d("noise", 0.0, 0.0);
    const std::uint64_t seed = o.u64("seed", 1);
    const std::uint64_t coil_seed = o.u64("coil_seed", seed);
    const int threads = o.i("threads", 1, 1, 1024);
    const std::string traj_file = o.s("trajectory_file", "");
    o.done();
    require(ph.height == ph.width && ph.n_coils == 1, ErrorCode::ShapeMismatch,
            "acquire: phantom images must be square single-coil images");
    const double fov = ph.pixel_size_mm * ph.width;
    require(std::abs(tr.fov_mm - fov) <= 1e-6 * fov, ErrorCode::ShapeMismatch,
            "acquire: trajectory FOV " + std::to_string(tr.fov_mm) + " mm differs from phantom FOV " +
                std::to_string(fov) + " mm");
    std::vector<CImage> frames;
    for (int f = 0; f < ph.n_frames; ++f) {
      const auto im = ph.magnitude_image(f, slice);
      CImage z(im.height, im.width);
      for (std::size_t i = 0; i < im.size(); ++i) z.data[i] = im.data[i];
      frames.push_back(std::move(z));
    }
    const auto coils = phantom::normalize_rss(phantom::generate_coils(n_coils, ph.width, coil_seed));
    auto r = phantom::simulate_kspace(frames, ph.frame_dt_ms, coils, tr, noise, seed, threads);
    r.trajectory_file = traj_file;
    std::unique_ptr<spiralrt_images> m;
    if (maps)
      m = std::make_unique<spiralrt_images>(spiralrt_images{
          complex_stack(coils.maps, 1, n_coils, ph.pixel_size_mm, ph.frame_dt_ms, {{"kind", "coil_maps"}})});
    report(json{{"n_frames", r.n_frames},
                {"n_coils", r.n_coils},
                {"n_arms", r.arms_per_frame},
                {"samples_per_arm", r.samples_per_arm},
                {"slice", slice},
                {"noise", noise},
                {"seed", seed},
                {"coil_seed", coil_seed}});
    *raw = new spiralrt_raw{std::move(r)};
    if (maps) *maps = m.release();
  });
}

int spiralrt_estimate_maps(const spiralrt_raw* raw, const spiralrt_traj* traj, const char* options,
                           spiralrt_images** maps) {
  return guarded([&] {
    need_out(maps, "maps");
    const auto& r = deref(raw, "raw").r;
    const auto& tr = deref(traj, "traj").t;
    check_pair(r, tr);
    Options o(options, "maps");
    const int grid = o.i("grid_size", grid_for(tr), 8, 4096);
    coils::WalshOptions w;
    w.block_size = o.i("block_size", w.block_size, 2, 1024);
    w.divisor = o.i("divisor", w.divisor, 1, 1024);
    w.threads = o.i("threads", 1, 1, 1024);
    o.done();
    const auto avg = coils::temporal_average(r, tr, grid, w.threads);
    const auto est = coils::walsh_maps(avg, w);
    report(json{{"grid_size", grid}, {"block_size", w.block_size}, {"divisor", w.divisor}});
    *maps = new spiralrt_images{
        complex_stack(est.maps, 1, r.n_coils, tr.fov_mm / grid, r.frame_dt_ms, {{"kind", "coil_maps"}})};
  });
}

int spiralrt_recon(const spiralrt_raw* raw, const spiralrt_traj* traj, const spiralrt_images* maps,
                   const char* options, spiralrt_images** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto& r = deref(raw, "raw").r;
    const auto& tr = deref(traj, "traj").t;
    check_pair(r, tr);
    Options o(options, "recon");
    recon::SeriesConfig cfg;
    cfg.method = recon::parse_method(o.s("method", "cgsense"));
    cfg.iters = o.i("iters", cfg.iters, 0, 100000);
    cfg.lambda = o.d("lambda", cfg.lambda, 0.0);
    cfg.lambda_l = o.d("lambda_l", cfg.lambda_l, 0.0);
    cfg.lambda_s = o.d("lambda_s", cfg.lambda_s, 0.0);
    cfg.levels = o.i("levels", cfg.levels, 1, 16);
    cfg.precondition = o.b("precondition", cfg.precondition);
    cfg.frames = o.ints("frames");
    const int threads = o.i("threads", 1, 1, 1024);
    Options wo = o.sub("walsh");
    coils::WalshOptions w;
    w.block_size = wo.i("block_size", w.block_size, 2, 1024);
    w.divisor = wo.i("divisor", w.divisor, 1, 1024);
    w.threads = threads;
    wo.done();
    const int grid_opt = o.i("grid_size", 0, 0, 4096);
    o.done();

    std::vector<CImage> m;
    std::string source;
    if (maps) {
      m = maps_from_stack(maps->s);
      require(static_cast<int>(m.size()) == r.n_coils, ErrorCode::ShapeMismatch,
              "recon: " + std::to_string(m.size()) + " coil maps for " + std::to_string(r.n_coils) + " coils");
      source = "given";
    } else {
      const int grid = grid_opt > 0 ? grid_opt : grid_for(tr);
      m = coils::walsh_maps(coils::temporal_average(r, tr, grid, threads), w).maps;
      source = "walsh";
    }
    const auto res = recon::reconstruct_series(r, tr, m, cfg, threads);
    std::vector<int> frames = cfg.frames;
    if (frames.empty())
      for (int f = 0; f < r.n_frames; ++f) frames.push_back(f);
    const int n = m[0].width;
    auto stack = complex_stack(res.images, static_cast<int>(res.images.size()), 1, tr.fov_mm / n, r.frame_dt_ms,
                               {{"kind", "recon"}, {"method", recon::method_name(cfg.method)}, {"frames", frames}});
    json rep = json::parse(res.to_json());
    rep["maps"] = source;
    rep["frames"] = frames;
    rep["grid_size"] = n;
    report(rep);
    *out = new spiralrt_images{std::move(stack)};
  });
}

int spiralrt_gate(const spiralrt_raw* raw, const spiralrt_traj* traj, const char* options) {
  return guarded([&] {
    const auto& r = deref(raw, "raw").r;
    const auto& tr = deref(traj, "traj").t;
    check_pair(r, tr);
    Options o(options, "gate");
    const double window = o.d("median_window_ms", 2000.0, 0.0);
    gating::CycleOptions c;
    c.band_lo_hz = o.d("band_lo_hz", c.band_lo_hz, 0.0);
    c.band_hi_hz = o.d("band_hi_hz", c.band_hi_hz, 0.0);
    c.min_distance_ms = o.d("min_distance_ms", c.min_distance_ms, 0.0);
    o.done();
    const auto g = gating::extract_gating(r, tr, window);
    report(gating_report(g, gating::detect_cycles(g, c)));
  });
}

int spiralrt_bin(const spiralrt_raw* raw, const spiralrt_traj* traj, const char* options, spiralrt_images** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto& r = deref(raw, "raw").r;
    const auto& tr = deref(traj, "traj").t;
    check_pair(r, tr);
    Options o(options, "bin");
    const int phases = o.i("phases", 16, 1, 10000);
    const int grid = o.i("grid_size", grid_for(tr), 8, 4096);
    const bool complete = o.b("require_complete", true);
    const int threads = o.i("threads", 1, 1, 1024);
    const double window = o.d("median_window_ms", 2000.0, 0.0);
    gating::CycleOptions c;
    c.band_lo_hz = o.d("band_lo_hz", c.band_lo_hz, 0.0);
    c.band_hi_hz = o.d("band_hi_hz", c.band_hi_hz, 0.0);
    c.min_distance_ms = o.d("min_distance_ms", c.min_distance_ms, 0.0);
    o.done();
    const auto g = gating::extract_gating(r, tr, window);
    const auto b = gating::detect_cycles(g, c);
    const auto seg = gating::bin_segmented(r, tr, b, phases, grid, complete, threads);
    formats::ImageStack s;
    s.height = s.width = grid;
    s.n_frames = phases;
    s.pixel_size_mm = tr.fov_mm / grid;
    s.frame_dt_ms = b.size() >= 2 ? (b.back() - b.front()) / (b.size() - 1) / phases : r.frame_dt_ms;
    s.meta = json{{"kind", "segmented"}, {"phases", phases}}.dump();
    s.allocate();
    for (int p = 0; p < phases; ++p) s.set(p, 0, 0, rss_float(seg.coil_images[p]));
    json rep = json::parse(seg.set.report_json());
    rep["gating"] = gating_report(g, b);
    report(rep);
    *out = new spiralrt_images{std::move(s)};
  });
}

int spiralrt_weights_init(const char* hyper, uint64_t seed, const char* path) {
  return guarded([&] {
    require(path != nullptr && *path != '\0', ErrorCode::InvalidArgument, "weights_init: path is empty");
    json h = json::object();
    if (hyper != nullptr && *hyper != '\0') {
      try {
        h = json::parse(hyper);
      } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string("weights_init: hyper is not valid JSON: ") + e.what());
      }
    }
    require(h.is_object(), ErrorCode::InvalidArgument, "weights_init: hyper must be a JSON object");
    static const std::set<std::string> known = {
        "n_factors",  "n_classes",   "z_dim",        "depth",      "base",         "kernel",
        "seg_channels", "seg_kernel", "mod_channels", "mod_hidden", "dec_channels", "dec_blocks",
        "fusion_depth", "fusion_base", "threshold",  "slope",      "bn_eps"};
    for (const auto& [k, v] : h.items())
      require(known.count(k) > 0, ErrorCode::InvalidArgument, "weights_init: unknown hyperparameter '" + k + "'");
    const auto hp = xsdnet::parse_hyper(json{{"format", "xsdnet"}, {"version", 1}, {"hyper", h}}.dump());
    const auto store = xsdnet::init_weights(hp, seed);
    const auto bytes = store.to_bytes();
    std::size_t params = 0;
    for (const auto& [name, t] : store.tensors())
      if (name != xsdnet::kManifestName) params += t.numel();
    io::write_file_atomic(path, bytes);
    report(json{{"tensors", store.tensors().size()}, {"parameters", params}, {"bytes", bytes.size()}, {"seed", seed}});
  });
}

int spiralrt_model_load(const char* path, spiralrt_model** out) {
  return guarded([&] {
    need_out(out, "out");
    require(path != nullptr, ErrorCode::InvalidArgument, "model_load: path is NULL");
    *out = new spiralrt_model(xsdnet::WeightStore::load(path));
  });
}

void spiralrt_model_free(spiralrt_model* model) { delete model; }

int spiralrt_infer(const spiralrt_model* model, const spiralrt_images* interim, int threads,
                   spiralrt_images** reconstruction, spiralrt_masks** segmentation) {
  return guarded([&] {
    need_out(reconstruction, "reconstruction");
    need_out(segmentation, "segmentation");
    const auto& m = deref(model, "model").m;
    const auto& in = deref(interim, "interim").s;
    require(in.n_coils == 1, ErrorCode::ShapeMismatch, "infer: interim must be coil-combined");
    require(threads >= 1, ErrorCode::InvalidArgument, "infer: threads must be >= 1");
    formats::ImageStack rec;
    rec.height = in.height;
    rec.width = in.width;
    rec.n_frames = in.n_frames;
    rec.n_slices = in.n_slices;
    rec.pixel_size_mm = in.pixel_size_mm;
    rec.slice_thickness_mm = in.slice_thickness_mm;
    rec.frame_dt_ms = in.frame_dt_ms;
    rec.meta = json{{"kind", "xsdnet"}}.dump();
    rec.allocate();
    formats::MaskStack seg;
    seg.height = in.height;
    seg.width = in.width;
    seg.n_frames = in.n_frames;
    seg.n_slices = in.n_slices;
    seg.pixel_size_mm = in.pixel_size_mm;
    seg.slice_thickness_mm = in.slice_thickness_mm;
    seg.frame_dt_ms = in.frame_dt_ms;
    seg.allocate();
    const int n = in.n_frames * in.n_slices;
    std::vector<std::vector<float>> z(n);
    parallel_for(n, threads, [&](int i) {
      const int f = i / in.n_slices, s = i % in.n_slices;
      auto o = m.infer(in.magnitude_image(f, s));
      rec.set(f, s, 0, o.reconstruction);
      seg.set(f, s, o.segmentation.mask);
      z[i] = std::move(o.z);
    });
    report(json{{"images", n}, {"modality_vectors", z}});
    auto r = std::make_unique<spiralrt_images>(spiralrt_images{std::move(rec)});
    *segmentation = new spiralrt_masks{std::move(seg)};
    *reconstruction = r.release();
  });
}

int spiralrt_volumetry(const spiralrt_masks* masks, const char* options) {
  return guarded([&] {
    const auto& s = deref(masks, "masks").s;
    Options o(options, "volumetry");
    const double px = o.d("pixel_size_mm", s.pixel_size_mm, 1e-9);
    const double th = o.d("slice_thickness_mm", s.slice_thickness_mm, 1e-9);
    const double dt = o.d("frame_dt_ms", s.frame_dt_ms, 1e-9);
    volumetry::ExtremaOptions e;
    e.min_prominence = o.d("min_prominence", e.min_prominence, 0.0, 1.0);
    e.min_separation_ms = o.d("min_separation_ms", e.min_separation_ms, 0.0);
    o.done();
    std::vector<std::vector<LabelImage>> per_slice(s.n_slices);
    for (int sl = 0; sl < s.n_slices; ++sl)
      for (int f = 0; f < s.n_frames; ++f) per_slice[sl].push_back(s.mask(f, sl));
    const auto curve = volumetry::mask_to_volume(per_slice, px, th, dt);
    const auto ext = volumetry::detect_extrema(curve, e);
    const auto ef = volumetry::ejection_fraction(ext.edv_ml, ext.esv_ml);
    report(volumetry::volume_report(curve, ext, ef));
  });
}

int spiralrt_eval_ba(const double* a, const double* b, size_t n) {
  return guarded([&] {
    require(n == 0 || (a != nullptr && b != nullptr), ErrorCode::InvalidArgument, "eval_ba: NULL data");
    const auto r = stats::bland_altman(std::span<const double>(a, n), std::span<const double>(b, n));
    report(r.to_json());
  });
}

int spiralrt_eval_nrmse(const spiralrt_images* x, const spiralrt_images* ref) {
  return guarded([&] {
    const auto& a = deref(x, "x").s;
    const auto& r = deref(ref, "ref").s;
    require(a.height == r.height && a.width == r.width && a.n_frames == r.n_frames && a.n_slices == r.n_slices &&
                a.n_coils == r.n_coils,
            ErrorCode::ShapeMismatch, "eval_nrmse: stacks differ in shape");
    std::vector<double> all_a, all_r, per;
    for (int f = 0; f < a.n_frames; ++f)
      for (int s = 0; s < a.n_slices; ++s)
        for (int c = 0; c < a.n_coils; ++c) {
          const auto ia = a.magnitude_image(f, s, c), ir = r.magnitude_image(f, s, c);
          std::vector<double> da(ia.data.begin(), ia.data.end()), dr(ir.data.begin(), ir.data.end());
          per.push_back(stats::nrmse(std::span<const double>(da), std::span<const double>(dr)));
          all_a.insert(all_a.end(), da.begin(), da.end());
          all_r.insert(all_r.end(), dr.begin(), dr.end());
        }
    const double p = stats::psnr(std::span<const double>(all_a), std::span<const double>(all_r));
    json j = {{"nrmse", stats::nrmse(std::span<const double>(all_a), std::span<const double>(all_r))},
              {"per_image_nrmse", per},
              {"comparison", "magnitude"}};
    j["psnr_db"] = std::isfinite(p) ? json(p) : json("inf");
    report(j);
  });
}

int spiralrt_eval_dice(const spiralrt_masks* a, const spiralrt_masks* b, int label) {
  return guarded([&] {
    const auto& x = deref(a, "a").s;
    const auto& y = deref(b, "b").s;
    require(x.height == y.height && x.width == y.width && x.n_frames == y.n_frames && x.n_slices == y.n_slices,
            ErrorCode::ShapeMismatch, "eval_dice: stacks differ in shape");
    require(label >= 0 && label < 256, ErrorCode::InvalidArgument, "eval_dice: label out of range");
    std::vector<double> per;
    double sum = 0.0;
    for (int f = 0; f < x.n_frames; ++f)
      for (int s = 0; s < x.n_slices; ++s) {
        per.push_back(stats::dice(x.mask(f, s), y.mask(f, s), static_cast<std::uint8_t>(label)));
        sum += per.back();
      }
    // Pooled over the whole stack as well as per image.
    LabelImage pa(1, static_cast<int>(x.labels.size())), pb(1, static_cast<int>(y.labels.size()));
    std::copy(x.labels.begin(), x.labels.end(), pa.data.begin());
    std::copy(y.labels.begin(), y.labels.end(), pb.data.begin());
    report(json{{"label", label},
                {"dice", stats::dice(pa, pb, static_cast<std::uint8_t>(label))},
                {"mean_dice", sum / static_cast<double>(per.size())},
                {"per_image_dice", per}});
  });
}

}  // extern "C"
