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

// spiralrt command-line tool. Thin wrapper over the C API.

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spiralrt/spiralrt.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Failure carrying a status code and a ready-made error JSON.
struct CliError {
  int status;
  std::string json;
};

[[noreturn]] void usage_error(const std::string& msg, const std::string& file = "") {
  json j = {{"status", SPIRALRT_ERR_INVALID_ARGUMENT}, {"error", "invalid_argument"}, {"message", msg}};
  if (!file.empty()) j["file"] = file;
  throw CliError{SPIRALRT_ERR_INVALID_ARGUMENT, j.dump()};
}

void check(int status) {
  if (status != SPIRALRT_OK) throw CliError{status, spiralrt_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Images = std::unique_ptr<spiralrt_images, Deleter<spiralrt_images, spiralrt_images_free>>;
using Masks = std::unique_ptr<spiralrt_masks, Deleter<spiralrt_masks, spiralrt_masks_free>>;
using Raw = std::unique_ptr<spiralrt_raw, Deleter<spiralrt_raw, spiralrt_raw_free>>;
using Traj = std::unique_ptr<spiralrt_traj, Deleter<spiralrt_traj, spiralrt_traj_free>>;
using Model = std::unique_ptr<spiralrt_model, Deleter<spiralrt_model, spiralrt_model_free>>;

Images read_images(const std::string& path) {
  spiralrt_images* p = nullptr;
  check(spiralrt_images_read(path.c_str(), &p));
  return Images(p);
}
Masks read_masks(const std::string& path) {
  spiralrt_masks* p = nullptr;
  check(spiralrt_masks_read(path.c_str(), &p));
  return Masks(p);
}
Raw read_raw(const std::string& path) {
  spiralrt_raw* p = nullptr;
  check(spiralrt_raw_read(path.c_str(), &p));
  return Raw(p);
}
Traj read_traj(const std::string& path) {
  spiralrt_traj* p = nullptr;
  check(spiralrt_traj_read(path.c_str(), &p));
  return Traj(p);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const json j = {{"status", SPIRALRT_ERR_IO}, {"error", "io"}, {"message", "cannot open '" + path + "'"},
                    {"file", path}};
    throw CliError{SPIRALRT_ERR_IO, j.dump()};
  }
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json parse_json_file(const std::string& path) {
  const std::string text = slurp(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const json j = {{"status", SPIRALRT_ERR_FORMAT}, {"error", "format"},
                    {"message", path + ": " + e.what()}, {"file", path}, {"offset", e.byte}};
    throw CliError{SPIRALRT_ERR_FORMAT, j.dump()};
  }
}

// Text output: temp file in the target directory, then rename.
void write_text_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) {
      const json j = {{"status", SPIRALRT_ERR_IO}, {"error", "io"}, {"message", "cannot write '" + path + "'"},
                      {"file", path}};
      throw CliError{SPIRALRT_ERR_IO, j.dump()};
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    const json j = {{"status", SPIRALRT_ERR_IO}, {"error", "io"}, {"message", "cannot rename onto '" + path + "'"},
                    {"file", path}};
    throw CliError{SPIRALRT_ERR_IO, j.dump()};
  }
}

// Report of the last call: to a file when given, else stdout.
void emit_report(const std::string& path) {
  std::string text = spiralrt_last_report();
  if (text.empty() || text.back() != '\n') text += '\n';
  if (path.empty())
    std::cout << text;
  else
    write_text_atomic(path, text);
}

// Numbers from a JSON array or a comma / whitespace separated list.
std::vector<double> read_numbers(const std::string& path) {
  const std::string text = slurp(path);
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i < text.size() && text[i] == '[') {
    const json j = parse_json_file(path);
    std::vector<double> v;
    for (const auto& e : j) {
      if (!e.is_number()) usage_error(path + ": array must hold numbers", path);
      v.push_back(e.get<double>());
    }
    return v;
  }
  std::vector<double> v;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++i;
      continue;
    }
    const char* start = text.c_str() + i;
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(start, &end);
    if (end == start || errno == ERANGE) {
      const json j = {{"status", SPIRALRT_ERR_FORMAT}, {"error", "format"},
                      {"message", path + ": not a number"}, {"file", path}, {"offset", i}};
      throw CliError{SPIRALRT_ERR_FORMAT, j.dump()};
    }
    v.push_back(x);
    i += static_cast<std::size_t>(end - start);
  }
  return v;
}

std::string in_dir(const std::string& p, const char* name) {
  return fs::is_directory(p) ? (fs::path(p) / name).string() : p;
}

struct Common {
  int threads = 1;
  std::string report;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiral real-time cardiac MRI toolkit"};
  app.set_version_flag("--version", std::string(spiralrt_version()));
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::Range(1, 1024));

  std::function<void()> run;
  auto add_report = [&](CLI::App* c) { c->add_option("--report", common.report, "Write the JSON report here"); };

  // phantom gen
  auto* ph = app.add_subcommand("phantom", "Analytic beating-heart phantom");
  ph->require_subcommand(1);
  auto* ph_gen = ph->add_subcommand("gen", "Generate images, masks and ground truth");
  std::string ph_config, ph_out;
  ph_gen->add_option("--config", ph_config, "JSON configuration file");
  ph_gen->add_option("--out", ph_out, "Output directory")->required();
  ph_gen->callback([&] {
    run = [&] {
      const std::string cfg = ph_config.empty() ? "{}" : parse_json_file(ph_config).dump();
      spiralrt_images* im = nullptr;
      spiralrt_masks* mk = nullptr;
      check(spiralrt_phantom_generate(cfg.c_str(), &im, &mk));
      Images images(im);
      Masks masks(mk);
      const std::string truth = spiralrt_last_report();
      fs::create_directories(ph_out);
      check(spiralrt_images_write(images.get(), (fs::path(ph_out) / "images.imgs").c_str()));
      check(spiralrt_masks_write(masks.get(), (fs::path(ph_out) / "masks.mask").c_str()));
      write_text_atomic((fs::path(ph_out) / "truth.json").string(), truth + "\n");
    };
  });

  // traj design | schedule | gstf
  auto* tr = app.add_subcommand("traj", "Spiral trajectories");
  tr->require_subcommand(1);
  struct TrajArgs {
    std::string params, out, model = "identity";
    double fov = 74.0, res = 1.29, gmax = 40.0, slew = 150.0, dwell = 2.5, recon_fov = 165.12;
    double delay = 0.0, cutoff = 10e3;
    int arms = 13, orientations = 8, fpo = 1;
  } ta;
  auto traj_common = [&](CLI::App* c) {
    c->add_option("--params", ta.params, "JSON parameter file (flags override)");
    c->add_option("--fov", ta.fov, "Design FOV (mm)");
    c->add_option("--resolution", ta.res, "Resolution (mm)");
    c->add_option("--arms", ta.arms, "Interleaves per frame");
    c->add_option("--max-gradient", ta.gmax, "mT/m");
    c->add_option("--max-slew", ta.slew, "T/m/s");
    c->add_option("--dwell", ta.dwell, "Dwell time (us)");
    c->add_option("--recon-fov", ta.recon_fov, "Reconstruction FOV (mm)");
    c->add_option("--out", ta.out, "Output TRAJ file")->required();
    add_report(c);
  };
  auto traj_run = [&](CLI::App* c, const std::string& kind) {
    return [&, c, kind] {
      json p = ta.params.empty() ? json::object() : parse_json_file(ta.params);
      if (!p.is_object()) usage_error("--params must hold a JSON object", ta.params);
      auto set = [&](const char* flag, const char* key, auto value) {
        if (c->count(flag) > 0 || !p.contains(key)) p[key] = value;
      };
      set("--fov", "fov_mm", ta.fov);
      set("--resolution", "resolution_mm", ta.res);
      set("--arms", "n_arms", ta.arms);
      set("--max-gradient", "max_gradient", ta.gmax);
      set("--max-slew", "max_slew", ta.slew);
      set("--dwell", "dwell_us", ta.dwell);
      set("--recon-fov", "recon_fov_mm", ta.recon_fov);
      if (kind == "design") {
        p["n_orientations"] = 1;
        p["frames_per_orientation"] = 1;
      } else {
        set("--orientations", "n_orientations", ta.orientations);
        set("--frames-per-orientation", "frames_per_orientation", ta.fpo);
      }
      if (kind == "gstf") {
        json g = {{"model", ta.model}, {"delay_us", ta.delay}};
        if (ta.model == "lowpass") g["cutoff_hz"] = ta.cutoff;
        p["gstf"] = g;
      }
      const std::string text = p.dump();
      spiralrt_traj* t = nullptr;
      check(spiralrt_traj_design(text.c_str(), &t));
      Traj traj(t);
      const std::string rep = spiralrt_last_report();
      check(spiralrt_traj_write(traj.get(), ta.out.c_str()));
      if (common.report.empty())
        std::cout << rep << "\n";
      else
        write_text_atomic(common.report, rep + "\n");
    };
  };
  auto* tr_design = tr->add_subcommand("design", "Single-orientation interleave set");
  traj_common(tr_design);
  auto* tr_sched = tr->add_subcommand("schedule", "Interleaves rotated over several orientations");
  traj_common(tr_sched);
  tr_sched->add_option("--orientations", ta.orientations, "Orientations");
  tr_sched->add_option("--frames-per-orientation", ta.fpo, "Frames per orientation");
  auto* tr_gstf = tr->add_subcommand("gstf", "Schedule with gradient-system correction");
  traj_common(tr_gstf);
  tr_gstf->add_option("--orientations", ta.orientations, "Orientations");
  tr_gstf->add_option("--frames-per-orientation", ta.fpo, "Frames per orientation");
  tr_gstf->add_option("--model", ta.model, "identity or lowpass")->check(CLI::IsMember({"identity", "lowpass"}));
  tr_gstf->add_option("--delay-us", ta.delay, "Pure delay (us)");
  tr_gstf->add_option("--cutoff-hz", ta.cutoff, "Low-pass cutoff (Hz)");
  tr_design->callback([&] { run = traj_run(tr_design, "design"); });
  tr_sched->callback([&] { run = traj_run(tr_sched, "schedule"); });
  tr_gstf->callback([&] { run = traj_run(tr_gstf, "gstf"); });

  // acquire
  auto* acq = app.add_subcommand("acquire", "Simulate multi-coil spiral k-space");
  std::string acq_phantom, acq_traj, acq_out, acq_maps;
  int acq_coils = 8, acq_slice = 0;
  double acq_noise = 0.0;
  std::uint64_t acq_seed = 1;
  acq->add_option("--phantom", acq_phantom, "Phantom directory or IMGS file")->required();
  acq->add_option("--traj", acq_traj, "TRAJ file")->required();
  acq->add_option("--coils", acq_coils, "Receive coils")->check(CLI::Range(1, 256));
  acq->add_option("--noise", acq_noise, "Relative noise sigma")->check(CLI::NonNegativeNumber);
  acq->add_option("--seed", acq_seed, "Noise and coil seed");
  acq->add_option("--slice", acq_slice, "Slice index");
  acq->add_option("--out", acq_out, "Output RAWK file")->required();
  acq->add_option("--maps-out", acq_maps, "Write the true coil maps (IMGS)");
  add_report(acq);
  acq->callback([&] {
    run = [&] {
      Images ph_imgs = read_images(in_dir(acq_phantom, "images.imgs"));
      Traj traj = read_traj(acq_traj);
      const json o = {{"coils", acq_coils}, {"noise", acq_noise}, {"seed", acq_seed}, {"slice", acq_slice},
                      {"threads", common.threads}, {"trajectory_file", fs::path(acq_traj).filename().string()}};
      spiralrt_raw* r = nullptr;
      spiralrt_images* m = nullptr;
      check(spiralrt_acquire(ph_imgs.get(), traj.get(), o.dump().c_str(), &r, acq_maps.empty() ? nullptr : &m));
      Raw raw(r);
      Images maps(m);
      const std::string rep = spiralrt_last_report();
      check(spiralrt_raw_write(raw.get(), acq_out.c_str()));
      if (maps) check(spiralrt_images_write(maps.get(), acq_maps.c_str()));
      if (common.report.empty())
        std::cout << rep << "\n";
      else
        write_text_atomic(common.report, rep + "\n");
    };
  });

  // maps
  auto* mp = app.add_subcommand("maps", "Walsh coil maps from the temporal average");
  std::string mp_raw, mp_traj, mp_out;
  mp->add_option("--raw", mp_raw, "RAWK file")->required();
  mp->add_option("--traj", mp_traj, "TRAJ file")->required();
  mp->add_option("--out", mp_out, "Output IMGS file")->required();
  mp->callback([&] {
    run = [&] {
      Raw raw = read_raw(mp_raw);
      Traj traj = read_traj(mp_traj);
      const json o = {{"threads", common.threads}};
      spiralrt_images* m = nullptr;
      check(spiralrt_estimate_maps(raw.get(), traj.get(), o.dump().c_str(), &m));
      Images maps(m);
      check(spiralrt_images_write(maps.get(), mp_out.c_str()));
    };
  });

  // recon
  auto* rc = app.add_subcommand("recon", "Reconstruct frames");
  std::string rc_raw, rc_traj, rc_maps, rc_out, rc_method = "cgsense", rc_frames;
  int rc_iters = 10, rc_levels = 3;
  double rc_lambda = 0.002, rc_ll = 0.01, rc_ls = 0.02;
  bool rc_pre = false;
  rc->add_option("--raw", rc_raw, "RAWK file")->required();
  rc->add_option("--traj", rc_traj, "TRAJ file")->required();
  rc->add_option("--maps", rc_maps, "Coil maps (IMGS); estimated when omitted");
  rc->add_option("--method", rc_method, "gridding, cgsense, cs or lrs")
      ->check(CLI::IsMember({"gridding", "cgsense", "cs", "lrs"}));
  rc->add_option("--iters", rc_iters, "Iterations")->check(CLI::NonNegativeNumber);
  rc->add_option("--lambda", rc_lambda, "l1-wavelet weight (cs)");
  rc->add_option("--lambda-l", rc_ll, "Low-rank threshold (lrs)");
  rc->add_option("--lambda-s", rc_ls, "Sparse threshold (lrs)");
  rc->add_option("--levels", rc_levels, "Wavelet levels (cs)");
  rc->add_flag("--precondition", rc_pre, "Density-preconditioned CG");
  rc->add_option("--frames", rc_frames, "Comma-separated frame indices (default all)");
  rc->add_option("--out", rc_out, "Output IMGS file")->required();
  add_report(rc);
  rc->callback([&] {
    run = [&] {
      Raw raw = read_raw(rc_raw);
      Traj traj = read_traj(rc_traj);
      Images maps;
      if (!rc_maps.empty()) maps = read_images(rc_maps);
      json o = {{"method", rc_method}, {"iters", rc_iters},  {"lambda", rc_lambda}, {"lambda_l", rc_ll},
                {"lambda_s", rc_ls},   {"levels", rc_levels}, {"precondition", rc_pre}, {"threads", common.threads}};
      if (!rc_frames.empty()) {
        std::vector<int> frames;
        std::stringstream ss(rc_frames);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          try {
            std::size_t used = 0;
            frames.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
          } catch (const std::exception&) {
            usage_error("--frames: '" + tok + "' is not an integer");
          }
        }
        o["frames"] = frames;
      }
      spiralrt_images* out = nullptr;
      check(spiralrt_recon(raw.get(), traj.get(), maps.get(), o.dump().c_str(), &out));
      Images images(out);
      const std::string rep = spiralrt_last_report();
      check(spiralrt_images_write(images.get(), rc_out.c_str()));
      if (common.report.empty())
        std::cout << rep << "\n";
      else
        write_text_atomic(common.report, rep + "\n");
    };
  });

  // gate
  auto* gt = app.add_subcommand("gate", "Self-gating report");
  std::string gt_raw, gt_traj;
  gt->add_option("--raw", gt_raw, "RAWK file")->required();
  gt->add_option("--traj", gt_traj, "TRAJ file")->required();
  add_report(gt);
  gt->callback([&] {
    run = [&] {
      Raw raw = read_raw(gt_raw);
      Traj traj = read_traj(gt_traj);
      check(spiralrt_gate(raw.get(), traj.get(), nullptr));
      emit_report(common.report);
    };
  });

  // bin
  auto* bn = app.add_subcommand("bin", "Segmented binning into fully sampled phases");
  std::string bn_raw, bn_traj, bn_out;
  int bn_phases = 16;
  bool bn_partial = false;
  bn->add_option("--raw", bn_raw, "RAWK file")->required();
  bn->add_option("--traj", bn_traj, "TRAJ file")->required();
  bn->add_option("--phases", bn_phases, "Cardiac phases")->check(CLI::Range(1, 10000));
  bn->add_flag("--allow-incomplete", bn_partial, "Accept phases with missing orientations");
  bn->add_option("--out", bn_out, "Output IMGS file")->required();
  add_report(bn);
  bn->callback([&] {
    run = [&] {
      Raw raw = read_raw(bn_raw);
      Traj traj = read_traj(bn_traj);
      const json o = {{"phases", bn_phases}, {"require_complete", !bn_partial}, {"threads", common.threads}};
      spiralrt_images* out = nullptr;
      check(spiralrt_bin(raw.get(), traj.get(), o.dump().c_str(), &out));
      Images images(out);
      const std::string rep = spiralrt_last_report();
      check(spiralrt_images_write(images.get(), bn_out.c_str()));
      if (common.report.empty())
        std::cout << rep << "\n";
      else
        write_text_atomic(common.report, rep + "\n");
    };
  });

  // infer
  auto* inf = app.add_subcommand("infer", "xSDNet segmentation and reconstruction");
  std::string inf_w, inf_in, inf_out, inf_mask;
  inf->add_option("--weights", inf_w, "XSDW weights file")->required();
  inf->add_option("--interim", inf_in, "Interim IMGS (e.g. CG-SENSE output)")->required();
  inf->add_option("--out", inf_out, "Output reconstruction IMGS")->required();
  inf->add_option("--mask-out", inf_mask, "Output segmentation MASK")->required();
  add_report(inf);
  inf->callback([&] {
    run = [&] {
      spiralrt_model* m = nullptr;
      check(spiralrt_model_load(inf_w.c_str(), &m));
      Model model(m);
      Images interim = read_images(inf_in);
      spiralrt_images* r = nullptr;
      spiralrt_masks* s = nullptr;
      check(spiralrt_infer(model.get(), interim.get(), common.threads, &r, &s));
      Images rec(r);
      Masks seg(s);
      const std::string rep = spiralrt_last_report();
      check(spiralrt_images_write(rec.get(), inf_out.c_str()));
      check(spiralrt_masks_write(seg.get(), inf_mask.c_str()));
      if (common.report.empty())
        std::cout << rep << "\n";
      else
        write_text_atomic(common.report, rep + "\n");
    };
  });

  // volumetry
  auto* vol = app.add_subcommand("volumetry", "Volume curve and ejection fraction");
  std::string vol_masks;
  double vol_px = 0.0, vol_th = 0.0, vol_dt = 0.0;
  vol->add_option("--masks", vol_masks, "MASK file or phantom directory")->required();
  vol->add_option("--pixel-size", vol_px, "Pixel size (mm); default from the file")->check(CLI::PositiveNumber);
  vol->add_option("--thickness", vol_th, "Slice thickness (mm); default from the file")->check(CLI::PositiveNumber);
  vol->add_option("--frame-dt", vol_dt, "Frame spacing (ms); default from the file")->check(CLI::PositiveNumber);
  add_report(vol);
  vol->callback([&] {
    run = [&] {
      Masks masks = read_masks(in_dir(vol_masks, "masks.mask"));
      json o = json::object();
      if (vol_px > 0) o["pixel_size_mm"] = vol_px;
      if (vol_th > 0) o["slice_thickness_mm"] = vol_th;
      if (vol_dt > 0) o["frame_dt_ms"] = vol_dt;
      check(spiralrt_volumetry(masks.get(), o.dump().c_str()));
      emit_report(common.report);
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Agreement and quality metrics");
  ev->require_subcommand(1);
  std::string ev_a, ev_b;
  int ev_label = 1;
  auto eval_common = [&](CLI::App* c) {
    c->add_option("--a", ev_a, "First input")->required();
    c->add_option("--b", ev_b, "Second input (reference)")->required();
    add_report(c);
  };
  auto* ev_ba = ev->add_subcommand("ba", "Bland-Altman of two value lists");
  eval_common(ev_ba);
  ev_ba->callback([&] {
    run = [&] {
      const auto a = read_numbers(ev_a), b = read_numbers(ev_b);
      if (a.size() != b.size())
        usage_error("eval ba: " + std::to_string(a.size()) + " values in --a, " + std::to_string(b.size()) +
                    " in --b");
      check(spiralrt_eval_ba(a.data(), b.data(), a.size()));
      emit_report(common.report);
    };
  });
  auto* ev_nrmse = ev->add_subcommand("nrmse", "NRMSE and PSNR of two IMGS stacks");
  eval_common(ev_nrmse);
  ev_nrmse->callback([&] {
    run = [&] {
      Images a = read_images(ev_a), b = read_images(ev_b);
      check(spiralrt_eval_nrmse(a.get(), b.get()));
      emit_report(common.report);
    };
  });
  auto* ev_dice = ev->add_subcommand("dice", "Dice overlap of two MASK stacks");
  eval_common(ev_dice);
  ev_dice->add_option("--label", ev_label, "Label (1 = LV)")->check(CLI::Range(0, 255));
  ev_dice->callback([&] {
    run = [&] {
      Masks a = read_masks(ev_a), b = read_masks(ev_b);
      check(spiralrt_eval_dice(a.get(), b.get(), ev_label));
      emit_report(common.report);
    };
  });

  // weights init
  auto* wt = app.add_subcommand("weights", "xSDNet weight files");
  wt->require_subcommand(1);
  auto* wt_init = wt->add_subcommand("init", "Seeded random weights for a topology");
  std::string wt_hyper, wt_out;
  std::uint64_t wt_seed = 1;
  wt_init->add_option("--hyper", wt_hyper, "JSON file with topology parameters");
  wt_init->add_option("--seed", wt_seed, "Seed");
  wt_init->add_option("--out", wt_out, "Output XSDW file")->required();
  add_report(wt_init);
  wt_init->callback([&] {
    run = [&] {
      const std::string h = wt_hyper.empty() ? "{}" : parse_json_file(wt_hyper).dump();
      check(spiralrt_weights_init(h.c_str(), wt_seed, wt_out.c_str()));
      emit_report(common.report);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"status", SPIRALRT_ERR_INVALID_ARGUMENT}, {"error", "invalid_argument"},
                      {"message", e.what()}}.dump()
              << "\n";
    return SPIRALRT_ERR_INVALID_ARGUMENT;
  }
  try {
    if (run) run();
  } catch (const CliError& e) {
    std::cerr << e.json << "\n";
    return e.status;
  } catch (const std::exception& e) {
    std::cerr << json{{"status", SPIRALRT_ERR_INTERNAL}, {"error", "internal"}, {"message", e.what()}}.dump()
              << "\n";
    return SPIRALRT_ERR_INTERNAL;
  }
  return 0;
}
