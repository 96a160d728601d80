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

// Acceptance suite: one PASS/FAIL line per criterion, each with its own
// tolerance and wall-clock limit. Exit status is the number of failures.

#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "spiralrt/coils.hpp"
#include "spiralrt/evalstats.hpp"
#include "spiralrt/gating.hpp"
#include "spiralrt/nufft.hpp"
#include "spiralrt/recon.hpp"
#include "spiralrt/volumetry.hpp"
#include "spiralrt/xsdnet.hpp"
#include "xsdnet_oracles.hpp"

using namespace spiralrt;

namespace {

// Each check appends "name=value (limit)" to the detail line and clears ok on failure.
struct Verdict {
  bool ok = true;
  std::ostringstream detail;

  void le(const char* name, double value, double limit) {
    note(name, value, "<=", limit);
    ok = ok && value <= limit;
  }
  void lt(const char* name, double value, double limit) {
    note(name, value, "<", limit);
    ok = ok && value < limit;
  }
  void in(const char* name, double value, double lo, double hi) {
    detail << " " << name << "=" << value << " [" << lo << "," << hi << "]";
    ok = ok && value >= lo && value <= hi;
  }
  void is(const char* name, bool v) {
    detail << " " << name << "=" << (v ? "yes" : "NO");
    ok = ok && v;
  }

 private:
  void note(const char* name, double value, const char* op, double limit) {
    detail << " " << name << "=" << value << " (" << op << " " << limit << ")";
  }
};

int failures = 0;

void criterion(const char* name, double limit_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  v.detail.precision(4);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.ok = false;
    v.detail << " exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = v.ok && secs < limit_s;
  failures += !pass;
  std::printf("%s  %-14s %.2f s (< %.0f s)%s\n", pass ? "PASS" : "FAIL", name, secs, limit_s,
              v.detail.str().c_str());
  std::fflush(stdout);
}

std::vector<double> mag(const CImage& img) {
  std::vector<double> v(img.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(img.data[i]);
  return v;
}

struct Sim {
  phantom::DynamicPhantom ph;
  traj::Trajectory tr;
  RawAcquisition raw;
};

Sim simulate(phantom::PhantomConfig c, int n_coils, int coil_seed, int frames_per_orientation = 1) {
  Sim s{phantom::generate_phantom(c), fixture::protocol_trajectory(c.fov_mm(), frames_per_orientation), {}};
  const auto coils = phantom::normalize_rss(phantom::generate_coils(n_coils, c.grid_size, coil_seed));
  s.raw = phantom::simulate_kspace(s.ph, 0, coils, s.tr, 0.0, 9);
  return s;
}

void nufft_checks(Verdict& v) {
  std::mt19937 rng(5);
  const int n = 64;
  double dot_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pos = oracle::random_positions(500, n, rng);
    const nufft::GriddingPlan plan(pos, n);
    const CImage x = oracle::random_image(n, rng);
    const auto y = oracle::random_samples(pos.size(), rng);
    const cplx lhs = dot(plan.forward(x), y);
    const cplx rhs = dot(x.span(), plan.adjoint(y).span());
    dot_worst = std::max(dot_worst, std::abs(lhs - rhs) / (norm2(x.span()) * norm2(std::span<const cplx>(y))));
  }
  v.lt("dot_test", dot_worst, 1e-6);
  const CImage img = oracle::random_image(n, rng);
  const auto pos = oracle::random_positions(600, n, rng);
  v.lt("vs_dft", oracle::rel_l2(nufft::GriddingPlan(pos, n, 2.0, 6).forward(img), oracle::direct_dft(img, pos)),
       1e-3);
}

void spiral_checks(Verdict& v) {
  const auto set = traj::design_spiral(traj::SpiralParams{});
  v.is("arms=13", set.n_arms == 13);
  double dev = 0.0;
  for (int j = 0; j < set.n_arms; ++j) dev = std::max(dev, std::abs(set.angles[j] - 2 * kPi * j / 13));
  v.le("spacing_err", dev, 1e-15);
  const int brute = oracle::brute_force_nyquist_arms(set, 0.320, 13);
  v.in("nyquist_ratio", brute / 13.0, 4.0, 6.0);
}

void schedule_checks(Verdict& v) {
  const auto set = traj::design_spiral(traj::SpiralParams{});
  auto angles = traj::build_schedule(set, 8, 21).all_angles();
  for (double& a : angles) a = std::fmod(a, 2 * kPi);
  std::sort(angles.begin(), angles.end());
  double lo = 1e300, hi = 0.0;
  int distinct = angles.empty() ? 0 : 1;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double next = i + 1 < angles.size() ? angles[i + 1] : angles[0] + 2 * kPi;
    lo = std::min(lo, next - angles[i]);
    hi = std::max(hi, next - angles[i]);
    if (i + 1 < angles.size() && next - angles[i] > 1e-9) ++distinct;
  }
  v.is("104_distinct", distinct == 104);
  v.lt("gap_err", std::max(std::abs(lo - 2 * kPi / 104), std::abs(hi - 2 * kPi / 104)), 1e-9);
}

void gstf_checks(Verdict& v) {
  const auto set = traj::design_spiral(traj::SpiralParams{});
  const auto& arm = set.base_arm;
  const auto id = traj::gstf_correct(arm, traj::GstfModel::identity());
  double worst = 0.0;
  for (std::size_t i = 0; i < id.samples.size(); ++i)
    worst = std::max(worst, std::hypot(id.samples[i].kx - arm.samples[i].kx, id.samples[i].ky - arm.samples[i].ky));
  v.lt("identity", worst / set.k_max(), 1e-9);
  double delay_worst = 0.0;
  for (double delay_us : {5.0, 3.75, 1.3}) {
    const auto out = traj::gstf_correct(arm, traj::GstfModel::identity(1e6, delay_us));
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      const double t = i * arm.dwell_us * 1e-6 - delay_us * 1e-6;
      const KPoint ref = t > 0 ? set.analytic_k(t) : KPoint{0.0, 0.0};
      delay_worst = std::max(delay_worst, std::hypot(out.samples[i].kx - ref.kx, out.samples[i].ky - ref.ky));
    }
  }
  v.lt("delay", delay_worst / set.k_max(), 1e-6);
}

void cg_checks(Verdict& v) {
  auto c = fixture::small_config(16, 1);
  c.seed = 11;
  const auto s = simulate(c, 8, 4);
  const auto maps = coils::walsh_maps(coils::temporal_average(s.raw, s.tr, c.grid_size)).maps;
  const int f = 5;
  const auto plan = std::make_shared<const nufft::GriddingPlan>(s.tr.frame_samples(f), c.grid_size);
  const recon::EncodingOperator op(maps, plan);
  const auto d = recon::frame_data(s.raw, f);
  const auto w = recon::frame_weights(s.tr, f);
  const auto& truth_img = s.ph.image(f, 0);
  const std::vector<double> truth(truth_img.data.begin(), truth_img.data.end());

  const auto r = recon::cg_sense(op, d, {.iters = 10});
  bool decreasing = r.residual_history.size() == 11;
  for (std::size_t i = 1; i < r.residual_history.size(); ++i)
    decreasing = decreasing && r.residual_history[i] < r.residual_history[i - 1];
  v.is("residual_decreasing", decreasing);
  const double e_cg = stats::nrmse(mag(r.images[0]), truth);
  const double e_grid = stats::nrmse(mag(recon::gridding_recon(d, 8, *plan, w)), truth);
  v.detail << " nrmse_grid=" << e_grid;
  v.lt("nrmse_cg", e_cg, 0.6 * e_grid);
}

void lrs_checks(Verdict& v) {
  auto c = fixture::small_config(20, 1);
  c.seed = 11;
  c.lv_radius_es_mm = c.lv_radius_ed_mm;
  const auto s = simulate(c, 8, 4);
  const int n = c.grid_size;
  auto maps = std::make_shared<const std::vector<CImage>>(
      coils::walsh_maps(coils::temporal_average(s.raw, s.tr, n)).maps);
  std::vector<recon::EncodingOperator> ops;
  std::vector<std::span<const cplx>> data;
  std::vector<std::vector<double>> w;
  std::vector<std::shared_ptr<const nufft::GriddingPlan>> plans(s.tr.n_orientations);
  for (int f = 0; f < 20; ++f) {
    const int o = s.tr.orientation_of_frame(f);
    if (!plans[o]) plans[o] = std::make_shared<const nufft::GriddingPlan>(s.tr.frame_samples(f), n);
    ops.emplace_back(maps, plans[o]);
    data.push_back(recon::frame_data(s.raw, f));
    w.push_back(recon::frame_weights(s.tr, f));
  }
  const auto r = recon::lrs(ops, data, w, {.iters = 20});
  Eigen::MatrixXcd casorati(n * n, 20);
  double s_norm = 0.0, l_norm = 0.0;
  for (int f = 0; f < 20; ++f) {
    for (int i = 0; i < n * n; ++i) casorati(i, f) = r.low_rank[f].data[i];
    s_norm += std::norm(norm2(r.sparse[f].span()));
    l_norm += std::norm(norm2(r.low_rank[f].span()));
  }
  const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXcd>(casorati).singularValues();
  v.lt("sigma2/sigma1", sv(1) / sv(0), 1e-3);
  v.lt("|S|/|L|", std::sqrt(s_norm / l_norm), 1e-3);
}

void gating_checks(Verdict& v) {
  auto c = fixture::small_config(104, 1);
  c.seed = 3;
  const auto s = simulate(c, 4, 1);
  const auto b = gating::detect_cycles(gating::extract_gating(s.raw, s.tr));
  double worst = 0.0;
  for (std::size_t i = 1; i < b.size(); ++i) worst = std::max(worst, std::abs(b[i] - b[i - 1] - 1000.0));
  v.is("cycles>=4", b.size() >= 4);
  v.le("|spacing-1000ms|", worst, 48.0);

  // 21 frames x 48 ms per orientation exceeds the 1000 ms RR interval.
  auto c2 = fixture::small_config(8 * 21, 1);
  c2.seed = 3;
  const auto s2 = simulate(c2, 2, 1, 21);
  const auto b2 = gating::detect_cycles(gating::extract_gating(s2.raw, s2.tr));
  const auto set = gating::assign_phases(s2.raw, s2.tr, b2, 16);
  double lowest = 1.0;
  for (double x : set.completeness) lowest = std::min(lowest, x);
  v.in("completeness", lowest, 1.0, 1.0);
}

void ef_checks(Verdict& v) {
  auto cfg = fixture::small_config(63, 10);
  const auto p = phantom::generate_phantom(cfg);
  std::vector<std::vector<LabelImage>> masks(cfg.n_slices);
  for (int sl = 0; sl < cfg.n_slices; ++sl)
    for (int f = 0; f < cfg.n_frames; ++f) masks[sl].push_back(p.mask(f, sl));
  auto ef_at = [&](double pixel_mm, double thickness_mm) {
    const auto c = volumetry::mask_to_volume(masks, pixel_mm, thickness_mm, cfg.frame_dt_ms);
    const auto e = volumetry::detect_extrema(c);
    return volumetry::ejection_fraction(e.edv_ml, e.esv_ml).ef_percent;
  };
  const double ef = ef_at(cfg.pixel_size_mm, cfg.slice_thickness_mm);
  v.in("ef_percent", ef, 58.0, 62.0);
  double drift = 0.0;
  for (double k : {0.5, 1.7, 3.0}) drift = std::max(drift, std::abs(ef_at(k * cfg.pixel_size_mm, k * cfg.slice_thickness_mm) - ef));
  v.lt("scale_drift", drift, 1e-12);
}

void xsdnet_checks(Verdict& v) {
  using namespace xsdnet;
  std::mt19937 rng(11);
  double worst = 0.0;
  const Tensor x = oracle::random_tensor({4, 9, 9}, rng);
  for (int k : {1, 3, 5})
    for (int stride : {1, 2}) {
      const Tensor w = oracle::random_tensor({3, 4, k, k}, rng), b = oracle::random_tensor({3}, rng);
      worst = std::max(worst, oracle::max_abs_diff(ops::conv2d(x, w, b, stride, k / 2),
                                                   oracle::naive_conv(x, w, b, stride, k / 2)));
    }
  const Tensor g = oracle::random_tensor({4}, rng), be = oracle::random_tensor({4}, rng),
               mu = oracle::random_tensor({4}, rng), var = oracle::random_tensor({4}, rng, 0.1f, 2.0f);
  const Tensor bn = ops::batchnorm(x, g, be, mu, var, 1e-5f);
  const Tensor fg = oracle::random_tensor({4, 1, 1}, rng), fb = oracle::random_tensor({4, 1, 1}, rng);
  const Tensor fm = ops::film(x, fg, fb);
  const Tensor lr = ops::leaky_relu(x, 0.01f);
  const Tensor mp = ops::maxpool2(x), up = ops::upsample2(mp), gap = ops::global_avgpool(x);
  for (int c = 0; c < 4; ++c) {
    double sum = 0.0;
    for (int y = 0; y < 9; ++y)
      for (int xx = 0; xx < 9; ++xx) {
        const double xv = x.at(c, y, xx);
        sum += xv;
        worst = std::max(worst, std::abs(bn.at(c, y, xx) - (g.data[c] * (xv - mu.data[c]) /
                                                                 std::sqrt(double(var.data[c]) + 1e-5) +
                                                             be.data[c])));
        worst = std::max(worst, std::abs(fm.at(c, y, xx) - (double(fg.data[c]) * xv + fb.data[c])));
        worst = std::max(worst, std::abs(lr.at(c, y, xx) - (xv > 0 ? xv : 0.01 * xv)));
        if (y < 8 && xx < 8) {
          const double m = std::max({x.at(c, y & ~1, xx & ~1), x.at(c, y | 1, xx & ~1), x.at(c, y & ~1, xx | 1),
                                     x.at(c, y | 1, xx | 1)});
          worst = std::max(worst, std::abs(up.at(c, y, xx) - m));
        }
      }
    worst = std::max(worst, std::abs(gap.data[c] - sum / 81.0));
  }
  const Tensor v5 = oracle::random_tensor({5, 1, 1}, rng), dw = oracle::random_tensor({3, 5}, rng),
               db = oracle::random_tensor({3}, rng);
  const Tensor dn = ops::dense(v5, dw, db);
  for (int o = 0; o < 3; ++o) {
    double s = db.data[o];
    for (int i = 0; i < 5; ++i) s += double(dw.data[o * 5 + i]) * v5.data[i];
    worst = std::max(worst, std::abs(dn.data[o] - s));
  }
  v.lt("primitives", worst, 1e-5);

  Tensor logits = oracle::random_tensor({8, 7, 6}, rng, -30.0f, 30.0f);
  logits.at(3, 2, 2) = 80.0f;
  const Tensor sm = ops::softmax_channels(logits);
  double norm_err = 0.0;
  for (int y = 0; y < 7; ++y)
    for (int xx = 0; xx < 6; ++xx) {
      double s = 0.0;
      for (int c = 0; c < 8; ++c) s += sm.at(c, y, xx);
      norm_err = std::max(norm_err, std::abs(s - 1.0));
    }
  v.lt("softmax_sum", norm_err, 1e-6);

  Hyper h;
  h.depth = 2;
  h.base = 4;
  h.seg_channels = 6;
  h.mod_channels = {4, 8};
  h.mod_hidden = 8;
  h.dec_channels = 4;
  h.dec_blocks = 2;
  h.fusion_depth = 2;
  h.fusion_base = 4;
  const auto store = init_weights(h, 5);
  const auto bytes = store.to_bytes();
  const auto reread = WeightStore::from_bytes(bytes);
  v.is("roundtrip", reread.to_bytes() == bytes);

  Image<float> img(40, 36);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& p : img.data) p = u(rng);
  const auto a = Model(store).infer(img), b = Model(reread).infer(img);
  bool binary = true;
  for (float f : a.factors.data) binary = binary && (f == 0.0f || f == 1.0f);
  v.is("binary_factors", binary);
  const auto same = [](const std::vector<float>& p, const std::vector<float>& q) {
    return p.size() == q.size() && std::memcmp(p.data(), q.data(), p.size() * sizeof(float)) == 0;
  };
  v.is("deterministic", same(a.factors.data, b.factors.data) &&
                            same(a.segmentation.probabilities.data, b.segmentation.probabilities.data) &&
                            same(a.z, b.z) && same(a.reconstruction.data, b.reconstruction.data) &&
                            a.segmentation.mask.data == b.segmentation.mask.data);
}

void bland_altman_checks(Verdict& v) {
  const auto r = stats::bland_altman(std::vector<double>{10, 20}, std::vector<double>{8, 16});
  const double half = 1.96 * std::sqrt(2.0);
  v.lt("|bias-3|", std::abs(r.bias - 3.0), 1e-9);
  v.lt("|loa-oracle|", std::max(std::abs(r.loa_low - (3.0 - half)), std::abs(r.loa_high - (3.0 + half))), 1e-9);
  v.detail << " loa=[" << r.loa_low << "," << r.loa_high << "]";
  v.le("|loa-[0.228,5.772]|", std::max(std::abs(r.loa_low - 0.228), std::abs(r.loa_high - 5.772)), 5e-4);
}

}  // namespace

int main() {
  criterion("nufft", 10, nufft_checks);
  criterion("spiral", 1, spiral_checks);
  criterion("schedule", 1, schedule_checks);
  criterion("gstf", 1, gstf_checks);
  criterion("cg_sense", 30, cg_checks);
  criterion("lrs", 60, lrs_checks);
  criterion("gating", 30, gating_checks);
  criterion("ejection", 30, ef_checks);
  criterion("xsdnet", 30, xsdnet_checks);
  criterion("bland_altman", 1, bland_altman_checks);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
