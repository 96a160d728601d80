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

#include "spiralrt/recon.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "json.hpp"
#include "spiralrt/fft.hpp"

namespace spiralrt::recon {

namespace {

double sq_norm(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

double re_dot(std::span<const cplx> a, std::span<const cplx> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

void require_finite(std::span<const cplx> v, const char* who) {
  for (const auto& z : v)
    require(std::isfinite(z.real()) && std::isfinite(z.imag()), ErrorCode::Numeric,
            std::string(who) + ": data contains non-finite values");
}

void soft_threshold(std::span<cplx> v, double tau) {
  for (auto& z : v) {
    const double m = std::abs(z);
    z = m > tau ? z * ((m - tau) / m) : cplx{};
  }
}

}  // namespace

EncodingOperator::EncodingOperator(std::shared_ptr<const std::vector<CImage>> maps,
                                   std::shared_ptr<const nufft::GriddingPlan> plan, int threads)
    : maps_(std::move(maps)), plan_(std::move(plan)), threads_(std::max(1, threads)) {
  require(maps_ && plan_, ErrorCode::InvalidArgument, "EncodingOperator: null maps or plan");
  require(!maps_->empty(), ErrorCode::InvalidArgument, "EncodingOperator: no coil maps");
  const int n = plan_->grid_size();
  for (const auto& m : *maps_)
    require(m.height == n && m.width == n, ErrorCode::ShapeMismatch,
            "EncodingOperator: map size " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                " does not match grid " + std::to_string(n));
}

EncodingOperator::EncodingOperator(std::vector<CImage> maps,
                                   std::shared_ptr<const nufft::GriddingPlan> plan, int threads)
    : EncodingOperator(std::make_shared<const std::vector<CImage>>(std::move(maps)), std::move(plan),
                       threads) {}

std::vector<cplx> EncodingOperator::forward(const CImage& x) const {
  require(x.height == grid_size() && x.width == grid_size(), ErrorCode::ShapeMismatch,
          "EncodingOperator::forward: image does not match grid");
  const std::size_t m = samples_per_coil();
  std::vector<cplx> out(data_size());
  parallel_for(n_coils(), threads_, [&](int c) {
    CImage sx(x.height, x.width);
    const auto& s = (*maps_)[c];
    for (std::size_t i = 0; i < sx.size(); ++i) sx.data[i] = s.data[i] * x.data[i];
    const auto k = plan_->forward(sx);
    std::copy(k.begin(), k.end(), out.begin() + static_cast<std::ptrdiff_t>(m * c));
  });
  return out;
}

CImage EncodingOperator::adjoint(std::span<const cplx> data,
                                 std::optional<std::span<const double>> weights) const {
  require(data.size() == data_size(), ErrorCode::ShapeMismatch,
          "EncodingOperator::adjoint: expected " + std::to_string(data_size()) + " samples, got " +
              std::to_string(data.size()));
  const std::size_t m = samples_per_coil();
  if (weights)
    require(weights->size() == m, ErrorCode::ShapeMismatch,
            "EncodingOperator::adjoint: weights must have one entry per sample of a coil");
  std::vector<CImage> per(n_coils());
  parallel_for(n_coils(), threads_, [&](int c) {
    per[c] = plan_->adjoint(data.subspan(m * c, m), weights);
    const auto& s = (*maps_)[c];
    for (std::size_t i = 0; i < per[c].size(); ++i) per[c].data[i] *= std::conj(s.data[i]);
  });
  // Summed in coil order so the result does not depend on the thread count.
  CImage out = std::move(per[0]);
  for (int c = 1; c < n_coils(); ++c)
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += per[c].data[i];
  return out;
}

std::span<const cplx> frame_data(const RawAcquisition& raw, int frame) {
  require(frame >= 0 && frame < raw.n_frames, ErrorCode::InvalidArgument,
          "frame_data: frame " + std::to_string(frame) + " out of range");
  const std::size_t n = raw.frame_coil_size() * raw.n_coils;
  return std::span<const cplx>(raw.data).subspan(n * frame, n);
}

std::vector<double> frame_weights(const traj::Trajectory& tr, int frame) {
  const int o = tr.orientation_of_frame(frame);
  const auto w = traj::density_weights(tr.arm(o, 0), tr.arms_per_frame);
  std::vector<double> out(w.size() * tr.arms_per_frame);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w[i % w.size()];
  return out;
}

CImage gridding_recon(std::span<const cplx> data, int n_coils, const nufft::GriddingPlan& plan,
                      std::span<const double> weights, int threads) {
  const std::size_t m = plan.num_samples();
  require(n_coils >= 1 && data.size() == m * n_coils, ErrorCode::ShapeMismatch,
          "gridding_recon: data size does not match coils x samples");
  require(weights.size() == m, ErrorCode::ShapeMismatch, "gridding_recon: weights size mismatch");
  const int n = plan.grid_size();
  std::vector<CImage> per(n_coils);
  parallel_for(n_coils, threads, [&](int c) { per[c] = plan.adjoint(data.subspan(m * c, m), weights); });
  const double scale = 1.0 / (static_cast<double>(n) * n);
  CImage out(n, n);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < n_coils; ++c) s += std::norm(per[c].data[i]);
    out.data[i] = std::sqrt(s) * scale;
  }
  return out;
}

CImage gridding_sense(const EncodingOperator& op, std::span<const cplx> data,
                      std::span<const double> weights) {
  CImage out = op.adjoint(data, weights);
  const double scale = 1.0 / (static_cast<double>(op.grid_size()) * op.grid_size());
  for (auto& v : out.data) v *= scale;
  return out;
}

std::string ReconResult::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["params"] = params;
  j["residual_history"] = residual_history;
  if (!objective_history.empty()) j["objective_history"] = objective_history;
  if (!frame_residuals.empty()) j["frame_residuals"] = frame_residuals;
  return j.dump(2);
}

ReconResult cg_sense(const EncodingOperator& op, std::span<const cplx> data, const CgOptions& opt) {
  require(opt.iters >= 0, ErrorCode::InvalidArgument, "cg_sense: iters must be >= 0");
  require(data.size() == op.data_size(), ErrorCode::ShapeMismatch,
          "cg_sense: expected " + std::to_string(op.data_size()) + " samples, got " +
              std::to_string(data.size()));
  require_finite(data, "cg_sense");
  std::optional<std::span<const double>> w;
  if (opt.precondition) {
    require(opt.weights.size() == op.samples_per_coil(), ErrorCode::ShapeMismatch,
            "cg_sense: preconditioning needs one weight per sample");
    w = std::span<const double>(opt.weights);
  }
  const std::size_t m = op.samples_per_coil();
  auto wnorm = [&](std::span<const cplx> ex) {
    double s = 0.0;
    for (std::size_t i = 0; i < ex.size(); ++i) s += (w ? (*w)[i % m] : 1.0) * std::norm(ex[i] - data[i]);
    return std::sqrt(s);
  };

  const int n = op.grid_size();
  CImage x(n, n);
  CImage r = op.adjoint(data, w);
  CImage p = r;
  std::vector<cplx> ex(data.size());
  double rr = sq_norm(r.data);

  ReconResult res;
  res.method = "cgsense";
  res.params = {{"iters", opt.iters}, {"precondition", opt.precondition ? 1.0 : 0.0}};
  res.residual_history.push_back(wnorm(ex));
  for (int it = 0; it < opt.iters && rr > 0.0; ++it) {
    const auto ep = op.forward(p);
    const CImage q = op.adjoint(ep, w);
    const double pq = re_dot(p.data, q.data);
    if (!(pq > 0.0)) break;
    const double alpha = rr / pq;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.data[i] += alpha * p.data[i];
      r.data[i] -= alpha * q.data[i];
    }
    for (std::size_t i = 0; i < ex.size(); ++i) ex[i] += alpha * ep[i];
    res.residual_history.push_back(wnorm(ex));
    const double rr_new = sq_norm(r.data);
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
    rr = rr_new;
  }
  res.images.push_back(std::move(x));
  return res;
}

double normal_norm_estimate(const EncodingOperator& op, int iters, std::uint64_t seed,
                            std::optional<std::span<const double>> weights) {
  require(iters >= 1, ErrorCode::InvalidArgument, "normal_norm_estimate: iters must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int n = op.grid_size();
  CImage x(n, n);
  for (auto& v : x.data) v = cplx(nd(rng), nd(rng));
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double s = std::sqrt(sq_norm(x.data));
    if (s == 0.0) return 0.0;
    for (auto& v : x.data) v /= s;
    x = op.adjoint(op.forward(x), weights);
    lam = std::sqrt(sq_norm(x.data));
  }
  return lam;
}

namespace wavelet {
namespace {

constexpr int kTaps = 8;
// Daubechies-4 decomposition low-pass (8 taps).
constexpr double kDecLo[kTaps] = {-0.010597401784997278, 0.032883011666982945, 0.030841381835986965,
                                  -0.18703481171888114,  -0.02798376941698385,  0.6308807679295904,
                                  0.7148465705525415,    0.23037781330885523};

double lo(int j) { return kDecLo[kTaps - 1 - j]; }
double hi(int j) { return (j % 2 ? -1.0 : 1.0) * kDecLo[j]; }

// One level on a strided signal of even length n.
void analysis(cplx* x, int n, int stride, std::vector<cplx>& buf) {
  buf.assign(n, cplx{});
  const int half = n / 2;
  for (int k = 0; k < half; ++k) {
    cplx a = 0.0, d = 0.0;
    for (int j = 0; j < kTaps; ++j) {
      const cplx v = x[static_cast<std::ptrdiff_t>((2 * k + j) % n) * stride];
      a += lo(j) * v;
      d += hi(j) * v;
    }
    buf[k] = a;
    buf[half + k] = d;
  }
  for (int i = 0; i < n; ++i) x[static_cast<std::ptrdiff_t>(i) * stride] = buf[i];
}

void synthesis(cplx* x, int n, int stride, std::vector<cplx>& buf) {
  buf.assign(n, cplx{});
  const int half = n / 2;
  for (int k = 0; k < half; ++k) {
    const cplx a = x[static_cast<std::ptrdiff_t>(k) * stride];
    const cplx d = x[static_cast<std::ptrdiff_t>(half + k) * stride];
    for (int j = 0; j < kTaps; ++j) buf[(2 * k + j) % n] += lo(j) * a + hi(j) * d;
  }
  for (int i = 0; i < n; ++i) x[static_cast<std::ptrdiff_t>(i) * stride] = buf[i];
}

void check(const CImage& img, int levels) {
  require(levels >= 1, ErrorCode::InvalidArgument, "wavelet: levels must be >= 1");
  const int f = 1 << levels;
  require(img.height % f == 0 && img.width % f == 0, ErrorCode::InvalidArgument,
          "wavelet: image size " + std::to_string(img.height) + "x" + std::to_string(img.width) +
              " is not divisible by 2^" + std::to_string(levels));
}

}  // namespace

void forward(CImage& img, int levels) {
  check(img, levels);
  std::vector<cplx> buf;
  for (int l = 0; l < levels; ++l) {
    const int h = img.height >> l, w = img.width >> l;
    for (int y = 0; y < h; ++y) analysis(&img(y, 0), w, 1, buf);
    for (int x = 0; x < w; ++x) analysis(&img(0, x), h, img.width, buf);
  }
}

void inverse(CImage& img, int levels) {
  check(img, levels);
  std::vector<cplx> buf;
  for (int l = levels - 1; l >= 0; --l) {
    const int h = img.height >> l, w = img.width >> l;
    for (int x = 0; x < w; ++x) synthesis(&img(0, x), h, img.width, buf);
    for (int y = 0; y < h; ++y) synthesis(&img(y, 0), w, 1, buf);
  }
}

}  // namespace wavelet

ReconResult fista_l1wavelet(const EncodingOperator& op, std::span<const cplx> data,
                            const FistaOptions& opt) {
  require(opt.lambda >= 0.0, ErrorCode::InvalidArgument, "fista_l1wavelet: lambda must be >= 0");
  require(opt.iters >= 0, ErrorCode::InvalidArgument, "fista_l1wavelet: iters must be >= 0");
  require(data.size() == op.data_size(), ErrorCode::ShapeMismatch,
          "fista_l1wavelet: expected " + std::to_string(op.data_size()) + " samples");
  require_finite(data, "fista_l1wavelet");
  const int n = op.grid_size();
  {
    CImage probe(n, n);
    wavelet::forward(probe, opt.levels);  // validates the size
  }
  const double lip = 1.02 * normal_norm_estimate(op, opt.power_iters);
  ReconResult res;
  res.method = "cs";
  res.params = {{"lambda", opt.lambda}, {"iters", opt.iters}, {"levels", opt.levels}, {"lipschitz", lip}};

  CImage coeff = op.adjoint(data);
  wavelet::forward(coeff, opt.levels);
  double cmax = 0.0;
  for (const auto& z : coeff.data) cmax = std::max(cmax, std::abs(z));
  const double lam = opt.lambda * cmax;
  const double step = lip > 0.0 ? 1.0 / lip : 0.0;

  auto data_term = [&](const std::vector<cplx>& ex) {
    double s = 0.0;
    for (std::size_t i = 0; i < ex.size(); ++i) s += std::norm(ex[i] - data[i]);
    return s;
  };
  // Proximal gradient step from (v, Ev); returns the new iterate and its l1 norm.
  auto prox_step = [&](const CImage& v, const std::vector<cplx>& ev, double& l1) {
    std::vector<cplx> r(ev.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = ev[i] - data[i];
    CImage g = op.adjoint(r);
    CImage z(n, n);
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = v.data[i] - step * g.data[i];
    wavelet::forward(z, opt.levels);
    soft_threshold(z.data, step * lam);
    l1 = 0.0;
    for (const auto& c : z.data) l1 += std::abs(c);
    wavelet::inverse(z, opt.levels);
    return z;
  };

  CImage x_old(n, n), y(n, n);
  std::vector<cplx> ex_old(data.size()), ey(data.size());
  double f_old = 0.5 * data_term(ex_old);
  double t = 1.0;
  res.objective_history.push_back(f_old);
  res.residual_history.push_back(std::sqrt(2.0 * f_old));
  for (int it = 0; it < opt.iters && step > 0.0; ++it) {
    double l1 = 0.0;
    CImage x = prox_step(y, ey, l1);
    std::vector<cplx> ex = op.forward(x);
    double dt = data_term(ex);
    double f = 0.5 * dt + lam * l1;
    if (f > f_old) {
      // Restart: drop the momentum and take a plain step from the last iterate.
      t = 1.0;
      x = prox_step(x_old, ex_old, l1);
      ex = op.forward(x);
      dt = data_term(ex);
      f = 0.5 * dt + lam * l1;
      if (f > f_old) {
        x = x_old;
        ex = ex_old;
        f = f_old;
        dt = res.residual_history.back() * res.residual_history.back();
      }
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_new;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = x.data[i] + beta * (x.data[i] - x_old.data[i]);
    for (std::size_t i = 0; i < ey.size(); ++i) ey[i] = ex[i] + beta * (ex[i] - ex_old[i]);
    x_old = std::move(x);
    ex_old = std::move(ex);
    f_old = f;
    t = t_new;
    res.objective_history.push_back(f);
    res.residual_history.push_back(std::sqrt(dt));
  }
  res.images.push_back(std::move(x_old));
  return res;
}

namespace {

// Columns of a P x T Casorati matrix, one frame per column.
using Casorati = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;

void singular_value_threshold(const std::vector<cplx>& in, std::vector<cplx>& out, std::size_t p, int t,
                              double rel) {
  Eigen::Map<const Casorati> c(in.data(), static_cast<Eigen::Index>(p), t);
  const Casorati gram = c.adjoint() * c;
  Eigen::SelfAdjointEigenSolver<Casorati> es(gram);
  const auto& ev = es.eigenvalues();
  double s1 = 0.0;
  for (int i = 0; i < t; ++i) s1 = std::max(s1, std::sqrt(std::max(ev(i), 0.0)));
  const double tau = rel * s1;
  Eigen::VectorXd shrink(t);
  for (int i = 0; i < t; ++i) {
    const double s = std::sqrt(std::max(ev(i), 0.0));
    shrink(i) = s > tau ? (s - tau) / s : 0.0;
  }
  const Casorati v = es.eigenvectors();
  const Casorati proj = v * shrink.asDiagonal() * v.adjoint();
  Eigen::Map<Casorati> o(out.data(), static_cast<Eigen::Index>(p), t);
  o.noalias() = c * proj;
}

void temporal_fft(std::vector<cplx>& v, std::size_t p, int t, bool inverse) {
  if (inverse)
    fft::inverse_many(v, t, static_cast<int>(p), static_cast<int>(p), 1);
  else
    fft::forward_many(v, t, static_cast<int>(p), static_cast<int>(p), 1);
  const double s = 1.0 / std::sqrt(static_cast<double>(t));
  for (auto& z : v) z *= s;
}

}  // namespace

ReconResult lrs(const std::vector<EncodingOperator>& ops, const std::vector<std::span<const cplx>>& data,
                const std::vector<std::vector<double>>& weights, const LrsOptions& opt) {
  const int t = static_cast<int>(ops.size());
  require(t >= 2, ErrorCode::InsufficientData, "lrs: needs at least two frames");
  require(data.size() == ops.size() && weights.size() == ops.size(), ErrorCode::ShapeMismatch,
          "lrs: ops, data and weights must have one entry per frame");
  require(opt.lambda_l >= 0.0 && opt.lambda_s >= 0.0, ErrorCode::InvalidArgument,
          "lrs: thresholds must be >= 0");
  require(opt.iters >= 1, ErrorCode::InvalidArgument, "lrs: iters must be >= 1");
  const int n = ops[0].grid_size();
  for (int f = 0; f < t; ++f) {
    require(ops[f].grid_size() == n, ErrorCode::ShapeMismatch, "lrs: frames differ in grid size");
    require(data[f].size() == ops[f].data_size(), ErrorCode::ShapeMismatch,
            "lrs: frame " + std::to_string(f) + " data size mismatch");
    require(weights[f].size() == ops[f].samples_per_coil(), ErrorCode::ShapeMismatch,
            "lrs: frame " + std::to_string(f) + " weights size mismatch");
    require_finite(data[f], "lrs");
  }
  const std::size_t p = static_cast<std::size_t>(n) * n;
  const std::size_t total = p * t;

  auto frame = [&](std::vector<cplx>& v, int f) { return std::span<cplx>(v).subspan(p * f, p); };
  auto to_image = [&](std::span<const cplx> s) {
    CImage img(n, n);
    std::copy(s.begin(), s.end(), img.data.begin());
    return img;
  };

  std::vector<cplx> m(total);
  parallel_for(t, opt.threads, [&](int f) {
    const CImage g = gridding_sense(ops[f], data[f], weights[f]);
    std::copy(g.data.begin(), g.data.end(), frame(m, f).begin());
  });

  // Data consistency is taken in the density-weighted norm, which keeps the
  // gradient step well conditioned. Lipschitz constant of the block-diagonal
  // operator: max over distinct plans.
  std::vector<int> reps;
  for (int f = 0; f < t; ++f) {
    bool seen = false;
    for (int r : reps)
      if (ops[r].plan_ptr() == ops[f].plan_ptr() && &ops[r].maps() == &ops[f].maps()) seen = true;
    if (!seen) reps.push_back(f);
  }
  std::vector<double> lips(reps.size());
  parallel_for(static_cast<int>(reps.size()), opt.threads,
               [&](int i) {
                 lips[i] = normal_norm_estimate(ops[reps[i]], opt.power_iters, 7,
                                                std::span<const double>(weights[reps[i]]));
               });
  const double lip = *std::max_element(lips.begin(), lips.end());
  const double step = lip > 0.0 ? 0.9 / lip : 0.0;

  std::vector<cplx> spec = m;
  temporal_fft(spec, p, t, false);
  double smax = 0.0;
  for (const auto& z : spec) smax = std::max(smax, std::abs(z));
  const double tau_s = std::isinf(opt.lambda_s) ? std::numeric_limits<double>::infinity() : opt.lambda_s * smax;

  ReconResult res;
  res.method = "lrs";
  res.params = {{"lambda_l", opt.lambda_l}, {"lambda_s", opt.lambda_s}, {"iters", opt.iters},
                {"step", step}};

  // Weighted data-consistency residual and gradient of x, per frame.
  std::vector<double> res2(t);
  auto consistency = [&](const std::vector<cplx>& x, std::vector<cplx>* grad) {
    parallel_for(t, opt.threads, [&](int f) {
      const CImage xf = to_image(std::span<const cplx>(x).subspan(p * f, p));
      auto r = ops[f].forward(xf);
      const auto& w = weights[f];
      const std::size_t m = w.size();
      double acc = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] -= data[f][i];
        acc += w[i % m] * std::norm(r[i]);
      }
      res2[f] = acc;
      if (grad) {
        const CImage g = ops[f].adjoint(r, std::span<const double>(weights[f]));
        std::copy(g.data.begin(), g.data.end(), frame(*grad, f).begin());
      }
    });
    double s = 0.0;
    for (double v : res2) s += v;
    return std::sqrt(s);
  };
  res.residual_history.push_back(consistency(m, nullptr));

  std::vector<cplx> l(total), s(total), l_prev = m, work(total), x(total), grad(total);
  for (int it = 0; it < opt.iters; ++it) {
    for (std::size_t i = 0; i < total; ++i) work[i] = m[i] - s[i];
    singular_value_threshold(work, l, p, t, opt.lambda_l);
    for (std::size_t i = 0; i < total; ++i) work[i] = m[i] - l_prev[i];
    temporal_fft(work, p, t, false);
    soft_threshold(work, tau_s);
    temporal_fft(work, p, t, true);
    s = work;
    l_prev = l;
    for (std::size_t i = 0; i < total; ++i) x[i] = l[i] + s[i];
    res.residual_history.push_back(consistency(x, &grad));
    for (std::size_t i = 0; i < total; ++i) m[i] = x[i] - step * grad[i];
  }
  for (int f = 0; f < t; ++f) {
    res.images.push_back(to_image(std::span<const cplx>(x).subspan(p * f, p)));
    res.low_rank.push_back(to_image(std::span<const cplx>(l).subspan(p * f, p)));
    res.sparse.push_back(to_image(std::span<const cplx>(s).subspan(p * f, p)));
  }
  return res;
}

Method parse_method(const std::string& name) {
  if (name == "gridding") return Method::Gridding;
  if (name == "cgsense") return Method::CgSense;
  if (name == "cs") return Method::Fista;
  if (name == "lrs") return Method::Lrs;
  fail(ErrorCode::InvalidArgument, "unknown recon method '" + name + "' (gridding|cgsense|cs|lrs)");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Gridding: return "gridding";
    case Method::CgSense: return "cgsense";
    case Method::Fista: return "cs";
    case Method::Lrs: return "lrs";
  }
  return "?";
}

ReconResult reconstruct_series(const RawAcquisition& raw, const traj::Trajectory& tr,
                               const std::vector<CImage>& maps, const SeriesConfig& cfg, int threads) {
  require(raw.arms_per_frame == tr.arms_per_frame && raw.samples_per_arm == tr.samples_per_arm,
          ErrorCode::ShapeMismatch, "reconstruct_series: acquisition and trajectory shapes differ");
  require(static_cast<int>(maps.size()) == raw.n_coils, ErrorCode::ShapeMismatch,
          "reconstruct_series: " + std::to_string(maps.size()) + " maps for " +
              std::to_string(raw.n_coils) + " coils");
  threads = std::max(1, threads);
  const int n = maps[0].height;
  std::vector<int> frames = cfg.frames;
  if (frames.empty())
    for (int f = 0; f < raw.n_frames; ++f) frames.push_back(f);
  for (int f : frames)
    require(f >= 0 && f < raw.n_frames, ErrorCode::InvalidArgument,
            "reconstruct_series: frame " + std::to_string(f) + " out of range");
  const int nf = static_cast<int>(frames.size());

  // One plan per orientation in use.
  std::vector<int> orients;
  for (int f : frames) {
    const int o = tr.orientation_of_frame(f);
    if (std::find(orients.begin(), orients.end(), o) == orients.end()) orients.push_back(o);
  }
  std::unordered_map<int, std::shared_ptr<const nufft::GriddingPlan>> plans;
  {
    std::vector<std::shared_ptr<const nufft::GriddingPlan>> built(orients.size());
    parallel_for(static_cast<int>(orients.size()), threads, [&](int i) {
      built[i] = std::make_shared<const nufft::GriddingPlan>(tr.orientation_samples(orients[i]), n);
    });
    for (std::size_t i = 0; i < orients.size(); ++i) plans[orients[i]] = built[i];
  }
  auto shared_maps = std::make_shared<const std::vector<CImage>>(maps);
  const bool frame_parallel = nf >= threads;
  const int op_threads = frame_parallel ? 1 : threads;
  auto op_for = [&](int f, int th) {
    return EncodingOperator(shared_maps, plans.at(tr.orientation_of_frame(f)), th);
  };

  ReconResult out;
  out.method = method_name(cfg.method);
  if (cfg.method == Method::Lrs) {
    std::vector<EncodingOperator> ops;
    std::vector<std::span<const cplx>> data;
    std::vector<std::vector<double>> w;
    for (int f : frames) {
      ops.push_back(op_for(f, 1));
      data.push_back(frame_data(raw, f));
      w.push_back(frame_weights(tr, f));
    }
    LrsOptions o;
    o.lambda_l = cfg.lambda_l;
    o.lambda_s = cfg.lambda_s;
    o.iters = cfg.iters;
    o.threads = threads;
    out = lrs(ops, data, w, o);
    return out;
  }

  out.images.resize(nf);
  out.frame_residuals.resize(nf);
  auto run = [&](int i) {
    const int f = frames[i];
    const auto d = frame_data(raw, f);
    const auto w = frame_weights(tr, f);
    switch (cfg.method) {
      case Method::Gridding:
        out.images[i] = gridding_recon(d, raw.n_coils, *plans.at(tr.orientation_of_frame(f)), w, op_threads);
        break;
      case Method::CgSense: {
        CgOptions o;
        o.iters = cfg.iters;
        o.precondition = cfg.precondition;
        if (o.precondition) o.weights = w;
        auto r = cg_sense(op_for(f, op_threads), d, o);
        out.images[i] = std::move(r.images[0]);
        out.frame_residuals[i] = std::move(r.residual_history);
        break;
      }
      case Method::Fista: {
        FistaOptions o;
        o.lambda = cfg.lambda;
        o.iters = cfg.iters;
        o.levels = cfg.levels;
        auto r = fista_l1wavelet(op_for(f, op_threads), d, o);
        out.images[i] = std::move(r.images[0]);
        out.frame_residuals[i] = std::move(r.residual_history);
        break;
      }
      case Method::Lrs: break;
    }
  };
  if (frame_parallel)
    parallel_for(nf, threads, run);
  else
    for (int i = 0; i < nf; ++i) run(i);

  out.params = {{"iters", cfg.iters}, {"frames", nf}};
  if (cfg.method == Method::Fista) {
    out.params["lambda"] = cfg.lambda;
    out.params["levels"] = cfg.levels;
  }
  if (cfg.method == Method::CgSense) out.params["precondition"] = cfg.precondition ? 1.0 : 0.0;
  if (cfg.method == Method::Gridding) {
    out.params.erase("iters");
    out.frame_residuals.clear();
  }
  return out;
}

}  // namespace spiralrt::recon
