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

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spiralrt/acquisition.hpp"
#include "spiralrt/coils.hpp"
#include "spiralrt/core.hpp"
#include "spiralrt/nufft.hpp"
#include "spiralrt/trajectory.hpp"

namespace spiralrt::recon {

/// E x = [NUFFT(S_c x)]_c. Data is laid out [coil][sample], matching one
/// frame of a RawAcquisition.
class EncodingOperator {
 public:
  EncodingOperator(std::shared_ptr<const std::vector<CImage>> maps,
                   std::shared_ptr<const nufft::GriddingPlan> plan, int threads = 1);
  EncodingOperator(std::vector<CImage> maps, std::shared_ptr<const nufft::GriddingPlan> plan,
                   int threads = 1);

  int n_coils() const { return static_cast<int>(maps_->size()); }
  int grid_size() const { return plan_->grid_size(); }
  std::size_t samples_per_coil() const { return plan_->num_samples(); }
  std::size_t data_size() const { return samples_per_coil() * maps_->size(); }
  const std::vector<CImage>& maps() const { return *maps_; }
  const nufft::GriddingPlan& plan() const { return *plan_; }
  const std::shared_ptr<const nufft::GriddingPlan>& plan_ptr() const { return plan_; }
  int threads() const { return threads_; }

  std::vector<cplx> forward(const CImage& x) const;
  /// sum_c conj(S_c) NUFFT^H(w d_c). Exact adjoint of forward() without weights.
  CImage adjoint(std::span<const cplx> data,
                 std::optional<std::span<const double>> weights = std::nullopt) const;

 private:
  std::shared_ptr<const std::vector<CImage>> maps_;
  std::shared_ptr<const nufft::GriddingPlan> plan_;
  int threads_;
};

/// Contiguous [coil][arm][sample] data of one frame.
std::span<const cplx> frame_data(const RawAcquisition& raw, int frame);

/// Per-sample density weights of one frame (the arm weights, tiled).
std::vector<double> frame_weights(const traj::Trajectory& tr, int frame);

/// Density-weighted adjoint per coil, combined by root-sum-of-squares.
/// The result is real-valued (stored as complex).
CImage gridding_recon(std::span<const cplx> data, int n_coils, const nufft::GriddingPlan& plan,
                      std::span<const double> weights, int threads = 1);

/// Density-weighted adjoint combined with the operator's maps, sum_c conj(S_c) g_c.
CImage gridding_sense(const EncodingOperator& op, std::span<const cplx> data,
                      std::span<const double> weights);

struct ReconResult {
  std::vector<CImage> images;
  std::vector<CImage> low_rank;  // lrs only
  std::vector<CImage> sparse;    // lrs only
  /// ||E x - d|| per iteration, starting with the initial guess.
  std::vector<double> residual_history;
  /// fista: objective per iteration (starting with x0); lrs: unused.
  std::vector<double> objective_history;
  /// Per-frame residual histories of a series run with a per-frame method.
  std::vector<std::vector<double>> frame_residuals;
  std::string method;
  std::map<std::string, double> params;

  std::string to_json() const;
};

struct CgOptions {
  int iters = 10;
  /// Solve E^H W E x = E^H W d with the density weights (off by default).
  bool precondition = false;
  std::vector<double> weights;
};

ReconResult cg_sense(const EncodingOperator& op, std::span<const cplx> data,
                     const CgOptions& opt = {});

/// Largest eigenvalue of E^H E (E^H W E with weights) by power iteration
/// from a seeded start.
double normal_norm_estimate(const EncodingOperator& op, int iters = 30, std::uint64_t seed = 7,
                            std::optional<std::span<const double>> weights = std::nullopt);

namespace wavelet {
/// Orthogonal periodized Daubechies-4 (8 taps), in-place Mallat layout.
void forward(CImage& img, int levels);
void inverse(CImage& img, int levels);
}  // namespace wavelet

struct FistaOptions {
  /// Relative to max |Psi E^H d|; >= 1 yields the zero image.
  double lambda = 0.002;
  int iters = 50;
  int levels = 3;
  int power_iters = 30;
};

/// FISTA on 1/2 ||E x - d||^2 + lambda ||Psi x||_1 with function-value restart.
ReconResult fista_l1wavelet(const EncodingOperator& op, std::span<const cplx> data,
                            const FistaOptions& opt = {});

struct LrsOptions {
  double lambda_l = 0.01;  // singular-value threshold, relative to sigma_1
  double lambda_s = 0.02;  // temporal-FFT threshold, relative to max |FFT_t(M0)|
  int iters = 30;
  int power_iters = 12;
  int threads = 1;
};

/// Low-rank plus sparse over a 2D+t series. ops, data and weights are per
/// frame; the weights give the initial gridding estimate and the norm of the
/// data-consistency step. residual_history holds ||W^1/2 (E x - d)||.
ReconResult lrs(const std::vector<EncodingOperator>& ops,
                const std::vector<std::span<const cplx>>& data,
                const std::vector<std::vector<double>>& weights, const LrsOptions& opt = {});

enum class Method { Gridding, CgSense, Fista, Lrs };

Method parse_method(const std::string& name);
const char* method_name(Method m);

struct SeriesConfig {
  Method method = Method::CgSense;
  int iters = 10;
  double lambda = 0.002;
  double lambda_l = 0.01;
  double lambda_s = 0.02;
  int levels = 3;
  bool precondition = false;
  std::vector<int> frames;  // empty: all frames
};

/// Reconstructs frames of an acquisition. Per-frame methods run frames in
/// parallel; the result does not depend on `threads`.
ReconResult reconstruct_series(const RawAcquisition& raw, const traj::Trajectory& tr,
                               const std::vector<CImage>& maps, const SeriesConfig& cfg,
                               int threads = 1);

}  // namespace spiralrt::recon
