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

#include "spiralrt/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace spiralrt::fft {
namespace {

struct PlanKey {
  int rank, n0, n1, count, stride, dist, sign;
  auto tie() const { return std::tie(rank, n0, n1, count, stride, dist, sign); }
  bool operator<(const PlanKey& o) const { return tie() < o.tie(); }
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(const PlanKey& key) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    // FFTW_ESTIMATE does not touch the arrays, so a scratch buffer is enough
    // for planning; FFTW_UNALIGNED lets the plan run on any std::vector.
    const int total = key.rank == 2 ? key.n0 * key.n1
                                    : (key.count - 1) * key.dist +
                                          (key.n0 - 1) * key.stride + 1;
    auto* buf = fftw_alloc_complex(static_cast<std::size_t>(total));
    fftw_plan plan = nullptr;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (key.rank == 2) {
      plan = fftw_plan_dft_2d(key.n0, key.n1, buf, buf, key.sign, flags);
    } else {
      int n = key.n0;
      plan = fftw_plan_many_dft(1, &n, key.count, buf, nullptr, key.stride,
                                key.dist, buf, nullptr, key.stride, key.dist,
                                key.sign, flags);
    }
    fftw_free(buf);
    require(plan != nullptr, ErrorCode::Internal, "FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<PlanKey, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(const PlanKey& key, std::span<cplx> data) {
  fftw_plan plan = cache().get(key);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
}

}  // namespace

void forward_2d(std::span<cplx> data, int rows, int cols) {
  require(data.size() == static_cast<std::size_t>(rows) * cols,
          ErrorCode::ShapeMismatch, "fft::forward_2d size mismatch");
  run({2, rows, cols, 1, 1, 1, FFTW_FORWARD}, data);
}

void inverse_2d(std::span<cplx> data, int rows, int cols) {
  require(data.size() == static_cast<std::size_t>(rows) * cols,
          ErrorCode::ShapeMismatch, "fft::inverse_2d size mismatch");
  run({2, rows, cols, 1, 1, 1, FFTW_BACKWARD}, data);
}

void forward_1d(std::span<cplx> data) {
  if (data.empty()) return;
  const int n = static_cast<int>(data.size());
  run({1, n, 0, 1, 1, n, FFTW_FORWARD}, data);
}

void inverse_1d(std::span<cplx> data) {
  if (data.empty()) return;
  const int n = static_cast<int>(data.size());
  run({1, n, 0, 1, 1, n, FFTW_BACKWARD}, data);
}

void forward_many(std::span<cplx> data, int n, int count, int stride, int dist) {
  if (n == 0 || count == 0) return;
  run({1, n, 0, count, stride, dist, FFTW_FORWARD}, data);
}

void inverse_many(std::span<cplx> data, int n, int count, int stride, int dist) {
  if (n == 0 || count == 0) return;
  run({1, n, 0, count, stride, dist, FFTW_BACKWARD}, data);
}

}  // namespace spiralrt::fft
