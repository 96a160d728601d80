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

#include <span>

#include "spiralrt/core.hpp"

namespace spiralrt::fft {

// Unnormalized DFTs backed by FFTW. Forward uses exp(-2*pi*i*...), inverse
// uses exp(+2*pi*i*...) without the 1/N factor. Plans are cached per shape
// and are safe to execute concurrently.

void forward_2d(std::span<cplx> data, int rows, int cols);
void inverse_2d(std::span<cplx> data, int rows, int cols);
void forward_1d(std::span<cplx> data);
void inverse_1d(std::span<cplx> data);

/// Batched 1D transforms along a strided axis: `count` signals of length n,
/// element j of signal s at data[s * dist + j * stride].
void forward_many(std::span<cplx> data, int n, int count, int stride, int dist);
void inverse_many(std::span<cplx> data, int n, int count, int stride, int dist);

}  // namespace spiralrt::fft
