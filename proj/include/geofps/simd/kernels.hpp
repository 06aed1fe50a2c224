// Copyright The geostat-fps Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>

namespace geofps::simd {

// Row kernels over planar coordinates stored as separate x / y arrays.
//
// distance_row: out[j] = |(x0, y0) - (xs[j], ys[j])|
// exp_cov_row:  out[j] = tau2 * exp(-phi * |(x0, y0) - (xs[j], ys[j])|)
using DistanceRowFn = void (*)(double x0, double y0, const double* xs, const double* ys,
                               std::size_t n, double* out);
using ExpCovRowFn = void (*)(double x0, double y0, const double* xs, const double* ys,
                             std::size_t n, double tau2, double phi, double* out);

struct Kernels {
  const char* name;
  DistanceRowFn distance_row;
  ExpCovRowFn exp_cov_row;
};

/// Portable reference implementation.
const Kernels& scalar_kernels();

/// AVX2 variant, or nullptr when it was not compiled in or the CPU lacks AVX2/FMA.
const Kernels* avx2_kernels();

/// Kernel set chosen once per process: AVX2 when available unless the
/// environment sets GEOSTAT_FPS_SIMD=scalar.
const Kernels& active_kernels();

}  // namespace geofps::simd
