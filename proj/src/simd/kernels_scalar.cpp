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

#include <cmath>

#include "geofps/simd/kernels.hpp"

namespace geofps::simd {
namespace {

void distance_row_scalar(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                         double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = x0 - xs[j];
    const double dy = y0 - ys[j];
    out[j] = std::sqrt(dx * dx + dy * dy);
  }
}

void exp_cov_row_scalar(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                        double tau2, double phi, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = x0 - xs[j];
    const double dy = y0 - ys[j];
    out[j] = tau2 * std::exp(-phi * std::sqrt(dx * dx + dy * dy));
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{"scalar", &distance_row_scalar, &exp_cov_row_scalar};
  return k;
}

}  // namespace geofps::simd
