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
#include <string>
#include <vector>

#include "doctest.h"
#include "geofps/covariance.hpp"
#include "geofps/rng.hpp"
#include "geofps/simd/kernels.hpp"

using namespace geofps;

namespace {

struct Points {
  std::vector<double> x, y;
};

Points random_points(std::size_t n, std::uint64_t seed) {
  StreamRng r(seed, 0);
  Points p;
  for (std::size_t i = 0; i < n; ++i) {
    p.x.push_back(r.uniform() * 3.0 - 1.0);
    p.y.push_back(r.uniform() * 2.0);
  }
  return p;
}

}  // namespace

TEST_CASE("scalar kernels match direct evaluation") {
  const auto& k = simd::scalar_kernels();
  const Points p = random_points(37, 1);
  std::vector<double> d(37), c(37);
  k.distance_row(0.3, 0.4, p.x.data(), p.y.data(), 37, d.data());
  k.exp_cov_row(0.3, 0.4, p.x.data(), p.y.data(), 37, 2.5, 7.0, c.data());
  for (std::size_t j = 0; j < 37; ++j) {
    const double dd = std::hypot(0.3 - p.x[j], 0.4 - p.y[j]);
    CHECK(d[j] == doctest::Approx(dd).epsilon(1e-15));
    CHECK(c[j] == doctest::Approx(2.5 * std::exp(-7.0 * dd)).epsilon(1e-14));
  }
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const simd::Kernels* v = simd::avx2_kernels();
  if (v == nullptr) {
    MESSAGE("AVX2 kernels unavailable on this machine; equivalence not exercised");
    return;
  }
  const auto& s = simd::scalar_kernels();
  // Lengths around the vector width exercise the tail handling.
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 63u, 64u, 65u, 1001u}) {
    const Points p = random_points(n, 100 + n);
    std::vector<double> ds(n), dv(n), cs(n), cv(n);
    s.distance_row(0.1, -0.2, p.x.data(), p.y.data(), n, ds.data());
    v->distance_row(0.1, -0.2, p.x.data(), p.y.data(), n, dv.data());
    s.exp_cov_row(0.1, -0.2, p.x.data(), p.y.data(), n, 9.0, 10.0, cs.data());
    v->exp_cov_row(0.1, -0.2, p.x.data(), p.y.data(), n, 9.0, 10.0, cv.data());
    for (std::size_t j = 0; j < n; ++j) {
      REQUIRE(std::abs(dv[j] - ds[j]) <= 1e-15 * std::max(1.0, ds[j]));
      REQUIRE(std::abs(cv[j] - cs[j]) <= 1e-13 * cs[j] + 1e-300);
    }
  }
}

TEST_CASE("AVX2 exponential handles extreme arguments") {
  const simd::Kernels* v = simd::avx2_kernels();
  if (v == nullptr) return;
  const auto& s = simd::scalar_kernels();
  std::vector<double> x = {0.0, 1e-12, 0.5, 5.0, 80.0, 800.0, 1e5, 0.0};
  std::vector<double> y(x.size(), 0.0);
  std::vector<double> cs(x.size()), cv(x.size());
  for (double phi : {0.01, 1.0, 10.0, 1e3}) {
    s.exp_cov_row(0.0, 0.0, x.data(), y.data(), x.size(), 1.0, phi, cs.data());
    v->exp_cov_row(0.0, 0.0, x.data(), y.data(), x.size(), 1.0, phi, cv.data());
    for (std::size_t j = 0; j < x.size(); ++j) {
      REQUIRE(std::isfinite(cv[j]));
      REQUIRE(cv[j] >= 0.0);
      REQUIRE(std::abs(cv[j] - cs[j]) <= 1e-13 * cs[j] + 1e-300);
    }
  }
}

TEST_CASE("active kernels produce the same covariance matrices as the scalar path") {
  const Points p = random_points(50, 7);
  Coords c;
  for (std::size_t i = 0; i < 50; ++i) c.push_back(p.x[i], p.y[i]);
  const Eigen::MatrixXd m = spatial_covariance(c, 4.0, 3.0);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      const double d = std::hypot(p.x[i] - p.x[j], p.y[i] - p.y[j]);
      REQUIRE(std::abs(m(i, j) - 4.0 * std::exp(-3.0 * d)) <= 1e-13 * 4.0);
    }
  MESSAGE("active kernel set: " << std::string(simd::active_kernels().name));
}
