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
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/LU>

#include "doctest.h"
#include "geofps/error.hpp"
#include "geofps/linalg.hpp"
#include "geofps/parallel.hpp"
#include "geofps/rng.hpp"

using namespace geofps;

TEST_CASE("rng streams are reproducible and distinct") {
  StreamRng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  std::vector<std::uint64_t> xa, xb, xc, xd;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a());
    xb.push_back(b());
    xc.push_back(c());
    xd.push_back(d());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(xa != xd);
}

TEST_CASE("derive_seed gives distinct children") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(42, 1) == derive_seed(42, 1));
}

TEST_CASE("uniform, normal and inverse-gamma moments") {
  StreamRng r(1, 0);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sig = 0;
  double umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    sig += r.inv_gamma(4.0, 6.0);
  }
  CHECK(umin >= 0.0);
  CHECK(umax < 1.0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
  // IG(4, 6) has mean 6 / 3 = 2 and variance 36 / (9 * 2) = 2.
  CHECK(std::abs(sig / n - 2.0) < 5 * std::sqrt(2.0 / n));
}

TEST_CASE("gamma with small shape stays positive") {
  StreamRng r(3, 1);
  double s = 0;
  for (int i = 0; i < 50000; ++i) {
    const double g = r.gamma(0.3);
    REQUIRE(g >= 0.0);
    s += g;
  }
  CHECK(s / 50000 == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("SpdFactor solves, samples and reports log det") {
  Eigen::MatrixXd a(3, 3);
  a << 4, 1, 0.5, 1, 3, 0.2, 0.5, 0.2, 2;
  const SpdFactor f(a, 1.0, "test");
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(3, 1, 3);
  CHECK((a * f.solve(b) - b).norm() < 1e-12);
  CHECK(f.quad(b) == doctest::Approx(b.dot(a.ldlt().solve(b))));
  CHECK(f.log_det() == doctest::Approx(std::log(a.determinant())));
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(3);
  CHECK((f.lower() * f.half_solve(z) - z).norm() < 1e-12);
  CHECK((f.mul_lower(z) - f.lower() * z).norm() < 1e-12);
  CHECK_FALSE(f.jittered());
}

TEST_CASE("SpdFactor jitters a singular PSD matrix once and rejects indefinite ones") {
  Eigen::MatrixXd psd = Eigen::MatrixXd::Ones(3, 3);
  const SpdFactor f(psd, 1.0, "rank one");
  CHECK(f.jittered());
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(SpdFactor(bad, 1.0, "indefinite"), NumericalError);
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
