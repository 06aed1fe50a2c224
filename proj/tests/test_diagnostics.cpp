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
#include <vector>

#include "doctest.h"
#include "geofps/diagnostics.hpp"
#include "geofps/rng.hpp"

using namespace geofps;

namespace {

Eigen::VectorXd ar1(double rho, Eigen::Index n, std::uint64_t seed, double shift = 0.0) {
  StreamRng r(seed, 0);
  Eigen::VectorXd x(n);
  double v = r.normal() / std::sqrt(1 - rho * rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    v = rho * v + r.normal();
    x[i] = v + shift;
  }
  return x;
}

}  // namespace

TEST_CASE("rhat: agreeing chains near one, separated chains flagged") {
  const std::vector<Eigen::VectorXd> same{ar1(0.3, 4000, 1), ar1(0.3, 4000, 2), ar1(0.3, 4000, 3)};
  const auto r = split_rhat(same);
  REQUIRE(r.has_value());
  CHECK(*r < 1.01);
  const std::vector<Eigen::VectorXd> apart{ar1(0.3, 4000, 1), ar1(0.3, 4000, 2, 3.0)};
  CHECK(*split_rhat(apart) > 1.5);
  // A drifting single half is caught by the split.
  Eigen::VectorXd drift = ar1(0.3, 4000, 4);
  drift.tail(2000).array() += 2.0;
  CHECK(*split_rhat({drift, ar1(0.3, 4000, 5)}) > 1.1);
}

TEST_CASE("rhat is absent for one chain or zero variance") {
  CHECK_FALSE(split_rhat({ar1(0.3, 100, 1)}).has_value());
  CHECK_FALSE(split_rhat({Eigen::VectorXd::Constant(50, 2.0), Eigen::VectorXd::Constant(50, 2.0)}).has_value());
}

TEST_CASE("ESS: iid close to L, AR(1) close to L (1 - rho) / (1 + rho)") {
  const Eigen::Index L = 20000;
  CHECK(effective_sample_size(ar1(0.0, L, 7)) == doctest::Approx(double(L)).epsilon(0.1));
  CHECK(effective_sample_size(ar1(0.5, L, 8)) == doctest::Approx(L / 3.0).epsilon(0.15));
  CHECK(effective_sample_size(ar1(0.9, L, 9)) == doctest::Approx(L * 0.1 / 1.9).epsilon(0.25));
  const double two = effective_sample_size(std::vector<Eigen::VectorXd>{ar1(0.5, L, 10), ar1(0.5, L, 11)});
  CHECK(two == doctest::Approx(2.0 * L / 3.0).epsilon(0.15));
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> v{4, 1, 3, 2};
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK_THROWS(quantile(v, 1.5));
  CHECK_THROWS(quantile(std::vector<double>{}, 0.5));
}

TEST_CASE("summaries") {
  Eigen::VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  const DrawSummary s = summarize(x);
  CHECK(s.mean == doctest::Approx(3.0));
  CHECK(s.sd == doctest::Approx(std::sqrt(2.5)));
  CHECK(s.q500 == doctest::Approx(3.0));
  CHECK(s.q025 == doctest::Approx(1.1));
  CHECK(s.q975 == doctest::Approx(4.9));
}
