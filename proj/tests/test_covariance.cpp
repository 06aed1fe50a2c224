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
#include "geofps/covariance.hpp"
#include "geofps/error.hpp"
#include "geofps/linalg.hpp"
#include "geofps/sim.hpp"
#include "oracles.hpp"

using namespace geofps;

TEST_CASE("pairwise distances") {
  Coords c;
  c.push_back(0, 0);
  c.push_back(3, 4);
  c.push_back(3, 4);
  const Eigen::MatrixXd d = pairwise_distances(c);
  CHECK(d(0, 1) == 5.0);
  CHECK(d(1, 0) == 5.0);
  CHECK(d(1, 2) == 0.0);
  CHECK(d.diagonal().isZero());
}

TEST_CASE("triangle inequality on random triples") {
  StreamRng r(4, 0);
  Coords c;
  for (int i = 0; i < 30; ++i) c.push_back(r.uniform(), r.uniform());
  const Eigen::MatrixXd d = pairwise_distances(c);
  for (int a = 0; a < 30; ++a)
    for (int b = 0; b < 30; ++b)
      for (int e = 0; e < 30; ++e) REQUIRE(d(a, e) <= d(a, b) + d(b, e) + 1e-15);
}

TEST_CASE("matern values") {
  MaternSpec s{9.0, 4.0, 10.0, 0.5};
  CHECK(matern(0.0, s) == 13.0);
  CHECK(matern(0.3, s) == doctest::Approx(0.44808361531077).epsilon(1e-12));
  CHECK_THROWS(matern(-1.0, s));

  // eta = 3/2 against its closed form.
  MaternSpec s32{2.0, 0.0, 4.0, 1.5};
  for (double d : {0.01, 0.1, 0.37, 1.2}) {
    const double t = std::sqrt(3.0) * d * s32.phi;
    CHECK(matern(d, s32) == doctest::Approx(2.0 * (1 + t) * std::exp(-t)).epsilon(1e-10));
  }
}

TEST_CASE("Bessel path at eta = 1/2 equals the exponential form") {
  for (double phi : {0.5, 3.0, 10.0})
    for (int i = 1; i <= 200; ++i) {
      const double d = 0.01 * i;
      const double want = std::exp(-phi * d);
      REQUIRE(std::abs(matern_correlation_bessel(d, phi, 0.5) - want) <= 1e-10 * want);
    }
}

TEST_CASE("matern is nonincreasing in distance") {
  for (double eta : {0.5, 1.0, 1.5, 2.5}) {
    MaternSpec s{1.5, 0.2, 3.0, eta};
    double prev = matern(0.0, s);
    for (int i = 1; i < 400; ++i) {
      const double v = matern(0.005 * i, s);
      REQUIRE(v <= prev + 1e-14);
      prev = v;
    }
  }
}

TEST_CASE("invalid matern parameters are rejected") {
  CHECK_THROWS((MaternSpec{-1.0, 0.0, 1.0, 0.5}.validate()));
  CHECK_THROWS((MaternSpec{1.0, 0.0, 0.0, 0.5}.validate()));
  CHECK_THROWS((MaternSpec{1.0, 0.0, 1.0, 0.0}.validate()));
  CHECK_THROWS((MaternSpec{1.0, NAN, 1.0, 0.5}.validate()));
}

TEST_CASE("effective and practical range") {
  CHECK(effective_range(10.0) == doctest::Approx(0.3));
  CHECK(effective_range(5.0) == doctest::Approx(0.6));
  CHECK(effective_range(15.0) == doctest::Approx(0.2));
  CHECK(effective_range(0.01) == doctest::Approx(300.0));
  CHECK_THROWS(effective_range(0.0));
  const double pr = practical_range(2.0, 1.5);
  CHECK(matern_correlation(pr, 2.0, 1.5) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(practical_range(10.0, 0.5) == doctest::Approx(std::log(20.0) / 10.0).epsilon(1e-6));
}

namespace {

oracle::Toy three_region_toy() {
  return oracle::make_toy({0, 0, 1, 1, 2, 2, 0}, {true, false, true, true, false, false, true},
                          {1, 2, 3, 4, 5, 6, 7}, 3,
                          {{0.1, 0.1}, {0.2, 0.15}, {0.5, 0.5}, {0.55, 0.45}, {0.9, 0.1}, {0.8, 0.2}, {0.12, 0.3}});
}

}  // namespace

TEST_CASE("full omega matches entrywise evaluation") {
  const auto t = three_region_toy();
  const MaternSpec s{2.0, 0.5, 4.0, 0.5};
  const PartitionedCovariance om = build_omega(t.pop, t.sample, s, CovStructure::kFull);
  const Partition p = make_partition(t.pop, t.sample);
  std::vector<std::size_t> order = p.s_units;
  order.insert(order.end(), p.ns_units.begin(), p.ns_units.end());
  const Eigen::MatrixXd full = om.full();
  MaternSpec no_nugget = s;
  no_nugget.sigma2 = 0.0;
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = 0; b < order.size(); ++b) {
      const auto& la = t.pop.locations()[order[a]];
      const auto& lb = t.pop.locations()[order[b]];
      const double d = std::hypot(la.x - lb.x, la.y - lb.y);
      CHECK(full(Eigen::Index(a), Eigen::Index(b)) == doctest::Approx(matern(d, no_nugget)).epsilon(1e-13));
    }
}

TEST_CASE("block-diagonal omega zeroes cross-region entries and factors per block") {
  const auto t = three_region_toy();
  const MaternSpec s{2.0, 0.0, 4.0, 0.5};
  const PartitionedCovariance om = build_omega(t.pop, t.sample, s, CovStructure::kBlockDiagonal);
  const Partition p = make_partition(t.pop, t.sample);
  std::vector<std::size_t> order = p.s_units;
  order.insert(order.end(), p.ns_units.begin(), p.ns_units.end());
  const Eigen::MatrixXd full = om.full();
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = 0; b < order.size(); ++b)
      if (t.pop.locations()[order[a]].region != t.pop.locations()[order[b]].region)
        CHECK(full(Eigen::Index(a), Eigen::Index(b)) == 0.0);

  // Per-region factors assembled equal the factor of the whole, after
  // permuting the units region by region.
  std::vector<std::size_t> perm;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t a = 0; a < order.size(); ++a)
      if (t.pop.locations()[order[a]].region == r) perm.push_back(a);
  Eigen::MatrixXd permuted(full.rows(), full.cols());
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < perm.size(); ++j)
      permuted(Eigen::Index(i), Eigen::Index(j)) = full(Eigen::Index(perm[i]), Eigen::Index(perm[j]));
  const Eigen::MatrixXd whole = SpdFactor(permuted, 1.0, "whole").lower();
  Eigen::MatrixXd assembled = Eigen::MatrixXd::Zero(full.rows(), full.cols());
  Eigen::Index off = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    const Eigen::Index len = Eigen::Index(t.pop.region_sizes()[r]);
    assembled.block(off, off, len, len) =
        SpdFactor(Eigen::MatrixXd(permuted.block(off, off, len, len)), 1.0, "block").lower();
    off += len;
  }
  CHECK((whole - assembled).norm() < 1e-12);
}

TEST_CASE("large decay makes omega diagonal") {
  const auto t = three_region_toy();
  const PartitionedCovariance om = build_omega(t.pop, t.sample, MaternSpec{3.0, 0.0, 1e6, 0.5}, CovStructure::kFull);
  const Eigen::MatrixXd full = om.full();
  CHECK((full - 3.0 * Eigen::MatrixXd::Identity(full.rows(), full.cols())).norm() < 1e-12);
}

TEST_CASE("per-group specs require the block-diagonal structure") {
  const auto t = three_region_toy();
  const SurveyData data = make_survey(t.pop, t.sample);
  std::vector<MaternSpec> specs(3, MaternSpec{1.0, 0.0, 2.0, 0.5});
  CHECK_THROWS(build_omega(data, specs, CovStructure::kFull));
  CHECK_NOTHROW(build_omega(data, specs, CovStructure::kBlockDiagonal));
}

TEST_CASE("constant field has zero semivariance and bins count all pairs") {
  StreamRng r(2, 0);
  Coords c;
  for (int i = 0; i < 60; ++i) c.push_back(r.uniform(), r.uniform());
  const EmpiricalVariogram v = empirical_variogram(c, Eigen::VectorXd::Constant(60, 3.0), 10);
  std::size_t pairs = 0;
  for (const auto& b : v.bins) {
    pairs += b.pairs;
    if (b.gamma) CHECK(*b.gamma == 0.0);
  }
  CHECK(pairs == v.total_pairs);
  const Eigen::MatrixXd d = pairwise_distances(c);
  std::size_t within = 0;
  for (int i = 0; i < 60; ++i)
    for (int j = i + 1; j < 60; ++j) within += d(i, j) <= v.max_dist ? 1 : 0;
  CHECK(within == v.total_pairs);
  CHECK(v.max_dist == doctest::Approx(0.5 * d.maxCoeff()));
}

TEST_CASE("iid values give a flat variogram near the sample variance") {
  StreamRng r(6, 0);
  Coords c;
  Eigen::VectorXd y(800);
  for (int i = 0; i < 800; ++i) {
    c.push_back(r.uniform(), r.uniform());
    y[i] = r.normal(0.0, 2.0);
  }
  const double var = (y.array() - y.mean()).square().sum() / 799.0;
  const EmpiricalVariogram v = empirical_variogram(c, y, 8);
  for (const auto& b : v.bins) {
    REQUIRE(b.gamma.has_value());
    CHECK(std::abs(*b.gamma - var) < 0.15 * var);
  }
}

TEST_CASE("coincident points are rejected") {
  Coords c;
  c.push_back(1, 1);
  c.push_back(1, 1);
  CHECK_THROWS_AS(empirical_variogram(c, Eigen::Vector2d(1, 2)), DataError);
}

TEST_CASE("noiseless exponential semivariances are recovered") {
  EmpiricalVariogram emp;
  emp.max_dist = 1.0;
  const double c0 = 1.5, c1 = 6.0, a = 0.4;
  for (int i = 0; i < 12; ++i) {
    VariogramBin b;
    b.lo = i / 12.0;
    b.hi = (i + 1) / 12.0;
    b.mean_distance = 0.5 * (b.lo + b.hi);
    b.pairs = 100 + 10 * std::size_t(i);
    b.gamma = c0 + c1 * (1 - std::exp(-3 * b.mean_distance / a));
    emp.bins.push_back(b);
    emp.total_pairs += b.pairs;
  }
  const VariogramFit f = fit_exponential_variogram(emp);
  CHECK(f.range_identified);
  CHECK(f.nugget == doctest::Approx(c0).epsilon(1e-6));
  CHECK(f.partial_sill == doctest::Approx(c1).epsilon(1e-6));
  CHECK(f.range == doctest::Approx(a).epsilon(1e-6));
  CHECK(f.phi() == doctest::Approx(7.5).epsilon(1e-6));
  for (int i = 1; i < 50; ++i) CHECK(f.semivariance(0.02 * i) >= f.semivariance(0.02 * (i - 1)));
}

TEST_CASE("flat empirical variogram gives a nugget-only fit") {
  EmpiricalVariogram emp;
  for (int i = 0; i < 6; ++i) {
    VariogramBin b;
    b.lo = i;
    b.hi = i + 1;
    b.mean_distance = i + 0.5;
    b.pairs = 10;
    b.gamma = 2.0;
    emp.bins.push_back(b);
  }
  const VariogramFit f = fit_exponential_variogram(emp);
  CHECK_FALSE(f.range_identified);
  CHECK(f.nugget == doctest::Approx(2.0));
  CHECK(f.partial_sill == 0.0);
}

TEST_CASE("too few nonempty bins are rejected") {
  EmpiricalVariogram emp;
  emp.bins.resize(2);
  emp.bins[0].gamma = 1.0;
  emp.bins[0].pairs = 3;
  CHECK_THROWS(fit_exponential_variogram(emp));
}

TEST_CASE("variogram of a simulated field recovers nugget and partial sill") {
  SimConfig cfg;
  cfg.seed = 11;
  const FinitePopulation pop = generate_population(cfg);
  std::vector<std::size_t> all(pop.size());
  Eigen::VectorXd y(Eigen::Index(pop.size()));
  for (std::size_t u = 0; u < pop.size(); ++u) {
    all[u] = u;
    y[Eigen::Index(u)] = *pop.values()[u];
  }
  const VariogramFit f = fit_exponential_variogram(empirical_variogram(pop.coords(all), y, 15));
  CHECK(f.partial_sill > 4.5);
  CHECK(f.partial_sill < 18.0);
  CHECK(f.nugget > 2.0);
  CHECK(f.nugget < 8.0);
}
