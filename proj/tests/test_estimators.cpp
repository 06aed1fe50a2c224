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
#include <limits>
#include <vector>

#include "doctest.h"
#include "geofps/covariance.hpp"
#include "geofps/error.hpp"
#include "geofps/estimators.hpp"
#include "oracles.hpp"

using namespace geofps;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> random_sigma2(StreamRng& rng, std::size_t N) {
  std::vector<double> s(N);
  for (auto& v : s) v = 0.3 + 2.0 * rng.uniform();
  return s;
}

SplitWeights random_alpha(StreamRng& rng, const Partition& p) {
  Eigen::VectorXd a(Eigen::Index(p.T()));
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform() - 0.3;
  return split_weights(p, a);
}

}  // namespace

TEST_CASE("generic formulas match joint conditioning on random two-stage instances") {
  StreamRng rng(21, 0);
  for (int rep = 0; rep < 40; ++rep) {
    const auto t = oracle::random_toy(rng, 4 + rng() % 9, 1 + rng() % 4);
    const Partition p = make_partition(t.pop, t.sample);
    const Eigen::VectorXd y_s = observed_values(t.pop, p);
    const double delta2 = 0.2 + 3 * rng.uniform(), gamma2 = 0.5 + 4 * rng.uniform();
    const auto sigma2 = random_sigma2(rng, p.N);
    const SplitWeights a = random_alpha(rng, p);
    const DesignMatrices d = build_design_matrices(p);
    const FixedVarianceModel m = two_stage_model(p, delta2, gamma2, sigma2);
    const auto want = oracle::condition(oracle::two_stage_joint(t.pop, p, delta2, gamma2, sigma2), p.k(),
                                        oracle::canonical_alpha(a), oracle::to_l(y_s));
    CHECK(oracle::rel_err(posterior_mean_linear(a, y_s, d, m), want.mean) < 1e-8);
    CHECK(oracle::rel_err(posterior_variance(a, d, m), want.var) < 1e-8);
    CHECK(oracle::rel_err(variance_of_expectation(a, d, m), want.var_of_mean) < 1e-8);
    CHECK(oracle::rel_err(two_stage_estimate(p, a, y_s, delta2, gamma2, sigma2), want.mean) < 1e-8);
  }
}

TEST_CASE("spatial two-stage estimate matches joint conditioning") {
  StreamRng rng(22, 0);
  for (int rep = 0; rep < 30; ++rep) {
    const auto t = oracle::random_toy(rng, 5 + rng() % 8, 1 + rng() % 4);
    const Partition p = make_partition(t.pop, t.sample);
    const SurveyData data = make_survey(t.pop, t.sample);
    const double delta2 = 0.5 + rng.uniform(), gamma2 = 1.0 + rng.uniform();
    const double tau2 = 0.5 + 2 * rng.uniform(), phi = 1.0 + 5 * rng.uniform();
    const bool regional = rep % 2 == 1;
    const auto sigma2 = random_sigma2(rng, p.N);
    const SplitWeights a = random_alpha(rng, p);
    const PartitionedCovariance om = build_omega(
        data, {MaternSpec{tau2, 0.0, phi, 0.5}}, regional ? CovStructure::kBlockDiagonal : CovStructure::kFull);
    Eigen::VectorXd v_sigma(Eigen::Index(p.k()));
    for (std::size_t h = 0; h < p.k(); ++h) v_sigma[Eigen::Index(h)] = sigma2[p.s_group[h]];
    const auto want =
        oracle::condition(oracle::two_stage_joint(t.pop, p, delta2, gamma2, sigma2, tau2, phi, regional), p.k(),
                          oracle::canonical_alpha(a), oracle::to_l(data.y_s));
    CHECK(oracle::rel_err(spatial_two_stage_estimate(p, a, data.y_s, om, v_sigma, delta2, gamma2), want.mean) < 1e-8);
    const FixedVarianceModel m = spatial_two_stage_model(p, om, sigma2, delta2, gamma2);
    const DesignMatrices d = build_design_matrices(p);
    CHECK(oracle::rel_err(posterior_mean_linear(a, data.y_s, d, m), want.mean) < 1e-8);
    CHECK(oracle::rel_err(posterior_variance(a, d, m), want.var) < 1e-8);
  }
}

TEST_CASE("spatial estimate without a field reduces to the two-stage estimate") {
  StreamRng rng(23, 0);
  const auto t = oracle::random_toy(rng, 10, 3);
  const Partition p = make_partition(t.pop, t.sample);
  const SurveyData data = make_survey(t.pop, t.sample);
  const auto sigma2 = random_sigma2(rng, p.N);
  const SplitWeights a = split_weights(p, mean_weights(p.T()));
  PartitionedCovariance om;
  om.omega_s = Eigen::MatrixXd::Zero(Eigen::Index(p.k()), Eigen::Index(p.k()));
  om.omega_s_ns = Eigen::MatrixXd::Zero(Eigen::Index(p.k()), Eigen::Index(p.K()));
  om.omega_ns = Eigen::MatrixXd::Zero(Eigen::Index(p.K()), Eigen::Index(p.K()));
  Eigen::VectorXd v_sigma(Eigen::Index(p.k()));
  for (std::size_t h = 0; h < p.k(); ++h) v_sigma[Eigen::Index(h)] = sigma2[p.s_group[h]];
  CHECK(spatial_two_stage_estimate(p, a, data.y_s, om, v_sigma, 1.3, 2.0) ==
        doctest::Approx(two_stage_estimate(p, a, data.y_s, 1.3, 2.0, sigma2)).epsilon(1e-10));
}

TEST_CASE("census gives alpha'y with zero posterior variance") {
  const auto t = oracle::make_toy({0, 0, 1, 1, 2}, {true, true, true, true, true}, {1, 2, 3, 4, 5}, 3);
  const Partition p = make_partition(t.pop, t.sample);
  const Eigen::VectorXd y_s = observed_values(t.pop, p);
  const SplitWeights a = split_weights(p, mean_weights(5));
  const std::vector<double> s2(3, 1.0);
  const DesignMatrices d = build_design_matrices(p);
  const FixedVarianceModel m = two_stage_model(p, 1.0, 2.0, s2);
  CHECK(posterior_mean_linear(a, y_s, d, m) == doctest::Approx(3.0));
  CHECK(posterior_variance(a, d, m) == 0.0);
  CHECK(two_stage_estimate(p, a, y_s, 1.0, 2.0, s2) == doctest::Approx(3.0));
}

TEST_CASE("independence with alpha on sampled units gives alpha_s' y_s") {
  const auto t = oracle::make_toy({0, 0, 1, 1}, {true, false, true, false}, {1, 2, 3, 4}, 2);
  const Partition p = make_partition(t.pop, t.sample);
  const Eigen::VectorXd y_s = observed_values(t.pop, p);
  FixedVarianceModel m;
  m.V_s = Eigen::MatrixXd::Identity(2, 2);
  m.V_ns = Eigen::MatrixXd::Identity(2, 2);
  m.V_ns_s = Eigen::MatrixXd::Zero(2, 2);
  m.V_beta = Eigen::MatrixXd::Zero(2, 2);
  m.A = Eigen::MatrixXd::Ones(2, 1);
  m.gamma2 = 0.0;
  SplitWeights a;
  a.s = Eigen::Vector2d(0.5, 2.0);
  a.ns = Eigen::Vector2d::Zero();
  const DesignMatrices d = build_design_matrices(p);
  CHECK(posterior_mean_linear(a, y_s, d, m) == doctest::Approx(0.5 * y_s[0] + 2.0 * y_s[1]));
  CHECK(variance_of_expectation(a, d, m) == doctest::Approx(a.s.squaredNorm()));

  // alpha on a single nonsampled unit: the estimate is the constant 0 and the
  // posterior variance is that unit's own variance.
  SplitWeights b;
  b.s = Eigen::Vector2d::Zero();
  b.ns = Eigen::Vector2d(0.0, 1.0);
  m.V_ns(1, 1) = 2.5;
  CHECK(variance_of_expectation(b, d, m) == doctest::Approx(0.0));
  CHECK(posterior_variance(b, d, m) == doctest::Approx(2.5));
  CHECK(posterior_mean_linear(b, y_s, d, m) == doctest::Approx(0.0));
}

TEST_CASE("variance of the expectation matches simulation") {
  StreamRng rng(31, 0);
  const auto t = oracle::random_toy(rng, 8, 3);
  const Partition p = make_partition(t.pop, t.sample);
  const auto sigma2 = random_sigma2(rng, p.N);
  const SplitWeights a = split_weights(p, mean_weights(p.T()));
  const DesignMatrices d = build_design_matrices(p);
  const FixedVarianceModel m = two_stage_model(p, 1.1, 1.7, sigma2);
  const LinearPosterior post(d.X_s, d.X_ns, m);

  const oracle::MatL S = oracle::two_stage_joint(t.pop, p, 1.1, 1.7, sigma2);
  const auto k = Eigen::Index(p.k());
  const Eigen::MatrixXd S_s = S.topLeftCorner(k, k).cast<double>();
  const SpdFactor f(S_s, 1.0, "marginal");
  const int L = 100000;
  double s1 = 0, s2 = 0;
  for (int l = 0; l < L; ++l) {
    const double e = post.mean(a, f.sample(rng));
    s1 += e;
    s2 += e * e;
  }
  const double mean = s1 / L, var = s2 / L - mean * mean;
  const double want = post.variance_of_expectation(a);
  // Var of the sample variance of a normal is 2 sigma^4 / (L - 1).
  CHECK(std::abs(var - want) < 3 * std::sqrt(2.0 / (L - 1)) * want);
}

TEST_CASE("law of total variance at fixed hyperparameters") {
  StreamRng rng(32, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = oracle::random_toy(rng, 9, 3);
    const Partition p = make_partition(t.pop, t.sample);
    const auto sigma2 = random_sigma2(rng, p.N);
    const SplitWeights a = random_alpha(rng, p);
    const DesignMatrices d = build_design_matrices(p);
    const FixedVarianceModel m = two_stage_model(p, 0.8, 1.5, sigma2);
    const oracle::VecL al = oracle::canonical_alpha(a);
    const long double total = al.dot(oracle::two_stage_joint(t.pop, p, 0.8, 1.5, sigma2) * al);
    CHECK(oracle::rel_err(variance_of_expectation(a, d, m) + posterior_variance(a, d, m), total) < 1e-9);
  }
}

TEST_CASE("conditional-on-beta variance reduces to the marginal one without prior spread") {
  StreamRng rng(33, 0);
  const auto t = oracle::random_toy(rng, 9, 3);
  const Partition p = make_partition(t.pop, t.sample);
  const SplitWeights a = random_alpha(rng, p);
  const DesignMatrices d = build_design_matrices(p);
  FixedVarianceModel m = two_stage_model(p, 1e-300, 1e-300, random_sigma2(rng, p.N));
  m.V_beta.setZero();
  m.gamma2 = 0.0;
  m.V_beta.diagonal().setConstant(1e-12);
  const double marg = variance_of_expectation(a, d, m, ExpectationVariance::kMarginal);
  const double cond = variance_of_expectation(a, d, m, ExpectationVariance::kConditionalBeta);
  CHECK(cond == doctest::Approx(marg).epsilon(1e-6));
}

TEST_CASE("srs estimate") {
  const Eigen::Vector2d y(1, 3), as(0.25, 0.25), ans(0.25, 0.25);
  CHECK(srs_estimate(as, ans, y, 1.0, 1.0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(srs_estimate(as, ans, y, 1.0, 1e12) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(srs_estimate(as, ans, y, 1.0, kInf) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(srs_estimate(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d::Zero(), y, 1.0, 1.0) == doctest::Approx(2.4));
  CHECK_THROWS(srs_estimate(as, ans, y, 0.0, 1.0));
  CHECK_THROWS(srs_estimate(as, ans, y, 1.0, -1.0));

  // Same number through the generic path: y_i = beta + e_i, beta ~ N(0, xi2).
  const auto t = oracle::make_toy({0, 0, 0, 0}, {true, true, false, false}, {1, 3, 0, 0}, 1);
  const Partition p = make_partition(t.pop, t.sample);
  FixedVarianceModel m;
  m.V_s = Eigen::MatrixXd::Identity(2, 2);
  m.V_ns = Eigen::MatrixXd::Identity(2, 2);
  m.V_ns_s = Eigen::MatrixXd::Zero(2, 2);
  m.V_beta = Eigen::MatrixXd::Identity(1, 1);
  m.A = Eigen::MatrixXd::Ones(1, 1);
  m.gamma2 = 0.0;
  const SplitWeights a = split_weights(p, mean_weights(4));
  CHECK(posterior_mean_linear(a, y, build_design_matrices(p), m) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("shrinkage weights") {
  CHECK(shrinkage_weight(0.5, 1.0, 2) == doctest::Approx(0.5));
  CHECK(shrinkage_weight(1.0, 1.0, 0) == 0.0);
  CHECK(shrinkage_weight(kInf, 1.0, 3) == 1.0);
  for (std::size_t m = 1; m < 20; ++m) CHECK(shrinkage_weight(1.0, 2.0, m + 1) > shrinkage_weight(1.0, 2.0, m));
  for (int i = 1; i < 20; ++i) {
    CHECK(shrinkage_weight(0.1 * (i + 1), 2.0, 3) > shrinkage_weight(0.1 * i, 2.0, 3));
    CHECK(shrinkage_weight(1.0, 0.1 * (i + 1), 3) < shrinkage_weight(1.0, 0.1 * i, 3));
  }
}

TEST_CASE("two-stage estimate with an unsampled region equals the generic path") {
  // N = 2, n = 1, M = (2, 2), m = (2, 0).
  const auto t = oracle::make_toy({0, 0, 1, 1}, {true, true, false, false}, {1.5, 2.5, 0, 0}, 2);
  const Partition p = make_partition(t.pop, t.sample);
  const Eigen::VectorXd y_s = observed_values(t.pop, p);
  const SplitWeights a = split_weights(p, mean_weights(4));
  const std::vector<double> s2 = {0.8, 1.2};
  const double got = two_stage_estimate(p, a, y_s, 0.6, 2.0, s2);
  const DesignMatrices d = build_design_matrices(p);
  CHECK(got == doctest::Approx(posterior_mean_linear(a, y_s, d, two_stage_model(p, 0.6, 2.0, s2))).epsilon(1e-12));
  // Region 0 is a census; lambda = 0.6 / (0.6 + 0.8 / 2) = 0.6 and the
  // unsampled region is predicted by nu_hat = lambda ybar / (1 / gamma_tilde2 + lambda)
  // with gamma_tilde2 = 2 / 0.6.
  const double lam = 0.6, ybar = 2.0, gt = 2.0 / 0.6;
  const double nu_hat = lam * ybar / (1.0 / gt + lam);
  CHECK(got == doctest::Approx((y_s.sum() + 2 * nu_hat) / 4.0).epsilon(1e-12));
}

TEST_CASE("stratified limit") {
  // M = (10, 30) with ybar = (1, 2).
  std::vector<std::size_t> region;
  std::vector<bool> sampled;
  std::vector<double> values;
  for (int i = 0; i < 10; ++i) {
    region.push_back(0);
    sampled.push_back(i < 2);
    values.push_back(i == 0 ? 0.5 : 1.5);
  }
  for (int i = 0; i < 30; ++i) {
    region.push_back(1);
    sampled.push_back(i < 3);
    values.push_back(i < 3 ? 1.5 + i * 0.5 : 9.0);
  }
  const auto t = oracle::make_toy(region, sampled, values, 2);
  const Partition p = make_partition(t.pop, t.sample);
  const Eigen::VectorXd y_s = observed_values(t.pop, p);
  CHECK(stratified_limit_estimate(p, y_s) == doctest::Approx(1.75).epsilon(1e-14));
  const SplitWeights a = split_weights(p, mean_weights(40));
  CHECK(two_stage_estimate(p, a, y_s, 1e10, 1e20, {1.0, 1.0}) == doctest::Approx(1.75).epsilon(1e-6));
  CHECK(two_stage_estimate(p, a, y_s, kInf, kInf, {1.0, 1.0}) == doctest::Approx(1.75).epsilon(1e-12));

  const auto u = oracle::make_toy({0, 1, 1}, {true, false, false}, {1, 2, 3}, 2);
  CHECK_THROWS_AS(stratified_limit_estimate(make_partition(u.pop, u.sample), Eigen::VectorXd::Ones(1)), DataError);
}

TEST_CASE("posterior variance is nonnegative") {
  StreamRng rng(34, 0);
  for (int rep = 0; rep < 30; ++rep) {
    const auto t = oracle::random_toy(rng, 10, 3);
    const Partition p = make_partition(t.pop, t.sample);
    const DesignMatrices d = build_design_matrices(p);
    CHECK(posterior_variance(random_alpha(rng, p), d, two_stage_model(p, 1.0, 1.0, random_sigma2(rng, p.N))) >= 0.0);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  const auto t = oracle::make_toy({0, 0, 1}, {true, false, true}, {1, 2, 3}, 2);
  const Partition p = make_partition(t.pop, t.sample);
  const SplitWeights a = split_weights(p, mean_weights(3));
  const DesignMatrices d = build_design_matrices(p);
  const FixedVarianceModel m = two_stage_model(p, 1.0, 1.0, {1.0, 1.0});
  CHECK_THROWS(posterior_mean_linear(a, Eigen::VectorXd::Ones(3), d, m));
  CHECK_THROWS(two_stage_estimate(p, a, Eigen::VectorXd::Ones(2), 1.0, 1.0, {1.0}));
}
