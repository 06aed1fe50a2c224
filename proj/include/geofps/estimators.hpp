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

#include <vector>

#include <Eigen/Core>

#include "geofps/covariance.hpp"
#include "geofps/linalg.hpp"
#include "geofps/population.hpp"

namespace geofps {

/// y = X beta + e, e ~ N(0, V), beta ~ N(A nu, V_beta), nu ~ N(0, gamma2 I).
/// Blocks follow the canonical [s : ns] order.  gamma2 may be +infinity (flat
/// nu), which needs V_beta positive definite.
struct FixedVarianceModel {
  Eigen::MatrixXd V_s;
  Eigen::MatrixXd V_ns;
  Eigen::MatrixXd V_ns_s;  // K x k
  Eigen::MatrixXd V_beta;  // p x p
  Eigen::MatrixXd A;       // p x r
  double gamma2 = 0.0;
};

enum class ExpectationVariance {
  kMarginal,       // over y_s ~ N(0, V_s + X_s P X_s'), P = gamma2 A A' + V_beta
  kConditionalBeta // over y_s ~ N(X_s beta, V_s): the w' V_s w form
};

/// Gaussian posterior quantities shared by the three generic operations.
class LinearPosterior {
 public:
  LinearPosterior(const Eigen::MatrixXd& X_s, const Eigen::MatrixXd& X_ns,
                  const FixedVarianceModel& model);

  /// E[alpha'y | y_s]
  double mean(const SplitWeights& alpha, const Eigen::VectorXd& y_s) const;
  /// Var[E[alpha'y | y_s]]
  double variance_of_expectation(const SplitWeights& alpha,
                                 ExpectationVariance kind = ExpectationVariance::kMarginal) const;
  /// Var[alpha'y | y_s], clamped at 0.
  double posterior_variance(const SplitWeights& alpha) const;

  /// V_{beta | y_s}
  const Eigen::MatrixXd& beta_covariance() const { return V_beta_post_; }

 private:
  Eigen::VectorXd weight_on_ys(const SplitWeights& alpha) const;

  Eigen::MatrixXd X_s_;
  Eigen::MatrixXd P_;  // gamma2 A A' + V_beta (empty when gamma2 is infinite)
  Eigen::MatrixXd V_s_;
  SpdFactor V_s_factor_;
  Eigen::MatrixXd V_beta_post_;
  Eigen::MatrixXd B_V_;    // V_ns,s + Q V_{beta|y} X_s'
  Eigen::MatrixXd cond_;   // Q V_{beta|y} Q' + V_ns - V_ns,s V_s^{-1} V_s,ns
  bool flat_nu_ = false;
};

double posterior_mean_linear(const SplitWeights& alpha, const Eigen::VectorXd& y_s,
                             const DesignMatrices& design, const FixedVarianceModel& model);
double variance_of_expectation(const SplitWeights& alpha, const DesignMatrices& design,
                               const FixedVarianceModel& model,
                               ExpectationVariance kind = ExpectationVariance::kMarginal);
double posterior_variance(const SplitWeights& alpha, const DesignMatrices& design,
                          const FixedVarianceModel& model);

/// Simple random sample: y_i = beta + e_i with beta ~ N(0, xi2), e_i ~ N(0, sigma2).
/// xi2 may be +infinity.
double srs_estimate(const Eigen::VectorXd& alpha_s, const Eigen::VectorXd& alpha_ns,
                    const Eigen::VectorXd& y_s, double sigma2, double xi2);

/// lambda = delta2 / (delta2 + sigma2 / m); 1 when delta2 is infinite, 0 when m = 0.
double shrinkage_weight(double delta2, double sigma2, std::size_t m);

/// Two-stage estimate with region means mu_i ~ N(nu, delta2), nu ~ N(0, gamma2)
/// and within-region variances sigma2[g] (canonical group order; unsampled
/// entries are ignored).  delta2 and gamma2 may be +infinity.
double two_stage_estimate(const Partition& part, const SplitWeights& alpha,
                          const Eigen::VectorXd& y_s, double delta2, double gamma2,
                          const std::vector<double>& sigma2);

/// sum_i (M_i / T) ybar_i; every region must be sampled.
double stratified_limit_estimate(const Partition& part, const Eigen::VectorXd& y_s);

/// Two-stage estimate with a spatial effect: V_s = Omega_s + diag(v_sigma_s),
/// V_ns,s = Omega_ns,s, V_beta = delta2 I, A = 1.  delta2 must be finite;
/// gamma2 may be +infinity.
double spatial_two_stage_estimate(const Partition& part, const SplitWeights& alpha,
                                  const Eigen::VectorXd& y_s, const PartitionedCovariance& omega,
                                  const Eigen::VectorXd& v_sigma_s, double delta2, double gamma2);

/// Induced generic models, mainly for cross-checks.
FixedVarianceModel two_stage_model(const Partition& part, double delta2, double gamma2,
                                   const std::vector<double>& sigma2);
FixedVarianceModel spatial_two_stage_model(const Partition& part, const PartitionedCovariance& omega,
                                           const std::vector<double>& sigma2, double delta2,
                                           double gamma2);

}  // namespace geofps
