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

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "geofps/draws.hpp"
#include "geofps/population.hpp"

namespace geofps {

/// How nu enters the conjugate hierarchy.
enum class NuPrior {
  kProper,     // nu ~ N(0, delta2 V_nu)
  kFlat,       // limit V_nu -> infinity (V_nu^{-1} = 0)
  kFixedZero,  // nu = 0 with probability one; beta ~ N(0, delta2 V_beta)
};

/// IG(delta2 | a, b) N(nu | 0, delta2 V_nu) N(beta | A nu, delta2 V_beta)
/// N(y_s | X beta, delta2 V_s).  Inverse-gamma is shape / scale: density
/// proportional to x^{-a-1} exp(-b / x).
struct ConjugateModel {
  double a = 1.0;
  double b = 1.0;
  NuPrior nu_prior = NuPrior::kProper;
  Eigen::MatrixXd V_nu;    // r x r, used for kProper only
  Eigen::MatrixXd V_beta;  // p x p
  Eigen::MatrixXd V_s;     // k x k
  Eigen::MatrixXd A;       // p x r (unused for kFixedZero)
  Eigen::MatrixXd X_s;     // k x p
  Eigen::VectorXd y_s;
};

/// Scaled blocks for predicting y_ns: y_ns | beta, delta2 ~ N(X_ns beta +
/// V_ns,s V_s^{-1}(y_s - X_s beta), delta2 (V_ns - V_ns,s V_s^{-1} V_s,ns)).
struct ConjugatePrediction {
  Eigen::MatrixXd X_ns;    // K x p
  Eigen::MatrixXd V_ns;    // K x K
  Eigen::MatrixXd V_ns_s;  // K x k
};

struct ConjugateComponents {
  double a_star = 0.0;
  double b_star = 0.0;
  Eigen::MatrixXd M_nu;    // empty for kFixedZero
  Eigen::VectorXd m_nu;
  Eigen::MatrixXd M_beta;
  Eigen::MatrixXd Vb_inv_A;  // V_beta^{-1} A, so m_beta(nu) = Vb_inv_A nu + Xt_Vinv_y
  Eigen::VectorXd Xt_Vinv_y;

  Eigen::VectorXd m_beta(const Eigen::VectorXd& nu) const;
};

/// Posterior components, with R = V_s + X V_beta X':
///   a* = a + k/2,  b* = b + (y'R^{-1}y - m_nu' M_nu m_nu) / 2,
///   M_nu = (V_nu^{-1} + A'X'R^{-1}XA)^{-1},  m_nu = A'X'R^{-1}y,
///   M_beta = (V_beta^{-1} + X'V_s^{-1}X)^{-1},  m_beta = V_beta^{-1}A nu + X'V_s^{-1}y.
ConjugateComponents conjugate_components(const ConjugateModel& model);

struct ExactDraw {
  double delta2 = 0.0;
  Eigen::VectorXd nu;
  Eigen::VectorXd beta;
  Eigen::VectorXd y_ns;
  double fp_value = 0.0;
};

/// Composition sampling delta2 -> nu -> beta -> y_ns.  Draw l uses the random
/// stream (seed, l), so results do not depend on scheduling.
std::vector<ExactDraw> sample_exact(const ConjugateModel& model, const ConjugatePrediction& pred,
                                    const SplitWeights& alpha, std::size_t L, std::uint64_t seed);

/// Closed-form two-stage conditionals with fixed ratios r_i = sigma_i^2 / delta2.
struct Model1Conditionals {
  double c = 0.0;
  double d = 0.0;
  double a_star = 0.0;
  double b_star = 0.0;
  std::vector<double> lambda;  // canonical group order, 0 for unsampled groups
  std::vector<double> ybar;    // 0 for unsampled groups

  /// c*_i = (1 - lambda_i) nu + lambda_i ybar_i over the sampled groups.
  Eigen::VectorXd c_star(double nu) const;
  /// Diagonal of d* = (1 - lambda_i) over the sampled groups.
  Eigen::VectorXd d_star() const;
};

/// `groups` in canonical order (see group_summaries); `ratio[g]` is r_g for the
/// sampled groups.  gamma_tilde2 may be +infinity.
Model1Conditionals model1_conditionals(const std::vector<GroupSummary>& groups,
                                       const std::vector<double>& ratio, double gamma_tilde2,
                                       double a, double b);

struct Model2Conditionals {
  double a_star = 0.0;
  double b_star = 0.0;
  double mu_mean = 0.0;
  double mu_var_scale = 0.0;  // V = (1 + 1'Omega~^{-1}1)^{-1}; Var = delta2 V
};

/// Omega~_s = Omega_s / delta2 + I_k with the ratio held fixed.
Model2Conditionals model2_conditionals(const Eigen::VectorXd& y_s, const Eigen::MatrixXd& omega_tilde_s,
                                       double a, double b);

/// Draws and pointwise predictive for the fixed-ratio procedures.
struct ExactRun {
  std::vector<ExactDraw> draws;
  PointwiseDraws pointwise;
};

struct FixedRatioTwoStageOptions {
  double a = 3.0;
  double b = 5.0;
  double inv_gamma_tilde2 = 0.5;
  std::size_t draws = 2000;
  std::uint64_t seed = 1;
};

/// Two-stage exact sampler with the variance ratios fixed from the data:
/// r_i = sigma_hat_i^2 / Var(mu_hat), with sigma_hat^2 of unsampled or
/// single-unit regions replaced by the mean of the available ones.  Needs at
/// least two sampled regions.
ExactRun fixed_ratio_two_stage(const SurveyData& data, const SplitWeights& alpha,
                               const FixedRatioTwoStageOptions& opt);

struct FixedRatioSpatialOptions {
  double a = 3.0;
  double b = 5.0;
  double phi = 10.0;
  double tau2_over_delta2 = 9.0 / 4.0;
  std::size_t draws = 2000;
  std::uint64_t seed = 1;
};

/// Spatial exact sampler: y = 1 mu + omega + e with Omega = delta2 * ratio *
/// exp(-phi d) and e ~ N(0, delta2 I), mu ~ N(0, delta2).  The pointwise
/// predictive conditions on a draw of omega_s.
ExactRun fixed_ratio_spatial(const SurveyData& data, const SplitWeights& alpha,
                             const FixedRatioSpatialOptions& opt);

}  // namespace geofps
