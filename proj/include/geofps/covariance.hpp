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
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "geofps/population.hpp"

namespace geofps {

/// Matern parameters.  tau2 is the spatial (partial sill) variance, sigma2 the
/// nugget, phi the decay and eta the smoothness; eta = 0.5 is exponential.
struct MaternSpec {
  double tau2 = 1.0;
  double sigma2 = 0.0;
  double phi = 1.0;
  double eta = 0.5;

  /// Throws std::invalid_argument on a non-finite or out-of-range field.
  void validate() const;
};

/// Correlation rho(d) of the Matern family (rho(0) = 1).  eta = 0.5 takes the
/// closed exponential form exp(-phi d).
double matern_correlation(double d, double phi, double eta);
/// Same family always evaluated through the Bessel K representation.
double matern_correlation_bessel(double d, double phi, double eta);

/// C(d): sigma2 + tau2 at d = 0, tau2 * rho(d) otherwise.
double matern(double d, const MaternSpec& spec);

/// 3 / phi, the exponential-kernel convention.
double effective_range(double phi);
/// Distance where the correlation falls to 0.05, found by bisection.
double practical_range(double phi, double eta);

Eigen::MatrixXd pairwise_distances(const Coords& c);
Eigen::MatrixXd cross_distances(const Coords& a, const Coords& b);

/// tau2 * rho(|a_i - b_j|), without nugget.  Uses the active SIMD kernels for
/// eta = 0.5.
Eigen::MatrixXd spatial_covariance(const Coords& a, const Coords& b, double tau2, double phi,
                                   double eta = 0.5);
Eigen::MatrixXd spatial_covariance(const Coords& c, double tau2, double phi, double eta = 0.5);

enum class CovStructure { kFull, kBlockDiagonal, kNone };

/// Spatial covariance partitioned by the canonical sampled / nonsampled order.
struct PartitionedCovariance {
  Eigen::MatrixXd omega_s;     // k x k
  Eigen::MatrixXd omega_s_ns;  // k x K
  Eigen::MatrixXd omega_ns;    // K x K
  CovStructure structure = CovStructure::kFull;

  /// Reassembled (k + K) square matrix in [s : ns] order.
  Eigen::MatrixXd full() const;
};

/// Builds Omega for the survey's units.  `specs` holds either one spec used
/// everywhere or one per canonical group; per-group specs require the
/// block-diagonal structure.  The nugget is not included.  When `verify` is
/// set the assembled matrix must admit a Cholesky factor under the jitter
/// policy, otherwise NumericalError is thrown.
PartitionedCovariance build_omega(const SurveyData& data, const std::vector<MaternSpec>& specs,
                                  CovStructure structure, bool verify = true);
PartitionedCovariance build_omega(const FinitePopulation& pop, const SampleIndex& sample,
                                  const MaternSpec& spec, CovStructure structure,
                                  bool verify = true);

struct VariogramBin {
  double lo = 0.0;
  double hi = 0.0;
  double mean_distance = 0.0;  // average pair distance in the bin (midpoint when empty)
  std::size_t pairs = 0;
  std::optional<double> gamma;  // absent for empty bins
};

struct EmpiricalVariogram {
  std::vector<VariogramBin> bins;
  double max_dist = 0.0;
  std::size_t total_pairs = 0;  // pairs with distance <= max_dist
};

/// Matheron estimator over `n_bins` equal-width bins on (0, max_dist].  A
/// non-positive max_dist selects half the largest pairwise distance.
EmpiricalVariogram empirical_variogram(const Coords& c, const Eigen::VectorXd& values,
                                       std::size_t n_bins = 15, double max_dist = 0.0);

struct VariogramFit {
  double nugget = 0.0;
  double partial_sill = 0.0;
  double range = 0.0;  // practical range a in gamma(h) = c0 + c1 (1 - exp(-3h / a))
  bool range_identified = true;

  double phi() const { return 3.0 / range; }
  double semivariance(double h) const;
};

/// Weighted least squares fit of the exponential variogram with weights
/// N_h / h^2 (pairs over squared lag), which favours the short lags that pin
/// down the nugget and range.  Needs at least three nonempty bins.
VariogramFit fit_exponential_variogram(const EmpiricalVariogram& emp);

}  // namespace geofps
