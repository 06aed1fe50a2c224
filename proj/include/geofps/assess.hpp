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

#include <Eigen/Core>

#include "geofps/draws.hpp"

namespace geofps {

/// log N(y_h; mean(h, l), var(h, l)), k x L.  Throws NumericalError on a
/// non-finite entry.
Eigen::MatrixXd pointwise_loglik(const PointwiseDraws& draws, const Eigen::VectorXd& y);

struct WaicReport {
  double waic = 0.0;
  double lpd_hat = 0.0;
  double p_waic = 0.0;
  double se = 0.0;
};

/// WAIC = -2 (lpd - p_waic) from a k x L log-likelihood matrix (L >= 2).
/// Sample variances use the L - 1 divisor; SE = 2 sqrt(k) sd(elpd_h) with the
/// k - 1 divisor.
WaicReport waic(const Eigen::MatrixXd& loglik);

struct DScore {
  double D = 0.0;
  double G = 0.0;
  double P = 0.0;
};

/// G = sum_h (y_h - mean_l rep(h, l))^2, P = sum_h var_l rep(h, .), D = G + P.
DScore d_score(const Eigen::MatrixXd& replicates, const Eigen::VectorXd& y_reference);

/// One replicate per draw from the same pointwise density as pointwise_loglik.
/// Column l uses the random stream (seed, l).
Eigen::MatrixXd replicate_draws(const PointwiseDraws& draws, std::uint64_t seed);

/// Concatenates draws column-wise (e.g. several chains).
PointwiseDraws concat_draws(const PointwiseDraws& a, const PointwiseDraws& b);

}  // namespace geofps
