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

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace geofps {

/// Split potential scale reduction over two or more chains.  Absent for a
/// single chain or when the within-chain variance vanishes.
std::optional<double> split_rhat(const std::vector<Eigen::VectorXd>& chains);

/// Effective sample size from the combined autocorrelation of the chains,
/// truncated with Geyer's initial monotone sequence.
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);
double effective_sample_size(const Eigen::VectorXd& chain);

/// Linear-interpolation sample quantile (type 7), p in [0, 1].
double quantile(std::vector<double> values, double p);
double quantile(const Eigen::VectorXd& values, double p);

struct DrawSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
};

DrawSummary summarize(const Eigen::VectorXd& values);

}  // namespace geofps
