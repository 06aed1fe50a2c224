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

#include <Eigen/Core>

namespace geofps {

/// Pointwise Gaussian predictive of the sampled units, one column per draw:
/// y_h | draw l ~ N(mean(h, l), var(h, l)).  Shared by the samplers and the
/// model assessment code.
struct PointwiseDraws {
  Eigen::MatrixXd mean;  // k x L
  Eigen::MatrixXd var;   // k x L

  Eigen::Index observations() const { return mean.rows(); }
  Eigen::Index draws() const { return mean.cols(); }
};

}  // namespace geofps
