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

#include "geofps/linalg.hpp"

#include <cmath>

#include "geofps/error.hpp"
#include "geofps/rng.hpp"

namespace geofps {

SpdFactor::SpdFactor(const Eigen::MatrixXd& a, double jitter_scale, const std::string& what) {
  if (a.rows() != a.cols()) throw std::invalid_argument(what + ": matrix is not square");
  if (a.rows() == 0) return;
  llt_.compute(a);
  if (llt_.info() == Eigen::Success) return;
  const double scale = (jitter_scale > 0.0 && std::isfinite(jitter_scale))
                           ? jitter_scale
                           : std::max(a.diagonal().cwiseAbs().mean(), 1.0);
  Eigen::MatrixXd b = a;
  b.diagonal().array() += kJitter * scale;
  llt_.compute(b);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError(what + ": matrix is not positive definite after jitter");
  }
  jittered_ = true;
}

Eigen::VectorXd SpdFactor::half_solve(const Eigen::VectorXd& b) const {
  return llt_.matrixL().solve(b);
}

double SpdFactor::quad(const Eigen::VectorXd& b) const {
  if (size() == 0) return 0.0;
  return half_solve(b).squaredNorm();
}

double SpdFactor::log_det() const {
  if (size() == 0) return 0.0;
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd SpdFactor::mul_lower(const Eigen::VectorXd& z) const {
  if (size() == 0) return Eigen::VectorXd();
  return llt_.matrixL() * z;
}

Eigen::VectorXd SpdFactor::sample(StreamRng& rng) const {
  return mul_lower(rng.normal_vector(size()));
}

}  // namespace geofps
