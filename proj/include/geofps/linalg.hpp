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

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace geofps {

class StreamRng;

/// Cholesky factor of a symmetric positive (semi)definite matrix.
///
/// Jitter policy: if the plain factorization fails, 1e-8 * jitter_scale is
/// added to the diagonal and the factorization retried once; a second failure
/// throws NumericalError naming `what`.
class SpdFactor {
 public:
  SpdFactor() = default;
  SpdFactor(const Eigen::MatrixXd& a, double jitter_scale, const std::string& what);

  Eigen::Index size() const { return llt_.rows(); }
  bool jittered() const { return jittered_; }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const {
    return size() == 0 ? b : Eigen::MatrixXd(llt_.solve(b));
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    return size() == 0 ? b : Eigen::VectorXd(llt_.solve(b));
  }

  /// L^{-1} b
  Eigen::VectorXd half_solve(const Eigen::VectorXd& b) const;
  /// b' A^{-1} b
  double quad(const Eigen::VectorXd& b) const;
  double log_det() const;
  /// L z, i.e. a draw from N(0, A) given z ~ N(0, I).
  Eigen::VectorXd mul_lower(const Eigen::VectorXd& z) const;
  Eigen::VectorXd sample(StreamRng& rng) const;

  Eigen::MatrixXd lower() const { return llt_.matrixL(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool jittered_ = false;
};

inline constexpr double kJitter = 1e-8;

}  // namespace geofps
