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
#include <limits>
#include <random>

#include <Eigen/Core>

namespace geofps {

/// Counter-based random stream keyed by (seed, stream).
///
/// The generator is SplitMix64 started from a state derived from both keys, so
/// any (seed, stream) pair can be materialized independently: per-draw and
/// per-chain streams stay reproducible regardless of scheduling.  Satisfies
/// UniformRandomBitGenerator, so the <random> distributions work on it.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  double uniform();            // [0, 1)
  double normal();             // N(0, 1)
  double normal(double mean, double sd);
  double gamma(double shape);  // Gamma(shape, scale = 1)
  /// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale / x).
  double inv_gamma(double shape, double scale);

  Eigen::VectorXd normal_vector(Eigen::Index n);

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_;
};

/// Stateless 64-bit mixer used to derive stream keys.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed, e.g. one per replicate.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace geofps
