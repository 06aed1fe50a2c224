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

#include "geofps/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace geofps {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL));
}

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream)
    : state_(derive_seed(seed, stream)) {}

StreamRng::result_type StreamRng::operator()() {
  state_ += kGolden;
  return mix64(state_);
}

double StreamRng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double StreamRng::normal() { return normal_(*this); }

double StreamRng::normal(double mean, double sd) { return mean + sd * normal(); }

double StreamRng::gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw std::invalid_argument("gamma shape must be positive and finite");
  }
  std::gamma_distribution<double> g(shape, 1.0);
  return g(*this);
}

double StreamRng::inv_gamma(double shape, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("inverse-gamma scale must be positive and finite");
  }
  return scale / gamma(shape);
}

Eigen::VectorXd StreamRng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
  return z;
}

}  // namespace geofps
