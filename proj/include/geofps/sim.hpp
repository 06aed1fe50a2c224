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
#include <string>
#include <vector>

#include "geofps/covariance.hpp"
#include "geofps/gibbs.hpp"
#include "geofps/population.hpp"
#include "geofps/rng.hpp"

namespace geofps {

struct SimConfig {
  std::size_t n_side = 10;  // grid regions per side
  std::size_t T = 2500;
  double mu = 2.0;
  MaternSpec spec{9.0, 4.0, 10.0, 0.5};  // tau2, sigma2 (nugget), phi, eta
  std::size_t n_sampled_regions = 25;
  double frac_min = 0.2;
  double frac_max = 0.9;
  std::uint64_t seed = 1;
  std::size_t max_T = 10000;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Region label of grid cell `cell` (row-major from the lower-left cell),
/// zero padded so labels sort in cell order.
std::string cell_label(std::size_t cell, std::size_t n_side);

/// T uniform locations on the unit square, region = enclosing grid cell, and
/// y = mu + omega + e with omega ~ GP(tau2, phi) and e ~ N(0, sigma2).  Cells
/// that receive no location are left out.  Uses the random stream (seed, 0).
FinitePopulation generate_population(const SimConfig& cfg);

/// n_regions regions uniformly without replacement; inside each a fraction
/// f ~ U(frac_min, frac_max) gives m_i = max(1, round(f M_i)) units drawn
/// without replacement.
SampleIndex two_stage_sample(const FinitePopulation& pop, std::size_t n_regions, double frac_min,
                             double frac_max, StreamRng& rng);

enum class StudyMethodKind { kGibbs, kExactTwoStage, kExactSpatial };

struct StudyMethod {
  StudyMethodKind kind = StudyMethodKind::kGibbs;
  ModelSpec model;  // used by kGibbs
  std::string name;
};

struct StudyOptions {
  std::size_t iters = 5000;
  std::size_t burnin = 1000;
  std::size_t exact_draws = 2000;
};

struct StudyRow {
  std::size_t replicate = 0;
  std::string method;
  double truth = 0.0;
  double fp_mean = 0.0;
  double fp_lo = 0.0;   // 2.5% quantile
  double fp_hi = 0.0;   // 97.5% quantile
  bool covered = false;
  double waic = 0.0;
  double waic_se = 0.0;
  double D = 0.0;
  double G = 0.0;
  double P = 0.0;
  double seconds = 0.0;
  std::optional<std::string> error;  // set when the fit failed
};

/// Replicate r draws its population and sample from derive_seed(cfg.seed, r).
/// Fit failures are recorded in the row and the study continues.
std::vector<StudyRow> replicate_study(const SimConfig& cfg, std::size_t n_replicates,
                                      const std::vector<StudyMethod>& methods,
                                      const StudyOptions& opt);

}  // namespace geofps
