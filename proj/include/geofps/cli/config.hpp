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
#include <string>
#include <string_view>
#include <vector>

#include "geofps/gibbs.hpp"
#include "geofps/sim.hpp"

namespace geofps {

enum class FitMethod { kGibbs, kExact };

/// Settings for every command, read from a flat key = value file.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";

  // data
  std::string input;
  std::size_t min_region_size = 10;

  // model, priors, MCMC
  ModelSpec model;
  FitMethod method = FitMethod::kGibbs;
  std::size_t iters = 5000;
  std::size_t burnin = 1000;
  std::size_t chains = 2;
  std::size_t exact_draws = 2000;

  SimConfig sim;

  // surface
  std::size_t surface_resolution = 50;
  double threshold = 45.0;
  std::size_t surface_max_draws = 200;

  // variogram
  std::size_t variogram_bins = 15;
  double variogram_max_dist = 0.0;
  bool variogram_use_population = false;

  // assess
  std::vector<ModelKind> assess_models{ModelKind::kTwoStage, ModelKind::kSpatial,
                                       ModelKind::kTwoStageSpatial, ModelKind::kRegionalSpatial};
};

/// Parses `key = value` lines; '#' starts a comment.  Unknown keys, repeated
/// keys and malformed values throw ConfigError naming the key and line.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Every recognised key, for documentation and tests.
std::vector<std::string> config_keys();

}  // namespace geofps
