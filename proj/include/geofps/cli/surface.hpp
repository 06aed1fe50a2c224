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
#include <vector>

#include "geofps/gibbs.hpp"
#include "geofps/population.hpp"

namespace geofps {

struct SurfaceCell {
  double x = 0.0;
  double y = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double p_exceed = 0.0;
};

struct RegionCell {
  std::string region_label;
  double mean = 0.0;
  double sd = 0.0;
  double p_exceed = 0.0;
};

/// Spatial models fill `grid`; the two-stage model fills `regions`.
struct SurfaceResult {
  std::vector<SurfaceCell> grid;
  std::vector<RegionCell> regions;
};

/// Posterior predictive of y at each cell of a resolution x resolution grid
/// spanning the bounding box of the population.  For every draw the Gaussian
/// process is conditioned on the observed y_s only; a cell takes the mean and
/// variance parameters of the region of its nearest population unit.  The
/// result is the mixture over draws: mean, sd and P(y > threshold).
SurfaceResult predict_surface(const FinitePopulation& pop, const SurveyData& data,
                              const ModelSpec& model, const std::vector<ChainState>& states,
                              std::size_t resolution, double threshold);

}  // namespace geofps
