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

#include "geofps/cli/csv.hpp"
#include "geofps/population.hpp"

namespace geofps {

struct IngestReport {
  std::size_t rows = 0;
  std::size_t duplicates_removed = 0;
  std::size_t regions_dropped = 0;
  std::size_t units_in_dropped_regions = 0;
  std::size_t regions = 0;
  std::size_t units = 0;
  std::size_t sampled = 0;
};

struct IngestResult {
  FinitePopulation pop;
  SampleIndex sample;
  IngestReport report;
};

/// Reads records with columns id, x, y, region_label, value, sampled (any
/// order).  Cleaning runs in this order: (1) records sharing identical
/// coordinates are reduced to one kept at random (random stream (seed, 2)),
/// (2) regions with fewer than min_region_size records are dropped, (3)
/// regions are re-indexed densely in sorted label order.  Malformed rows
/// throw DataError with the line number; so does a result without sampled units.
IngestResult ingest_table(const csv::Table& table, std::uint64_t seed, std::size_t min_region_size);
IngestResult ingest_csv(const std::string& path, std::uint64_t seed, std::size_t min_region_size);

/// Writes the population in the ingest format.  With `hide_nonsampled` the
/// value column is left empty for units outside the sample.
void write_population_csv(const std::string& path, const FinitePopulation& pop,
                          const SampleIndex& sample, bool hide_nonsampled);

}  // namespace geofps
