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

#include "geofps/population.hpp"

#include <cmath>
#include <stdexcept>

#include "geofps/error.hpp"

namespace geofps {

FinitePopulation::FinitePopulation(std::vector<Location> locations,
                                   std::vector<std::optional<double>> values,
                                   std::vector<std::string> region_labels)
    : locations_(std::move(locations)),
      values_(std::move(values)),
      region_labels_(std::move(region_labels)) {
  if (values_.size() != locations_.size()) {
    throw DataError("population: " + std::to_string(values_.size()) + " values for " +
                    std::to_string(locations_.size()) + " locations");
  }
  const std::size_t N = region_labels_.size();
  region_sizes_.assign(N, 0);
  members_.assign(N, {});
  for (std::size_t u = 0; u < locations_.size(); ++u) {
    const Location& loc = locations_[u];
    if (!std::isfinite(loc.x) || !std::isfinite(loc.y)) {
      throw DataError("population: unit '" + loc.id + "' has non-finite coordinates");
    }
    if (loc.region >= N) {
      throw DataError("population: unit '" + loc.id + "' refers to unknown region " +
                      std::to_string(loc.region));
    }
    if (values_[u] && !std::isfinite(*values_[u])) {
      throw DataError("population: unit '" + loc.id + "' has a non-finite value");
    }
    ++region_sizes_[loc.region];
    members_[loc.region].push_back(u);
  }
  for (std::size_t r = 0; r < N; ++r) {
    if (region_sizes_[r] == 0) {
      throw DataError("population: region '" + region_labels_[r] + "' has no units");
    }
  }
}

bool FinitePopulation::all_values_known() const {
  for (const auto& v : values_) {
    if (!v) return false;
  }
  return true;
}

Coords FinitePopulation::coords(const std::vector<std::size_t>& units) const {
  Coords c;
  c.x.reserve(units.size());
  c.y.reserve(units.size());
  for (std::size_t u : units) c.push_back(locations_[u].x, locations_[u].y);
  return c;
}

SampleIndex::SampleIndex(const FinitePopulation& pop, const std::vector<bool>& sampled)
    : mask_(sampled), per_region_(pop.n_regions()) {
  if (sampled.size() != pop.size()) {
    throw DataError("sample index: mask has " + std::to_string(sampled.size()) +
                    " entries for a population of " + std::to_string(pop.size()));
  }
  for (std::size_t u = 0; u < sampled.size(); ++u) {
    if (!sampled[u]) continue;
    if (!pop.values()[u]) {
      throw DataError("sample index: sampled unit '" + pop.locations()[u].id + "' has no value");
    }
    per_region_[pop.locations()[u].region].push_back(u);
    ++k_;
  }
  for (std::size_t r = 0; r < per_region_.size(); ++r) {
    if (!per_region_[r].empty()) sampled_regions_.push_back(r);
  }
}

Partition make_partition(const FinitePopulation& pop, const SampleIndex& sample) {
  if (sample.n_regions() != pop.n_regions() || sample.mask().size() != pop.size()) {
    throw DataError("partition: sample index does not match the population");
  }
  Partition p;
  p.N = pop.n_regions();
  p.n = sample.sampled_regions().size();
  p.position_of.assign(p.N, 0);
  for (std::size_t r : sample.sampled_regions()) p.region_at.push_back(r);
  for (std::size_t r = 0; r < p.N; ++r) {
    if (sample.sampled_units(r).empty()) p.region_at.push_back(r);
  }
  for (std::size_t g = 0; g < p.N; ++g) {
    const std::size_t r = p.region_at[g];
    p.position_of[r] = g;
    p.labels.push_back(pop.region_labels()[r]);
    p.m.push_back(sample.sampled_units(r).size());
    p.M.push_back(pop.region_sizes()[r]);
  }
  for (std::size_t g = 0; g < p.N; ++g) {
    p.s_offset.push_back(p.s_units.size());
    for (std::size_t u : sample.sampled_units(p.region_at[g])) {
      p.s_units.push_back(u);
      p.s_group.push_back(g);
    }
  }
  for (std::size_t g = 0; g < p.N; ++g) {
    p.ns_offset.push_back(p.ns_units.size());
    for (std::size_t u : pop.units_in_region(p.region_at[g])) {
      if (sample.is_sampled(u)) continue;
      p.ns_units.push_back(u);
      p.ns_group.push_back(g);
    }
  }
  return p;
}

DesignMatrices build_design_matrices(const Partition& part) {
  DesignMatrices d;
  d.X_s = Eigen::MatrixXd::Zero(part.k(), part.N);
  d.X_ns = Eigen::MatrixXd::Zero(part.K(), part.N);
  d.X_s1 = Eigen::MatrixXd::Zero(part.k(), part.n);
  for (std::size_t h = 0; h < part.k(); ++h) {
    d.X_s(h, part.s_group[h]) = 1.0;
    d.X_s1(h, part.s_group[h]) = 1.0;
  }
  for (std::size_t h = 0; h < part.K(); ++h) d.X_ns(h, part.ns_group[h]) = 1.0;
  return d;
}

DesignMatrices build_design_matrices(const FinitePopulation& pop, const SampleIndex& sample) {
  return build_design_matrices(make_partition(pop, sample));
}

std::vector<GroupSummary> group_summaries(const FinitePopulation& pop, const SampleIndex& sample) {
  const Partition part = make_partition(pop, sample);
  std::vector<GroupSummary> out(part.N);
  for (std::size_t g = 0; g < part.N; ++g) {
    GroupSummary& s = out[g];
    s.label = part.labels[g];
    s.m = part.m[g];
    s.M = part.M[g];
    if (s.m == 0) continue;
    double sum = 0.0;
    for (std::size_t h = part.s_offset[g]; h < part.s_offset[g] + s.m; ++h) {
      sum += *pop.values()[part.s_units[h]];
    }
    const double mean = sum / static_cast<double>(s.m);
    double ss = 0.0;
    for (std::size_t h = part.s_offset[g]; h < part.s_offset[g] + s.m; ++h) {
      const double e = *pop.values()[part.s_units[h]] - mean;
      ss += e * e;
    }
    s.mean = mean;
    s.sum_sq_dev = ss;
    if (s.m >= 2) s.variance = ss / static_cast<double>(s.m - 1);
  }
  return out;
}

Eigen::VectorXd observed_values(const FinitePopulation& pop, const Partition& part) {
  Eigen::VectorXd y(part.k());
  for (std::size_t h = 0; h < part.k(); ++h) {
    const auto& v = pop.values()[part.s_units[h]];
    if (!v) throw DataError("sampled unit '" + pop.locations()[part.s_units[h]].id + "' has no value");
    y[h] = *v;
  }
  return y;
}

std::optional<Eigen::VectorXd> nonsampled_truth(const FinitePopulation& pop, const Partition& part) {
  Eigen::VectorXd y(part.K());
  for (std::size_t h = 0; h < part.K(); ++h) {
    const auto& v = pop.values()[part.ns_units[h]];
    if (!v) return std::nullopt;
    y[h] = *v;
  }
  return y;
}

SplitWeights split_weights(const Partition& part, const Eigen::VectorXd& alpha) {
  if (static_cast<std::size_t>(alpha.size()) != part.T()) {
    throw std::invalid_argument("weights: length " + std::to_string(alpha.size()) +
                                " does not match population size " + std::to_string(part.T()));
  }
  SplitWeights w{Eigen::VectorXd(part.k()), Eigen::VectorXd(part.K())};
  for (std::size_t h = 0; h < part.k(); ++h) w.s[h] = alpha[part.s_units[h]];
  for (std::size_t h = 0; h < part.K(); ++h) w.ns[h] = alpha[part.ns_units[h]];
  if (!w.s.allFinite() || !w.ns.allFinite()) throw std::invalid_argument("weights: non-finite entry");
  return w;
}

Eigen::VectorXd mean_weights(std::size_t T) {
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(T), 1.0 / static_cast<double>(T));
}

double fp_functional(const SplitWeights& alpha, const Eigen::VectorXd& y_s,
                     const Eigen::VectorXd& y_ns) {
  if (alpha.s.size() != y_s.size() || alpha.ns.size() != y_ns.size()) {
    throw std::invalid_argument("fp_functional: length mismatch");
  }
  return alpha.s.dot(y_s) + alpha.ns.dot(y_ns);
}

double fp_functional(const Partition& part, const Eigen::VectorXd& alpha,
                     const Eigen::VectorXd& y_s, const Eigen::VectorXd& y_ns) {
  return fp_functional(split_weights(part, alpha), y_s, y_ns);
}

Eigen::VectorXd to_population_order(const Partition& part, const Eigen::VectorXd& y_s,
                                    const Eigen::VectorXd& y_ns) {
  if (static_cast<std::size_t>(y_s.size()) != part.k() ||
      static_cast<std::size_t>(y_ns.size()) != part.K()) {
    throw std::invalid_argument("to_population_order: length mismatch");
  }
  Eigen::VectorXd y(part.T());
  for (std::size_t h = 0; h < part.k(); ++h) y[part.s_units[h]] = y_s[h];
  for (std::size_t h = 0; h < part.K(); ++h) y[part.ns_units[h]] = y_ns[h];
  return y;
}

SurveyData make_survey(const FinitePopulation& pop, const SampleIndex& sample) {
  SurveyData d;
  d.part = make_partition(pop, sample);
  if (d.part.k() == 0) throw DataError("survey has no sampled units");
  d.y_s = observed_values(pop, d.part);
  d.coords_s = pop.coords(d.part.s_units);
  d.coords_ns = pop.coords(d.part.ns_units);
  d.y_ns_truth = nonsampled_truth(pop, d.part);
  return d;
}

}  // namespace geofps
