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

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace geofps {

/// A population unit.  `region` is the dense region index in [0, N).
struct Location {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::size_t region = 0;
};

/// Planar coordinates stored column-wise so distance kernels can stream them.
struct Coords {
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return x.size(); }
  void push_back(double px, double py) {
    x.push_back(px);
    y.push_back(py);
  }
};

/// All T units of the finite population.  Immutable after construction.
class FinitePopulation {
 public:
  FinitePopulation() = default;
  /// `region_labels[r]` is the original label of dense region r.  Every
  /// region must own at least one unit.
  FinitePopulation(std::vector<Location> locations, std::vector<std::optional<double>> values,
                   std::vector<std::string> region_labels);

  std::size_t size() const { return locations_.size(); }
  std::size_t n_regions() const { return region_labels_.size(); }

  const std::vector<Location>& locations() const { return locations_; }
  const std::vector<std::optional<double>>& values() const { return values_; }
  const std::vector<std::string>& region_labels() const { return region_labels_; }
  const std::vector<std::size_t>& region_sizes() const { return region_sizes_; }
  /// Population indices of region r in ascending order.
  const std::vector<std::size_t>& units_in_region(std::size_t r) const { return members_[r]; }

  bool all_values_known() const;
  Coords coords(const std::vector<std::size_t>& units) const;

 private:
  std::vector<Location> locations_;
  std::vector<std::optional<double>> values_;
  std::vector<std::string> region_labels_;
  std::vector<std::size_t> region_sizes_;
  std::vector<std::vector<std::size_t>> members_;
};

/// Which regions and which units inside them were observed.
class SampleIndex {
 public:
  SampleIndex() = default;
  /// `sampled[u]` flags population unit u.  A region is sampled iff at least
  /// one of its units is.  Sampled units must carry a known value.
  SampleIndex(const FinitePopulation& pop, const std::vector<bool>& sampled);

  std::size_t n_regions() const { return per_region_.size(); }
  /// Dense ids of sampled regions, ascending.
  const std::vector<std::size_t>& sampled_regions() const { return sampled_regions_; }
  /// Sampled population indices within region r, ascending (empty if unsampled).
  const std::vector<std::size_t>& sampled_units(std::size_t r) const { return per_region_[r]; }
  bool is_sampled(std::size_t unit) const { return mask_[unit]; }
  const std::vector<bool>& mask() const { return mask_; }

  std::size_t k() const { return k_; }
  std::size_t K() const { return mask_.size() - k_; }

 private:
  std::vector<bool> mask_;
  std::vector<std::vector<std::size_t>> per_region_;
  std::vector<std::size_t> sampled_regions_;
  std::size_t k_ = 0;
};

/// Canonical ordering shared by every matrix and draw vector: sampled regions
/// first (ascending dense id), then unsampled ones; y_s stacks the sampled
/// units region by region, y_ns stacks the nonsampled units region by region
/// over all N regions.  "Group" below always means canonical region position.
struct Partition {
  std::size_t N = 0;  // regions
  std::size_t n = 0;  // sampled regions
  std::vector<std::size_t> region_at;   // canonical position -> dense region id
  std::vector<std::size_t> position_of; // dense region id -> canonical position
  std::vector<std::string> labels;      // original labels, canonical order
  std::vector<std::size_t> m;           // sampled units per group
  std::vector<std::size_t> M;           // region sizes per group
  std::vector<std::size_t> s_units;     // population index of each y_s row
  std::vector<std::size_t> ns_units;    // population index of each y_ns row
  std::vector<std::size_t> s_group;     // group of each y_s row
  std::vector<std::size_t> ns_group;    // group of each y_ns row
  std::vector<std::size_t> s_offset;    // first y_s row of each group
  std::vector<std::size_t> ns_offset;   // first y_ns row of each group

  std::size_t k() const { return s_units.size(); }
  std::size_t K() const { return ns_units.size(); }
  std::size_t T() const { return k() + K(); }
};

Partition make_partition(const FinitePopulation& pop, const SampleIndex& sample);

/// Indicator design matrices in canonical order.
struct DesignMatrices {
  Eigen::MatrixXd X_s;   // k x N
  Eigen::MatrixXd X_ns;  // K x N
  Eigen::MatrixXd X_s1;  // k x n
};

DesignMatrices build_design_matrices(const FinitePopulation& pop, const SampleIndex& sample);
DesignMatrices build_design_matrices(const Partition& part);

/// Per-group summaries in canonical order.  `variance` uses the m_i - 1
/// divisor and is absent when m_i < 2; `mean` is absent for unsampled groups.
struct GroupSummary {
  std::string label;
  std::size_t m = 0;
  std::size_t M = 0;
  std::optional<double> mean;
  std::optional<double> variance;
  double sum_sq_dev = 0.0;  // sum_j (y_ij - ybar_i)^2 over sampled units
};

std::vector<GroupSummary> group_summaries(const FinitePopulation& pop, const SampleIndex& sample);

/// Observed values in y_s order.  Throws DataError when a sampled unit has no value.
Eigen::VectorXd observed_values(const FinitePopulation& pop, const Partition& part);
/// Known values of the nonsampled units in y_ns order, if every one is known.
std::optional<Eigen::VectorXd> nonsampled_truth(const FinitePopulation& pop, const Partition& part);

/// Weights alpha (population order) split into the y_s / y_ns orderings.
struct SplitWeights {
  Eigen::VectorXd s;
  Eigen::VectorXd ns;
};

SplitWeights split_weights(const Partition& part, const Eigen::VectorXd& alpha);
/// alpha_u = 1/T for every unit: the population mean.
Eigen::VectorXd mean_weights(std::size_t T);

/// alpha' [y_s : y_ns].
double fp_functional(const SplitWeights& alpha, const Eigen::VectorXd& y_s,
                     const Eigen::VectorXd& y_ns);
double fp_functional(const Partition& part, const Eigen::VectorXd& alpha,
                     const Eigen::VectorXd& y_s, const Eigen::VectorXd& y_ns);

/// Inverse of the canonical permutation: [y_s : y_ns] back to population order.
Eigen::VectorXd to_population_order(const Partition& part, const Eigen::VectorXd& y_s,
                                    const Eigen::VectorXd& y_ns);

/// The partitioned survey consumed by the samplers.
struct SurveyData {
  Partition part;
  Eigen::VectorXd y_s;
  Coords coords_s;
  Coords coords_ns;
  std::optional<Eigen::VectorXd> y_ns_truth;
};

SurveyData make_survey(const FinitePopulation& pop, const SampleIndex& sample);

}  // namespace geofps
