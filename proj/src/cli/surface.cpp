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

#include "geofps/cli/surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geofps/covariance.hpp"
#include "geofps/error.hpp"
#include "geofps/linalg.hpp"

namespace geofps {
namespace {

// Accumulates the draw mixture of Gaussians at one location.
struct Mixture {
  double sum_m = 0.0, sum_m2 = 0.0, sum_v = 0.0, sum_p = 0.0;
  std::size_t n = 0;

  void add(double m, double v, double threshold) {
    sum_m += m;
    sum_m2 += m * m;
    sum_v += v;
    const double sd = std::sqrt(std::max(v, 0.0));
    double p;
    if (sd > 0.0) p = 0.5 * std::erfc((threshold - m) / (sd * std::sqrt(2.0)));
    else p = m > threshold ? 1.0 : 0.0;
    sum_p += p;
    ++n;
  }
  double mean() const { return sum_m / double(n); }
  double sd() const {
    const double mu = mean();
    return std::sqrt(std::max(0.0, sum_v / double(n) + sum_m2 / double(n) - mu * mu));
  }
  double p() const { return std::clamp(sum_p / double(n), 0.0, 1.0); }
};

}  // namespace

SurfaceResult predict_surface(const FinitePopulation& pop, const SurveyData& data,
                              const ModelSpec& model, const std::vector<ChainState>& states,
                              std::size_t resolution, double threshold) {
  if (states.empty()) throw std::invalid_argument("predict_surface: no draws");
  if (resolution < 2) throw std::invalid_argument("predict_surface: resolution must be at least 2");
  const Partition& p = data.part;
  SurfaceResult out;

  if (!model.spatial()) {
    std::vector<Mixture> mix(p.N);
    for (const auto& s : states)
      for (std::size_t g = 0; g < p.N; ++g)
        mix[g].add(s.mu[static_cast<Eigen::Index>(g)], s.sigma2[static_cast<Eigen::Index>(g)], threshold);
    for (std::size_t g = 0; g < p.N; ++g)
      out.regions.push_back(RegionCell{p.labels[g], mix[g].mean(), mix[g].sd(), mix[g].p()});
    return out;
  }

  // Grid and the canonical group of each cell.
  const auto& locs = pop.locations();
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& l : locs) {
    x0 = std::min(x0, l.x);
    x1 = std::max(x1, l.x);
    y0 = std::min(y0, l.y);
    y1 = std::max(y1, l.y);
  }
  const std::size_t n_cells = resolution * resolution;
  Coords cells;
  std::vector<std::size_t> cell_group(n_cells);
  for (std::size_t j = 0; j < resolution; ++j)
    for (std::size_t i = 0; i < resolution; ++i) {
      const double cx = x0 + (x1 - x0) * double(i) / double(resolution - 1);
      const double cy = y0 + (y1 - y0) * double(j) / double(resolution - 1);
      cells.push_back(cx, cy);
      double best = std::numeric_limits<double>::infinity();
      std::size_t region = 0;
      for (const auto& l : locs) {
        const double d = (l.x - cx) * (l.x - cx) + (l.y - cy) * (l.y - cy);
        if (d < best) {
          best = d;
          region = l.region;
        }
      }
      cell_group[j * resolution + i] = p.position_of[region];
    }

  const bool regional = model.kind == ModelKind::kRegionalSpatial;
  const bool global = model.kind == ModelKind::kSpatial;
  auto mean_of = [&](const ChainState& s, std::size_t g) { return s.mu[global ? 0 : static_cast<Eigen::Index>(g)]; };
  auto noise_of = [&](const ChainState& s, std::size_t g) {
    return s.sigma2[global ? 0 : static_cast<Eigen::Index>(g)];
  };

  // Blocks of sampled rows and the cells they predict.
  struct Block {
    std::size_t s_off, s_len;
    Coords cs;
    std::vector<std::size_t> cells;
  };
  std::vector<Block> blocks;
  if (regional) {
    for (std::size_t g = 0; g < p.N; ++g) {
      Block b{p.s_offset[g], p.m[g], {}, {}};
      for (std::size_t h = 0; h < b.s_len; ++h)
        b.cs.push_back(data.coords_s.x[b.s_off + h], data.coords_s.y[b.s_off + h]);
      blocks.push_back(std::move(b));
    }
    for (std::size_t c = 0; c < n_cells; ++c) blocks[cell_group[c]].cells.push_back(c);
  } else {
    Block b{0, p.k(), data.coords_s, {}};
    for (std::size_t c = 0; c < n_cells; ++c) b.cells.push_back(c);
    blocks.push_back(std::move(b));
  }

  std::vector<Mixture> mix(n_cells);
  for (const auto& s : states) {
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const Block& b = blocks[bi];
      if (b.cells.empty()) continue;
      const auto bidx = static_cast<Eigen::Index>(regional ? bi : 0);
      const double tau2 = s.tau2[bidx], phi = s.phi[bidx];
      Coords cc;
      for (auto c : b.cells) cc.push_back(cells.x[c], cells.y[c]);
      const auto nc = static_cast<Eigen::Index>(b.cells.size());
      Eigen::VectorXd m(nc), v(nc);
      for (Eigen::Index i = 0; i < nc; ++i) {
        const std::size_t g = cell_group[b.cells[static_cast<std::size_t>(i)]];
        m[i] = mean_of(s, g);
        v[i] = tau2 + noise_of(s, g);
      }
      if (b.s_len > 0 && tau2 > 0.0) {
        Eigen::MatrixXd c = spatial_covariance(b.cs, tau2, phi, model.eta);
        Eigen::VectorXd r(static_cast<Eigen::Index>(b.s_len));
        for (std::size_t h = 0; h < b.s_len; ++h) {
          const std::size_t row = b.s_off + h;
          c(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)) += noise_of(s, p.s_group[row]);
          r[static_cast<Eigen::Index>(h)] = data.y_s[static_cast<Eigen::Index>(row)] - mean_of(s, p.s_group[row]);
        }
        const SpdFactor f(c, std::max(1e-300, c.diagonal().mean()), "surface conditioning");
        const Eigen::MatrixXd cross = spatial_covariance(b.cs, cc, tau2, phi, model.eta);  // s x cells
        m += cross.transpose() * f.solve(r);
        Eigen::MatrixXd half = cross;
        if (f.size() > 0) half = f.lower().triangularView<Eigen::Lower>().solve(cross);
        v -= half.colwise().squaredNorm().transpose();
      }
      for (Eigen::Index i = 0; i < nc; ++i) mix[b.cells[static_cast<std::size_t>(i)]].add(m[i], v[i], threshold);
    }
  }
  for (std::size_t c = 0; c < n_cells; ++c)
    out.grid.push_back(SurfaceCell{cells.x[c], cells.y[c], mix[c].mean(), mix[c].sd(), mix[c].p()});
  return out;
}

}  // namespace geofps
