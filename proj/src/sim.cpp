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

#include "geofps/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "geofps/assess.hpp"
#include "geofps/diagnostics.hpp"
#include "geofps/error.hpp"
#include "geofps/exact_mc.hpp"
#include "geofps/linalg.hpp"
#include "geofps/parallel.hpp"

namespace geofps {

void SimConfig::validate() const {
  if (n_side == 0) throw ConfigError("sim.n_side must be positive");
  if (T == 0) throw ConfigError("sim.T must be positive");
  if (T > max_T)
    throw ConfigError("sim.T = " + std::to_string(T) + " exceeds the dense-simulation cap sim.max_T = " +
                      std::to_string(max_T));
  if (!std::isfinite(mu)) throw ConfigError("sim.mu must be finite");
  if (!(spec.tau2 >= 0.0 && std::isfinite(spec.tau2))) throw ConfigError("sim.tau2 must be >= 0");
  if (!(spec.sigma2 >= 0.0 && std::isfinite(spec.sigma2))) throw ConfigError("sim.sigma2 must be >= 0");
  if (!(spec.phi > 0.0 && std::isfinite(spec.phi))) throw ConfigError("sim.phi must be positive");
  if (!(spec.eta > 0.0 && std::isfinite(spec.eta))) throw ConfigError("sim.eta must be positive");
  if (!(frac_min > 0.0 && frac_min <= frac_max && frac_max <= 1.0))
    throw ConfigError("sim.frac_min / sim.frac_max: need 0 < frac_min <= frac_max <= 1");
  if (n_sampled_regions == 0 || n_sampled_regions > n_side * n_side)
    throw ConfigError("sim.n_sampled_regions must lie in [1, n_side^2]");
}

std::string cell_label(std::size_t cell, std::size_t n_side) {
  const std::size_t width = std::to_string(n_side * n_side - 1).size();
  std::string s = std::to_string(cell);
  return "R" + std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

FinitePopulation generate_population(const SimConfig& cfg) {
  cfg.validate();
  StreamRng rng(cfg.seed, 0);
  const std::size_t T = cfg.T, n = cfg.n_side;
  Coords c;
  std::vector<std::size_t> cell(T);
  for (std::size_t i = 0; i < T; ++i) {
    const double x = rng.uniform(), y = rng.uniform();
    c.push_back(x, y);
    const auto col = std::min(static_cast<std::size_t>(x * static_cast<double>(n)), n - 1);
    const auto row = std::min(static_cast<std::size_t>(y * static_cast<double>(n)), n - 1);
    cell[i] = row * n + col;
  }

  Eigen::VectorXd omega = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
  if (cfg.spec.tau2 > 0.0) {
    const Eigen::MatrixXd cov = spatial_covariance(c, cfg.spec.tau2, cfg.spec.phi, cfg.spec.eta);
    const SpdFactor f(cov, cfg.spec.tau2, "simulated spatial covariance");
    omega = f.sample(rng);
  }
  const double sd = std::sqrt(cfg.spec.sigma2);

  std::vector<std::size_t> dense(n * n, n * n);
  for (auto k : cell) dense[k] = 0;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < n * n; ++k) {
    if (dense[k] == n * n) continue;
    dense[k] = labels.size();
    labels.push_back(cell_label(k, n));
  }

  std::vector<Location> locs(T);
  std::vector<std::optional<double>> values(T);
  for (std::size_t i = 0; i < T; ++i) {
    locs[i].id = "u" + std::to_string(i);
    locs[i].x = c.x[i];
    locs[i].y = c.y[i];
    locs[i].region = dense[cell[i]];
    values[i] = cfg.mu + omega[static_cast<Eigen::Index>(i)] + sd * rng.normal();
  }
  return FinitePopulation(std::move(locs), std::move(values), std::move(labels));
}

namespace {

// First `take` entries of a uniform random permutation of `items`.
template <class T>
std::vector<T> draw_without_replacement(std::vector<T> items, std::size_t take, StreamRng& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t left = items.size() - i;
    const std::size_t j = i + std::min(left - 1, static_cast<std::size_t>(rng.uniform() * double(left)));
    std::swap(items[i], items[j]);
  }
  items.resize(take);
  return items;
}

}  // namespace

SampleIndex two_stage_sample(const FinitePopulation& pop, std::size_t n_regions, double frac_min,
                             double frac_max, StreamRng& rng) {
  if (n_regions == 0 || n_regions > pop.n_regions())
    throw ConfigError("two_stage_sample: n_regions must lie in [1, " + std::to_string(pop.n_regions()) + "]");
  if (!(frac_min > 0.0 && frac_min <= frac_max && frac_max <= 1.0))
    throw ConfigError("two_stage_sample: need 0 < frac_min <= frac_max <= 1");
  std::vector<std::size_t> regions(pop.n_regions());
  std::iota(regions.begin(), regions.end(), 0);
  regions = draw_without_replacement(std::move(regions), n_regions, rng);
  std::sort(regions.begin(), regions.end());

  std::vector<bool> mask(pop.size(), false);
  for (auto r : regions) {
    const auto& units = pop.units_in_region(r);
    const double f = frac_min + (frac_max - frac_min) * rng.uniform();
    const double M = static_cast<double>(units.size());
    const auto m = std::min(units.size(), std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * M))));
    for (auto u : draw_without_replacement(units, m, rng)) mask[u] = true;
  }
  return SampleIndex(pop, mask);
}

namespace {

struct FitSummary {
  Eigen::VectorXd fp;
  PointwiseDraws pointwise;
};

FitSummary fit_method(const StudyMethod& m, const SurveyData& data, const SplitWeights& alpha,
                      const StudyOptions& opt, std::uint64_t seed) {
  FitSummary out;
  switch (m.kind) {
    case StudyMethodKind::kGibbs: {
      RunOptions ro;
      ro.iters = opt.iters;
      ro.burnin = opt.burnin;
      GibbsSampler s(m.model, data, alpha, seed, 0);
      PosteriorDraws d = s.run(ro);
      out.fp = d.fp();
      out.pointwise = std::move(d.pointwise);
      return out;
    }
    case StudyMethodKind::kExactTwoStage:
    case StudyMethodKind::kExactSpatial: {
      ExactRun run;
      if (m.kind == StudyMethodKind::kExactTwoStage) {
        FixedRatioTwoStageOptions o;
        o.draws = opt.exact_draws;
        o.seed = seed;
        run = fixed_ratio_two_stage(data, alpha, o);
      } else {
        FixedRatioSpatialOptions o;
        o.draws = opt.exact_draws;
        o.seed = seed;
        run = fixed_ratio_spatial(data, alpha, o);
      }
      out.fp.resize(static_cast<Eigen::Index>(run.draws.size()));
      for (std::size_t l = 0; l < run.draws.size(); ++l)
        out.fp[static_cast<Eigen::Index>(l)] = run.draws[l].fp_value;
      out.pointwise = std::move(run.pointwise);
      return out;
    }
  }
  return out;
}

}  // namespace

std::vector<StudyRow> replicate_study(const SimConfig& cfg, std::size_t n_replicates,
                                      const std::vector<StudyMethod>& methods,
                                      const StudyOptions& opt) {
  if (n_replicates == 0) throw std::invalid_argument("replicate_study: n_replicates must be >= 1");
  cfg.validate();
  std::vector<std::vector<StudyRow>> per_rep(n_replicates);
  parallel_for(n_replicates, [&](std::size_t r) {
    SimConfig rc = cfg;
    rc.seed = derive_seed(cfg.seed, r);
    const FinitePopulation pop = generate_population(rc);
    StreamRng srng(rc.seed, 1);
    const SampleIndex sample = two_stage_sample(pop, rc.n_sampled_regions, rc.frac_min, rc.frac_max, srng);
    const SurveyData data = make_survey(pop, sample);
    const Eigen::VectorXd a = mean_weights(pop.size());
    const SplitWeights alpha = split_weights(data.part, a);
    const double truth = fp_functional(alpha, data.y_s, *data.y_ns_truth);

    for (std::size_t j = 0; j < methods.size(); ++j) {
      StudyRow row;
      row.replicate = r;
      row.method = methods[j].name;
      row.truth = truth;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const std::uint64_t fit_seed = derive_seed(rc.seed, 100 + j);
        const FitSummary fit = fit_method(methods[j], data, alpha, opt, fit_seed);
        row.fp_mean = fit.fp.mean();
        row.fp_lo = quantile(fit.fp, 0.025);
        row.fp_hi = quantile(fit.fp, 0.975);
        row.covered = row.fp_lo <= truth && truth <= row.fp_hi;
        const WaicReport w = waic(pointwise_loglik(fit.pointwise, data.y_s));
        row.waic = w.waic;
        row.waic_se = w.se;
        const DScore d = d_score(replicate_draws(fit.pointwise, derive_seed(fit_seed, 7)), data.y_s);
        row.D = d.D;
        row.G = d.G;
        row.P = d.P;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      per_rep[r].push_back(std::move(row));
    }
  });
  std::vector<StudyRow> rows;
  for (auto& v : per_rep)
    for (auto& row : v) rows.push_back(std::move(row));
  return rows;
}

}  // namespace geofps
