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

#include "geofps/cli/commands.hpp"

#include <filesystem>
#include <iomanip>

#include "geofps/assess.hpp"
#include "geofps/cli/csv.hpp"
#include "geofps/cli/ingest.hpp"
#include "geofps/cli/surface.hpp"
#include "geofps/covariance.hpp"
#include "geofps/diagnostics.hpp"
#include "geofps/error.hpp"
#include "geofps/exact_mc.hpp"
#include "geofps/gibbs.hpp"
#include "geofps/sim.hpp"

namespace geofps {
namespace {

namespace fs = std::filesystem;
using csv::format_double;

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw DataError("cannot create output directory " + cfg.out + ": " + ec.message());
  return (fs::path(cfg.out) / name).string();
}

struct Loaded {
  IngestResult in;
  SurveyData data;
  SplitWeights alpha;
};

Loaded load_data(const RunConfig& cfg, std::ostream& log) {
  if (cfg.input.empty()) throw ConfigError("data.input: required for this command");
  Loaded l;
  l.in = ingest_csv(cfg.input, cfg.seed, cfg.min_region_size);
  const IngestReport& r = l.in.report;
  log << "ingest: " << r.rows << " rows, " << r.duplicates_removed << " duplicate-coordinate records removed, "
      << r.regions_dropped << " regions (" << r.units_in_dropped_regions << " units) below "
      << cfg.min_region_size << " dropped; " << r.units << " units in " << r.regions << " regions, "
      << r.sampled << " sampled\n";
  l.data = make_survey(l.in.pop, l.in.sample);
  l.alpha = split_weights(l.data.part, mean_weights(l.in.pop.size()));
  return l;
}

std::string public_name(const std::string& n) { return n == "fp" ? "fp_mean" : n; }

struct FitOutput {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;  // L x P per chain
  std::vector<ParamDiagnostics> diagnostics;
  PointwiseDraws pointwise;             // all chains
  std::vector<ChainState> states;       // gibbs only
  std::vector<double> acceptance;
};

FitOutput fit_gibbs(const RunConfig& cfg, const ModelSpec& model, const Loaded& l, bool states) {
  RunOptions ro;
  ro.iters = cfg.iters;
  ro.burnin = cfg.burnin;
  ro.store_states = states;
  std::vector<std::uint64_t> seeds(cfg.chains, cfg.seed);
  MultiChainResult res = run_parallel_chains(model, l.data, l.alpha, ro, seeds);
  FitOutput f;
  f.names = res.chains.front().names;
  for (auto& c : res.chains) {
    f.chains.push_back(c.values);
    f.pointwise = concat_draws(f.pointwise, c.pointwise);
    f.states.insert(f.states.end(), c.states.begin(), c.states.end());
    f.acceptance.insert(f.acceptance.end(), c.phi_acceptance.begin(), c.phi_acceptance.end());
  }
  f.diagnostics = std::move(res.diagnostics);
  return f;
}

FitOutput fit_exact(const RunConfig& cfg, ModelKind kind, const Loaded& l) {
  ExactRun run;
  FitOutput f;
  const Partition& p = l.data.part;
  if (kind == ModelKind::kTwoStage) {
    FixedRatioTwoStageOptions o;
    o.draws = cfg.exact_draws;
    o.seed = cfg.seed;
    run = fixed_ratio_two_stage(l.data, l.alpha, o);
    f.names.push_back("delta2");
    f.names.push_back("nu");
    for (std::size_t g = 0; g < p.N; ++g) f.names.push_back("mu[" + p.labels[g] + "]");
  } else if (kind == ModelKind::kSpatial) {
    FixedRatioSpatialOptions o;
    o.draws = cfg.exact_draws;
    o.seed = cfg.seed;
    run = fixed_ratio_spatial(l.data, l.alpha, o);
    f.names.push_back("delta2");
    f.names.push_back("mu");
  } else {
    throw ConfigError("mcmc.method = exact supports model.kind 1 or 2 only");
  }
  f.names.push_back("fp");
  const auto L = static_cast<Eigen::Index>(run.draws.size());
  Eigen::MatrixXd v(L, static_cast<Eigen::Index>(f.names.size()));
  for (Eigen::Index i = 0; i < L; ++i) {
    const ExactDraw& d = run.draws[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    v(i, j++) = d.delta2;
    for (Eigen::Index q = 0; q < d.nu.size(); ++q) v(i, j++) = d.nu[q];
    for (Eigen::Index q = 0; q < d.beta.size(); ++q) v(i, j++) = d.beta[q];
    v(i, j++) = d.fp_value;
  }
  f.chains.push_back(v);
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    f.diagnostics.push_back(ParamDiagnostics{f.names[static_cast<std::size_t>(j)], std::nullopt,
                                             effective_sample_size(Eigen::VectorXd(v.col(j)))});
  f.pointwise = std::move(run.pointwise);
  return f;
}

FitOutput fit_any(const RunConfig& cfg, const ModelSpec& model, const Loaded& l, bool states) {
  return cfg.method == FitMethod::kExact ? fit_exact(cfg, model.kind, l) : fit_gibbs(cfg, model, l, states);
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  SimConfig sc = cfg.sim;
  sc.seed = cfg.seed;
  const FinitePopulation pop = generate_population(sc);
  StreamRng rng(sc.seed, 1);
  const SampleIndex sample = two_stage_sample(pop, sc.n_sampled_regions, sc.frac_min, sc.frac_max, rng);
  write_population_csv(out_path(cfg, "population.csv"), pop, sample, false);
  write_population_csv(out_path(cfg, "sample.csv"), pop, sample, true);
  double truth = 0.0;
  for (const auto& v : pop.values()) truth += *v;
  truth /= static_cast<double>(pop.size());
  log << "simulate: " << pop.size() << " units in " << pop.n_regions() << " regions, " << sample.k()
      << " sampled in " << sample.sampled_regions().size() << " regions; population mean "
      << std::setprecision(10) << truth << "\n";
}

void cmd_fit(const RunConfig& cfg, std::ostream& log) {
  const Loaded l = load_data(cfg, log);
  const FitOutput f = fit_any(cfg, cfg.model, l, false);

  csv::Writer dw(out_path(cfg, "draws.csv"));
  dw.row({"iter", "chain", "param", "value"});
  const std::size_t first_iter = cfg.method == FitMethod::kExact ? 1 : cfg.burnin + 1;
  for (std::size_t c = 0; c < f.chains.size(); ++c) {
    const Eigen::MatrixXd& v = f.chains[c];
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index j = 0; j < v.cols(); ++j)
        dw.row({std::to_string(first_iter + static_cast<std::size_t>(i)), std::to_string(c),
                public_name(f.names[static_cast<std::size_t>(j)]), format_double(v(i, j))});
  }
  dw.close();

  csv::Writer sw(out_path(cfg, "summary.csv"));
  sw.row({"param", "mean", "sd", "q2.5", "q50", "q97.5", "rhat", "ess"});
  for (std::size_t j = 0; j < f.names.size(); ++j) {
    Eigen::Index total = 0;
    for (const auto& c : f.chains) total += c.rows();
    Eigen::VectorXd all(total);
    Eigen::Index at = 0;
    for (const auto& c : f.chains) {
      all.segment(at, c.rows()) = c.col(static_cast<Eigen::Index>(j));
      at += c.rows();
    }
    const DrawSummary s = summarize(all);
    const ParamDiagnostics& d = f.diagnostics[j];
    sw.row({public_name(f.names[j]), format_double(s.mean), format_double(s.sd), format_double(s.q025),
            format_double(s.q500), format_double(s.q975), d.rhat ? format_double(*d.rhat) : "NA",
            format_double(d.ess)});
    if (f.names[j] == "fp")
      log << "fit: fp_mean " << std::setprecision(6) << s.mean << " [" << s.q025 << ", " << s.q975 << "]\n";
  }
  sw.close();
  if (l.data.y_ns_truth) {
    log << "fit: true population mean " << std::setprecision(6)
        << fp_functional(l.alpha, l.data.y_s, *l.data.y_ns_truth) << "\n";
  }
  for (double a : f.acceptance) log << "fit: phi acceptance " << std::setprecision(3) << a << "\n";
}

void cmd_assess(const RunConfig& cfg, std::ostream& log) {
  const Loaded l = load_data(cfg, log);
  csv::Writer w(out_path(cfg, "assess.csv"));
  w.row({"model", "waic", "se", "lpd", "p_waic", "D", "G", "P"});
  for (ModelKind kind : cfg.assess_models) {
    ModelSpec m = cfg.model;
    m.kind = kind;
    const FitOutput f = fit_any(cfg, m, l, false);
    const WaicReport wr = waic(pointwise_loglik(f.pointwise, l.data.y_s));
    const DScore d = d_score(replicate_draws(f.pointwise, derive_seed(cfg.seed, 11)), l.data.y_s);
    w.row({model_name(kind), format_double(wr.waic), format_double(wr.se), format_double(wr.lpd_hat),
           format_double(wr.p_waic), format_double(d.D), format_double(d.G), format_double(d.P)});
    log << "assess: " << model_name(kind) << " WAIC " << std::fixed << std::setprecision(2) << wr.waic << " ("
        << wr.se << ") D " << d.D << std::defaultfloat << "\n";
  }
  w.close();
}

void cmd_variogram(const RunConfig& cfg, std::ostream& log) {
  const Loaded l = load_data(cfg, log);
  Coords c;
  Eigen::VectorXd v;
  if (cfg.variogram_use_population) {
    if (!l.in.pop.all_values_known())
      throw DataError("variogram.values = population needs a value for every unit");
    std::vector<std::size_t> all(l.in.pop.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    c = l.in.pop.coords(all);
    v.resize(static_cast<Eigen::Index>(all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) v[static_cast<Eigen::Index>(i)] = *l.in.pop.values()[i];
  } else {
    c = l.data.coords_s;
    v = l.data.y_s;
  }
  const EmpiricalVariogram emp = empirical_variogram(c, v, cfg.variogram_bins, cfg.variogram_max_dist);
  const VariogramFit fit = fit_exponential_variogram(emp);

  csv::Writer bw(out_path(cfg, "variogram_bins.csv"));
  bw.row({"bin", "lo", "hi", "mean_distance", "pairs", "gamma"});
  for (std::size_t b = 0; b < emp.bins.size(); ++b) {
    const VariogramBin& bin = emp.bins[b];
    bw.row({std::to_string(b), format_double(bin.lo), format_double(bin.hi), format_double(bin.mean_distance),
            std::to_string(bin.pairs), bin.gamma ? format_double(*bin.gamma) : "NA"});
  }
  bw.close();
  csv::Writer fw(out_path(cfg, "variogram_fit.csv"));
  fw.row({"nugget", "partial_sill", "range", "phi", "range_identified"});
  fw.row({format_double(fit.nugget), format_double(fit.partial_sill), format_double(fit.range),
          format_double(fit.phi()), fit.range_identified ? "1" : "0"});
  fw.close();
  log << "variogram: nugget " << fit.nugget << ", partial sill " << fit.partial_sill << ", phi " << fit.phi()
      << (fit.range_identified ? "" : " (range not identified)") << "\n";
}

void cmd_predict_surface(const RunConfig& cfg, std::ostream& log) {
  if (cfg.method == FitMethod::kExact)
    throw ConfigError("mcmc.method: predict-surface needs gibbs draws");
  const Loaded l = load_data(cfg, log);
  FitOutput f = fit_gibbs(cfg, cfg.model, l, true);
  std::vector<ChainState> states;
  const std::size_t n = f.states.size();
  const std::size_t take = std::min(n, cfg.surface_max_draws);
  for (std::size_t i = 0; i < take; ++i) states.push_back(f.states[i * n / take]);
  const SurfaceResult s =
      predict_surface(l.in.pop, l.data, cfg.model, states, cfg.surface_resolution, cfg.threshold);
  csv::Writer w(out_path(cfg, "surface.csv"));
  if (!s.grid.empty()) {
    w.row({"x", "y", "mean", "sd", "p_exceed"});
    for (const auto& c : s.grid)
      w.row({format_double(c.x), format_double(c.y), format_double(c.mean), format_double(c.sd),
             format_double(c.p_exceed)});
  } else {
    w.row({"region_label", "mean", "sd", "p_exceed"});
    for (const auto& c : s.regions)
      w.row({c.region_label, format_double(c.mean), format_double(c.sd), format_double(c.p_exceed)});
  }
  w.close();
  log << "predict-surface: " << (s.grid.empty() ? s.regions.size() : s.grid.size()) << " rows from "
      << states.size() << " draws, threshold " << cfg.threshold << "\n";
}

void run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
  if (name == "simulate") cmd_simulate(cfg, log);
  else if (name == "fit") cmd_fit(cfg, log);
  else if (name == "assess") cmd_assess(cfg, log);
  else if (name == "variogram") cmd_variogram(cfg, log);
  else if (name == "predict-surface") cmd_predict_surface(cfg, log);
  else throw ConfigError("unknown command '" + name + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

}  // namespace geofps
