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

#include "geofps/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "geofps/error.hpp"

namespace geofps {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Ctx {
  std::string key;
  std::string where;
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(where + ": " + key + ": " + why);
  }
};

double to_double(const std::string& v, const Ctx& c) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    c.fail("expected a finite number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const Ctx& c) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    c.fail("expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& v, const Ctx& c) { return static_cast<std::size_t>(to_u64(v, c)); }

double positive(const std::string& v, const Ctx& c) {
  const double x = to_double(v, c);
  if (!(x > 0.0)) c.fail("must be positive");
  return x;
}

ModelKind to_model(const std::string& v, const Ctx& c) {
  const auto k = parse_model_kind(v);
  if (!k) c.fail("unknown model '" + v + "' (use 1-4 or two_stage, spatial, two_stage_spatial, regional_spatial)");
  return *k;
}

using Setter = std::function<void(RunConfig&, const std::string&, const Ctx&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["seed"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.seed = to_u64(v, c); };
    t["out"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      if (v.empty()) c.fail("must not be empty");
      r.out = v;
    };
    t["data.input"] = [](RunConfig& r, const std::string& v, const Ctx&) { r.input = v; };
    t["data.min_region_size"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.min_region_size = to_size(v, c);
    };

    t["model.kind"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.model.kind = to_model(v, c); };
    t["model.nu_prior"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      if (v == "flat") r.model.nu_prior = NuPriorKind::kFlat;
      else if (v == "normal") r.model.nu_prior = NuPriorKind::kNormal;
      else c.fail("expected flat or normal");
    };
    t["model.eta"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.model.eta = positive(v, c); };
    t["model.unsampled"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      if (v == "pinned") r.model.unsampled = UnsampledPolicy::kPinned;
      else if (v == "prior") r.model.unsampled = UnsampledPolicy::kPrior;
      else c.fail("expected pinned or prior");
    };
    auto ig = [&t](const std::string& name, InvGammaPrior ModelSpec::*member) {
      t["priors." + name + ".shape"] = [member](RunConfig& r, const std::string& v, const Ctx& c) {
        (r.model.*member).shape = positive(v, c);
      };
      t["priors." + name + ".scale"] = [member](RunConfig& r, const std::string& v, const Ctx& c) {
        (r.model.*member).scale = positive(v, c);
      };
    };
    ig("sigma2", &ModelSpec::sigma2);
    ig("tau2", &ModelSpec::tau2);
    ig("delta2", &ModelSpec::delta2);
    ig("gamma2", &ModelSpec::gamma2);
    t["priors.phi.lo"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.model.phi.lo = positive(v, c); };
    t["priors.phi.hi"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.model.phi.hi = positive(v, c); };

    auto opt = [&t](const std::string& key, std::optional<double> ModelSpec::*member, bool allow_zero) {
      t[key] = [member, allow_zero](RunConfig& r, const std::string& v, const Ctx& c) {
        const double x = to_double(v, c);
        if (allow_zero ? x < 0.0 : !(x > 0.0)) c.fail(allow_zero ? "must be >= 0" : "must be positive");
        r.model.*member = x;
      };
    };
    opt("fixed.gamma2", &ModelSpec::fixed_gamma2, false);
    opt("fixed.delta2", &ModelSpec::fixed_delta2, false);
    opt("fixed.sigma2", &ModelSpec::fixed_sigma2, false);
    opt("fixed.tau2", &ModelSpec::fixed_tau2, true);
    opt("fixed.phi", &ModelSpec::fixed_phi, false);
    opt("unsampled.sigma2", &ModelSpec::unsampled_sigma2, false);
    opt("unsampled.tau2", &ModelSpec::unsampled_tau2, false);
    opt("unsampled.phi", &ModelSpec::unsampled_phi, false);

    t["mcmc.method"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      if (v == "gibbs") r.method = FitMethod::kGibbs;
      else if (v == "exact") r.method = FitMethod::kExact;
      else c.fail("expected gibbs or exact");
    };
    t["mcmc.iters"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.iters = to_size(v, c); };
    t["mcmc.burnin"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.burnin = to_size(v, c); };
    t["mcmc.chains"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.chains = to_size(v, c);
      if (r.chains == 0) c.fail("must be at least 1");
    };
    t["exact.draws"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.exact_draws = to_size(v, c);
      if (r.exact_draws < 2) c.fail("must be at least 2");
    };

    t["sim.n_side"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.n_side = to_size(v, c); };
    t["sim.T"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.T = to_size(v, c); };
    t["sim.max_T"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.max_T = to_size(v, c); };
    t["sim.mu"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.mu = to_double(v, c); };
    t["sim.tau2"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.spec.tau2 = to_double(v, c); };
    t["sim.sigma2"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.spec.sigma2 = to_double(v, c); };
    t["sim.phi"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.spec.phi = to_double(v, c); };
    t["sim.eta"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.spec.eta = to_double(v, c); };
    t["sim.n_sampled_regions"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.sim.n_sampled_regions = to_size(v, c);
    };
    t["sim.frac_min"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.frac_min = to_double(v, c); };
    t["sim.frac_max"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.sim.frac_max = to_double(v, c); };

    t["surface.resolution"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.surface_resolution = to_size(v, c);
      if (r.surface_resolution < 2) c.fail("must be at least 2");
    };
    t["surface.threshold"] = [](RunConfig& r, const std::string& v, const Ctx& c) { r.threshold = positive(v, c); };
    t["surface.max_draws"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.surface_max_draws = to_size(v, c);
      if (r.surface_max_draws == 0) c.fail("must be at least 1");
    };

    t["variogram.bins"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.variogram_bins = to_size(v, c);
      if (r.variogram_bins < 3) c.fail("must be at least 3");
    };
    t["variogram.max_dist"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.variogram_max_dist = to_double(v, c);
      if (r.variogram_max_dist < 0.0) c.fail("must be >= 0 (0 = half the largest distance)");
    };
    t["variogram.values"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      if (v == "observed") r.variogram_use_population = false;
      else if (v == "population") r.variogram_use_population = true;
      else c.fail("expected observed or population");
    };

    t["assess.models"] = [](RunConfig& r, const std::string& v, const Ctx& c) {
      r.assess_models.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) r.assess_models.push_back(to_model(trim(item), c));
      if (r.assess_models.empty()) c.fail("needs at least one model");
    };
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(std::string_view(raw).substr(0, hash));
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(line);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' given twice");
    it->second(cfg, value, Ctx{key, where});
  }
  if (cfg.burnin >= cfg.iters) throw ConfigError(source + ": mcmc.burnin must be smaller than mcmc.iters");
  try {
    cfg.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace geofps
