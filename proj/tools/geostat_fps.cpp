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

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "geofps/cli/commands.hpp"
#include "geofps/cli/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-population inference for spatially referenced two-stage survey data"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  const char* commands[][2] = {
      {"simulate", "Generate a population and a two-stage sample"},
      {"fit", "Fit a model; writes draws.csv and summary.csv"},
      {"assess", "WAIC and D = G + P for several models"},
      {"variogram", "Empirical variogram and exponential fit"},
      {"predict-surface", "Posterior predictive grid with exceedance probabilities"},
  };
  for (auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", config_path, "key = value configuration file")->required();
    sub->add_option("--seed", seed, "Overrides the seed key");
    sub->add_option("--out", out, "Overrides the out key");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    geofps::RunConfig cfg = geofps::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out = *out;
    geofps::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return geofps::exit_code_for(e);
  }
  return 0;
}
