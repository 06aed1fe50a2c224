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

#include <ostream>
#include <string>

#include "geofps/cli/config.hpp"

namespace geofps {

/// Each command writes its files under cfg.out (created if missing) and a
/// short report to `log`.
void cmd_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_fit(const RunConfig& cfg, std::ostream& log);
void cmd_assess(const RunConfig& cfg, std::ostream& log);
void cmd_variogram(const RunConfig& cfg, std::ostream& log);
void cmd_predict_surface(const RunConfig& cfg, std::ostream& log);

/// Dispatches on the command name; throws ConfigError for an unknown name.
void run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

/// 0 success, 2 configuration, 3 data, 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace geofps
