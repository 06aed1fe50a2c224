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

#include "geofps/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace geofps {
namespace {

double mean_of(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.mean(); }

double var_of(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

// Lag-t autocovariance with divisor n.
double autocov(const Eigen::VectorXd& v, double mean, Eigen::Index t) {
  const Eigen::Index n = v.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i + t < n; ++i) s += (v[i] - mean) * (v[i + t] - mean);
  return s / static_cast<double>(n);
}

}  // namespace

std::optional<double> split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) return std::nullopt;
  Eigen::Index n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  const Eigen::Index half = n / 2;
  if (half < 2) return std::nullopt;
  std::vector<Eigen::VectorXd> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.head(half));
    parts.emplace_back(c.segment(n - half, half));
  }
  const double len = static_cast<double>(half);
  Eigen::VectorXd means(static_cast<Eigen::Index>(parts.size()));
  double w = 0.0;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    means[static_cast<Eigen::Index>(j)] = mean_of(parts[j]);
    w += var_of(parts[j]);
  }
  w /= static_cast<double>(parts.size());
  if (!(w > 0.0)) return std::nullopt;
  const double b = len * var_of(means);
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw std::invalid_argument("effective_sample_size: no chains");
  Eigen::Index n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) return static_cast<double>(n * static_cast<Eigen::Index>(chains.size()));
  const double m = static_cast<double>(chains.size());
  const double len = static_cast<double>(n);

  std::vector<Eigen::VectorXd> cs;
  Eigen::VectorXd means(static_cast<Eigen::Index>(chains.size()));
  double w = 0.0;
  for (std::size_t j = 0; j < chains.size(); ++j) {
    cs.emplace_back(chains[j].head(n));
    means[static_cast<Eigen::Index>(j)] = mean_of(cs.back());
    w += var_of(cs.back());
  }
  w /= m;
  if (!(w > 0.0)) return m * len;
  const double b = chains.size() > 1 ? len * var_of(means) : 0.0;
  const double var_plus = (len - 1.0) / len * w + b / len;

  auto rho = [&](Eigen::Index t) {
    double acov = 0.0;
    for (std::size_t j = 0; j < cs.size(); ++j)
      acov += autocov(cs[j], means[static_cast<Eigen::Index>(j)], t);
    acov /= m;
    return 1.0 - (w - acov) / var_plus;
  };

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(std::max(10.0, m * len)));
  return m * len / tau;
}

double effective_sample_size(const Eigen::VectorXd& chain) {
  return effective_sample_size(std::vector<Eigen::VectorXd>{chain});
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double quantile(const Eigen::VectorXd& values, double p) {
  return quantile(std::vector<double>(values.data(), values.data() + values.size()), p);
}

DrawSummary summarize(const Eigen::VectorXd& values) {
  DrawSummary s;
  std::vector<double> v(values.data(), values.data() + values.size());
  s.mean = mean_of(values);
  s.sd = std::sqrt(var_of(values));
  s.q025 = quantile(v, 0.025);
  s.q500 = quantile(v, 0.5);
  s.q975 = quantile(v, 0.975);
  return s;
}

}  // namespace geofps
