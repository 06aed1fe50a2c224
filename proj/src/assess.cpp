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

#include "geofps/assess.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "geofps/error.hpp"
#include "geofps/rng.hpp"

namespace geofps {

Eigen::MatrixXd pointwise_loglik(const PointwiseDraws& draws, const Eigen::VectorXd& y) {
  const Eigen::Index k = draws.observations(), L = draws.draws();
  if (L == 0) throw std::invalid_argument("pointwise_loglik: no draws");
  if (y.size() != k || draws.var.rows() != k || draws.var.cols() != L)
    throw std::invalid_argument("pointwise_loglik: dimension mismatch");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  Eigen::MatrixXd ll(k, L);
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index h = 0; h < k; ++h) {
      const double v = draws.var(h, l);
      const double e = y[h] - draws.mean(h, l);
      ll(h, l) = -0.5 * (log2pi + std::log(v) + e * e / v);
    }
  if (!ll.allFinite()) throw NumericalError("pointwise_loglik: non-finite density");
  return ll;
}

WaicReport waic(const Eigen::MatrixXd& loglik) {
  const Eigen::Index k = loglik.rows(), L = loglik.cols();
  if (L < 2) throw std::invalid_argument("waic: needs at least two draws");
  if (k < 1) throw std::invalid_argument("waic: no observations");
  if (!loglik.allFinite()) throw NumericalError("waic: non-finite log-likelihood");
  Eigen::VectorXd elpd(k);
  WaicReport r;
  for (Eigen::Index h = 0; h < k; ++h) {
    const auto row = loglik.row(h);
    const double mx = row.maxCoeff();
    const double lpd = mx + std::log((row.array() - mx).exp().sum() / static_cast<double>(L));
    const double m = row.mean();
    const double var = (row.array() - m).square().sum() / static_cast<double>(L - 1);
    r.lpd_hat += lpd;
    r.p_waic += var;
    elpd[h] = lpd - var;
  }
  r.waic = -2.0 * (r.lpd_hat - r.p_waic);
  if (k > 1) {
    const double s2 = (elpd.array() - elpd.mean()).square().sum() / static_cast<double>(k - 1);
    r.se = 2.0 * std::sqrt(s2 * static_cast<double>(k));
  }
  return r;
}

DScore d_score(const Eigen::MatrixXd& replicates, const Eigen::VectorXd& y_reference) {
  const Eigen::Index k = replicates.rows(), L = replicates.cols();
  if (L < 2) throw std::invalid_argument("d_score: needs at least two replicates");
  if (y_reference.size() != k) throw std::invalid_argument("d_score: dimension mismatch");
  DScore d;
  for (Eigen::Index h = 0; h < k; ++h) {
    const auto row = replicates.row(h);
    const double m = row.mean();
    d.G += (y_reference[h] - m) * (y_reference[h] - m);
    d.P += (row.array() - m).square().sum() / static_cast<double>(L - 1);
  }
  d.D = d.G + d.P;
  return d;
}

Eigen::MatrixXd replicate_draws(const PointwiseDraws& draws, std::uint64_t seed) {
  const Eigen::Index k = draws.observations(), L = draws.draws();
  if (L == 0) throw std::invalid_argument("replicate_draws: no draws");
  Eigen::MatrixXd rep(k, L);
  for (Eigen::Index l = 0; l < L; ++l) {
    StreamRng rng(seed, static_cast<std::uint64_t>(l));
    for (Eigen::Index h = 0; h < k; ++h)
      rep(h, l) = draws.mean(h, l) + std::sqrt(draws.var(h, l)) * rng.normal();
  }
  return rep;
}

PointwiseDraws concat_draws(const PointwiseDraws& a, const PointwiseDraws& b) {
  if (a.draws() == 0) return b;
  if (b.draws() == 0) return a;
  if (a.observations() != b.observations()) throw std::invalid_argument("concat_draws: row mismatch");
  PointwiseDraws out;
  out.mean.resize(a.observations(), a.draws() + b.draws());
  out.var.resizeLike(out.mean);
  out.mean << a.mean, b.mean;
  out.var << a.var, b.var;
  return out;
}

}  // namespace geofps
