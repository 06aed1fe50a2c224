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

// Independent reference computations for the tests.  Everything here works on
// the joint distribution of y directly, in long double, without going through
// the posterior of the regression coefficients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "geofps/population.hpp"
#include "geofps/rng.hpp"

namespace oracle {

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

inline MatL to_l(const Eigen::MatrixXd& m) { return m.cast<long double>(); }
inline VecL to_l(const Eigen::VectorXd& v) { return v.cast<long double>(); }

struct Conditional {
  long double mean = 0;      // E[alpha'y | y_s]
  long double var = 0;       // Var[alpha'y | y_s]
  long double var_of_mean = 0;  // Var over y_s of E[alpha'y | y_s]
};

/// y ~ N(0, Sigma) in [s : ns] order; condition on the first k entries.
inline Conditional condition(const MatL& sigma, std::size_t k, const VecL& alpha, const VecL& y_s) {
  const auto kk = static_cast<Eigen::Index>(k);
  const auto KK = sigma.rows() - kk;
  const MatL S_s = sigma.topLeftCorner(kk, kk);
  const MatL S_ns_s = sigma.bottomLeftCorner(KK, kk);
  const MatL S_ns = sigma.bottomRightCorner(KK, KK);
  const VecL a_s = alpha.head(kk), a_ns = alpha.tail(KK);
  Eigen::LDLT<MatL> f(S_s);
  const VecL w = a_s + f.solve(MatL(S_ns_s.transpose())) * a_ns;
  Conditional c;
  c.mean = w.dot(y_s);
  c.var = a_ns.dot((S_ns - S_ns_s * f.solve(MatL(S_ns_s.transpose()))) * a_ns);
  c.var_of_mean = w.dot(S_s * w);
  return c;
}

/// Cov(y) = X (gamma2 A A' + V_beta) X' + V for y = X beta + e.
inline MatL joint_cov(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V, const Eigen::MatrixXd& V_beta,
                      const Eigen::MatrixXd& A, double gamma2) {
  const MatL P = static_cast<long double>(gamma2) * to_l(A) * to_l(A).transpose() + to_l(V_beta);
  return to_l(X) * P * to_l(X).transpose() + to_l(V);
}

/// Cov(y) in canonical [s : ns] order for the two-stage model with an optional
/// exponential spatial effect, entry by entry:
///   gamma2 + delta2 [same region] + sigma2_r [a = b] + tau2 exp(-phi d_ab) [shared field].
/// sigma2 is indexed by canonical group.  With `regional` the field is
/// independent across regions.
inline MatL two_stage_joint(const geofps::FinitePopulation& pop, const geofps::Partition& part,
                            double delta2, double gamma2, const std::vector<double>& sigma2,
                            double tau2 = 0.0, double phi = 1.0, bool regional = false) {
  std::vector<std::size_t> order = part.s_units;
  order.insert(order.end(), part.ns_units.begin(), part.ns_units.end());
  const std::size_t T = order.size();
  MatL S(T, T);
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b) {
      const auto& la = pop.locations()[order[a]];
      const auto& lb = pop.locations()[order[b]];
      long double v = gamma2;
      const bool same = la.region == lb.region;
      if (same) v += delta2;
      if (a == b) v += sigma2[part.position_of[la.region]];
      if (tau2 > 0.0 && (!regional || same)) {
        const long double dx = la.x - lb.x, dy = la.y - lb.y;
        v += tau2 * std::exp(-static_cast<long double>(phi) * std::sqrt(dx * dx + dy * dy));
      }
      S(Eigen::Index(a), Eigen::Index(b)) = v;
    }
  return S;
}

inline VecL canonical_alpha(const geofps::SplitWeights& a) {
  VecL out(a.s.size() + a.ns.size());
  out << to_l(a.s), to_l(a.ns);
  return out;
}

inline double rel_err(long double got, long double want) {
  const long double den = std::max<long double>(std::abs(want), 1e-300L);
  return static_cast<double>(std::abs(got - want) / den);
}

/// Population of T units on a line with the given region of each unit and a
/// value per unit; `sampled` flags the observed units.
struct Toy {
  geofps::FinitePopulation pop;
  geofps::SampleIndex sample;
};

inline Toy make_toy(const std::vector<std::size_t>& region, const std::vector<bool>& sampled,
                    const std::vector<double>& values, std::size_t n_regions,
                    const std::vector<std::pair<double, double>>& xy = {}) {
  std::vector<geofps::Location> locs;
  std::vector<std::optional<double>> vals;
  for (std::size_t u = 0; u < region.size(); ++u) {
    geofps::Location l;
    l.id = "u" + std::to_string(u);
    l.x = xy.empty() ? 0.1 * double(u) : xy[u].first;
    l.y = xy.empty() ? 0.05 * double(u % 3) : xy[u].second;
    l.region = region[u];
    locs.push_back(l);
    vals.emplace_back(values[u]);
  }
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < n_regions; ++r) labels.push_back("R" + std::to_string(r));
  Toy t;
  t.pop = geofps::FinitePopulation(std::move(locs), std::move(vals), std::move(labels));
  t.sample = geofps::SampleIndex(t.pop, sampled);
  return t;
}

/// Random toy with T units in N regions (every region nonempty) and a random
/// sample that touches at least one region.
inline Toy random_toy(geofps::StreamRng& rng, std::size_t T, std::size_t N) {
  std::vector<std::size_t> region(T);
  for (std::size_t u = 0; u < T; ++u) region[u] = u < N ? u : rng() % N;
  std::vector<bool> sampled(T, false);
  std::vector<double> values(T);
  std::vector<std::pair<double, double>> xy(T);
  for (std::size_t u = 0; u < T; ++u) {
    sampled[u] = rng.uniform() < 0.5;
    values[u] = rng.normal(2.0, 1.5);
    xy[u] = {rng.uniform(), rng.uniform()};
  }
  sampled[rng() % T] = true;
  return make_toy(region, sampled, values, N, xy);
}

}  // namespace oracle
