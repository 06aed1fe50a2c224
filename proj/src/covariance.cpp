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

#include "geofps/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "geofps/error.hpp"
#include "geofps/linalg.hpp"
#include "geofps/simd/kernels.hpp"

namespace geofps {

void MaternSpec::validate() const {
  if (!std::isfinite(tau2) || tau2 < 0.0) throw std::invalid_argument("matern: tau2 must be finite and >= 0");
  if (!std::isfinite(sigma2) || sigma2 < 0.0) throw std::invalid_argument("matern: sigma2 must be finite and >= 0");
  if (!std::isfinite(phi) || phi <= 0.0) throw std::invalid_argument("matern: phi must be finite and > 0");
  if (!std::isfinite(eta) || eta <= 0.0) throw std::invalid_argument("matern: eta must be finite and > 0");
}

double matern_correlation_bessel(double d, double phi, double eta) {
  if (d < 0.0 || !std::isfinite(d)) throw std::invalid_argument("matern: distance must be finite and >= 0");
  if (d == 0.0) return 1.0;
  const double z = std::sqrt(2.0 * eta) * d * phi;
  if (z > 700.0) return 0.0;
  const double log_val = (1.0 - eta) * std::log(2.0) - std::lgamma(eta) + eta * std::log(z) +
                         std::log(std::cyl_bessel_k(eta, z));
  return std::clamp(std::exp(log_val), 0.0, 1.0);
}

double matern_correlation(double d, double phi, double eta) {
  if (d < 0.0 || !std::isfinite(d)) throw std::invalid_argument("matern: distance must be finite and >= 0");
  if (eta == 0.5) return std::exp(-phi * d);
  return matern_correlation_bessel(d, phi, eta);
}

double matern(double d, const MaternSpec& spec) {
  spec.validate();
  if (d < 0.0 || !std::isfinite(d)) throw std::invalid_argument("matern: distance must be finite and >= 0");
  if (d == 0.0) return spec.sigma2 + spec.tau2;
  return spec.tau2 * matern_correlation(d, spec.phi, spec.eta);
}

double effective_range(double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw std::invalid_argument("effective_range: phi must be > 0");
  return 3.0 / phi;
}

double practical_range(double phi, double eta) {
  if (!(phi > 0.0) || !(eta > 0.0)) throw std::invalid_argument("practical_range: phi and eta must be > 0");
  double lo = 0.0;
  double hi = 1.0 / phi;
  while (matern_correlation(hi, phi, eta) > 0.05) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (matern_correlation(mid, phi, eta) > 0.05 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd cross_distances(const Coords& a, const Coords& b) {
  const auto& k = simd::active_kernels();
  Eigen::MatrixXd d(a.size(), b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    k.distance_row(b.x[j], b.y[j], a.x.data(), a.y.data(), a.size(), d.col(j).data());
  }
  return d;
}

Eigen::MatrixXd pairwise_distances(const Coords& c) {
  Eigen::MatrixXd d = cross_distances(c, c);
  d = 0.5 * (d + d.transpose()).eval();
  d.diagonal().setZero();
  return d;
}

Eigen::MatrixXd spatial_covariance(const Coords& a, const Coords& b, double tau2, double phi,
                                   double eta) {
  Eigen::MatrixXd c(a.size(), b.size());
  if (eta == 0.5) {
    const auto& k = simd::active_kernels();
    for (std::size_t j = 0; j < b.size(); ++j) {
      k.exp_cov_row(b.x[j], b.y[j], a.x.data(), a.y.data(), a.size(), tau2, phi, c.col(j).data());
    }
    return c;
  }
  const Eigen::MatrixXd d = cross_distances(a, b);
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, j) = tau2 * matern_correlation(d(i, j), phi, eta);
  }
  return c;
}

Eigen::MatrixXd spatial_covariance(const Coords& c, double tau2, double phi, double eta) {
  Eigen::MatrixXd m = spatial_covariance(c, c, tau2, phi, eta);
  m = 0.5 * (m + m.transpose()).eval();
  m.diagonal().setConstant(tau2);
  return m;
}

Eigen::MatrixXd PartitionedCovariance::full() const {
  const Eigen::Index k = omega_s.rows();
  const Eigen::Index K = omega_ns.rows();
  Eigen::MatrixXd m(k + K, k + K);
  m.topLeftCorner(k, k) = omega_s;
  m.topRightCorner(k, K) = omega_s_ns;
  m.bottomLeftCorner(K, k) = omega_s_ns.transpose();
  m.bottomRightCorner(K, K) = omega_ns;
  return m;
}

namespace {

Coords slice(const Coords& c, std::size_t from, std::size_t count) {
  Coords out;
  out.x.assign(c.x.begin() + static_cast<std::ptrdiff_t>(from),
               c.x.begin() + static_cast<std::ptrdiff_t>(from + count));
  out.y.assign(c.y.begin() + static_cast<std::ptrdiff_t>(from),
               c.y.begin() + static_cast<std::ptrdiff_t>(from + count));
  return out;
}

void verify_psd(const Eigen::MatrixXd& m, double scale, const std::string& what) {
  if (m.rows() == 0) return;
  SpdFactor f(m, scale, what);
  (void)f;
}

}  // namespace

PartitionedCovariance build_omega(const SurveyData& data, const std::vector<MaternSpec>& specs,
                                  CovStructure structure, bool verify) {
  const Partition& p = data.part;
  const auto k = static_cast<Eigen::Index>(p.k());
  const auto K = static_cast<Eigen::Index>(p.K());
  PartitionedCovariance out;
  out.structure = structure;
  out.omega_s = Eigen::MatrixXd::Zero(k, k);
  out.omega_s_ns = Eigen::MatrixXd::Zero(k, K);
  out.omega_ns = Eigen::MatrixXd::Zero(K, K);
  if (structure == CovStructure::kNone) return out;

  if (specs.empty()) throw std::invalid_argument("build_omega: no covariance parameters");
  if (specs.size() != 1 && specs.size() != p.N) {
    throw std::invalid_argument("build_omega: expected 1 or " + std::to_string(p.N) + " specs, got " +
                                std::to_string(specs.size()));
  }
  for (const auto& s : specs) s.validate();

  if (structure == CovStructure::kFull) {
    if (specs.size() != 1) {
      throw std::invalid_argument("build_omega: per-region parameters need the block-diagonal structure");
    }
    const MaternSpec& s = specs.front();
    out.omega_s = spatial_covariance(data.coords_s, s.tau2, s.phi, s.eta);
    out.omega_s_ns = spatial_covariance(data.coords_s, data.coords_ns, s.tau2, s.phi, s.eta);
    out.omega_ns = spatial_covariance(data.coords_ns, s.tau2, s.phi, s.eta);
    if (verify) verify_psd(out.full(), s.tau2, "spatial covariance");
    return out;
  }

  for (std::size_t g = 0; g < p.N; ++g) {
    const MaternSpec& s = specs.size() == 1 ? specs.front() : specs[g];
    const std::size_t ms = p.m[g];
    const std::size_t mn = p.M[g] - p.m[g];
    const Coords cs = slice(data.coords_s, p.s_offset[g], ms);
    const Coords cn = slice(data.coords_ns, p.ns_offset[g], mn);
    const auto so = static_cast<Eigen::Index>(p.s_offset[g]);
    const auto no = static_cast<Eigen::Index>(p.ns_offset[g]);
    const auto ems = static_cast<Eigen::Index>(ms);
    const auto emn = static_cast<Eigen::Index>(mn);
    out.omega_s.block(so, so, ems, ems) = spatial_covariance(cs, s.tau2, s.phi, s.eta);
    out.omega_s_ns.block(so, no, ems, emn) = spatial_covariance(cs, cn, s.tau2, s.phi, s.eta);
    out.omega_ns.block(no, no, emn, emn) = spatial_covariance(cn, s.tau2, s.phi, s.eta);
    if (verify) {
      Eigen::MatrixXd blk(ems + emn, ems + emn);
      blk.topLeftCorner(ems, ems) = out.omega_s.block(so, so, ems, ems);
      blk.topRightCorner(ems, emn) = out.omega_s_ns.block(so, no, ems, emn);
      blk.bottomLeftCorner(emn, ems) = out.omega_s_ns.block(so, no, ems, emn).transpose();
      blk.bottomRightCorner(emn, emn) = out.omega_ns.block(no, no, emn, emn);
      verify_psd(blk, s.tau2, "spatial covariance of region '" + p.labels[g] + "'");
    }
  }
  return out;
}

PartitionedCovariance build_omega(const FinitePopulation& pop, const SampleIndex& sample,
                                  const MaternSpec& spec, CovStructure structure, bool verify) {
  SurveyData data;
  data.part = make_partition(pop, sample);
  data.coords_s = pop.coords(data.part.s_units);
  data.coords_ns = pop.coords(data.part.ns_units);
  return build_omega(data, {spec}, structure, verify);
}

EmpiricalVariogram empirical_variogram(const Coords& c, const Eigen::VectorXd& values,
                                       std::size_t n_bins, double max_dist) {
  const std::size_t n = c.size();
  if (static_cast<std::size_t>(values.size()) != n) {
    throw std::invalid_argument("variogram: " + std::to_string(values.size()) + " values for " +
                                std::to_string(n) + " locations");
  }
  if (n < 2) throw DataError("variogram: need at least 2 points");
  if (n_bins == 0) throw std::invalid_argument("variogram: need at least one bin");
  if (!values.allFinite()) throw DataError("variogram: non-finite value");

  const auto& k = simd::active_kernels();
  std::vector<double> row(n);
  double dmax = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    k.distance_row(c.x[i], c.y[i], c.x.data() + i + 1, c.y.data() + i + 1, n - i - 1, row.data());
    for (std::size_t j = 0; j < n - i - 1; ++j) dmax = std::max(dmax, row[j]);
  }
  if (dmax == 0.0) throw DataError("variogram: all points coincide");
  if (!(max_dist > 0.0)) max_dist = 0.5 * dmax;

  EmpiricalVariogram out;
  out.max_dist = max_dist;
  const double width = max_dist / static_cast<double>(n_bins);
  std::vector<double> sum_sq(n_bins, 0.0);
  std::vector<double> sum_d(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    k.distance_row(c.x[i], c.y[i], c.x.data() + i + 1, c.y.data() + i + 1, n - i - 1, row.data());
    for (std::size_t j = 0; j < n - i - 1; ++j) {
      const double d = row[j];
      if (d > max_dist) continue;
      // Coincident pairs join the first bin.
      auto b = d <= 0.0 ? std::size_t{0} : static_cast<std::size_t>(std::ceil(d / width)) - 1;
      b = std::min(b, n_bins - 1);
      const double diff = values[static_cast<Eigen::Index>(i)] - values[static_cast<Eigen::Index>(i + j + 1)];
      sum_sq[b] += diff * diff;
      sum_d[b] += d;
      ++count[b];
    }
  }
  out.bins.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    VariogramBin& bin = out.bins[b];
    bin.lo = width * static_cast<double>(b);
    bin.hi = width * static_cast<double>(b + 1);
    bin.pairs = count[b];
    out.total_pairs += count[b];
    if (count[b] == 0) {
      bin.mean_distance = 0.5 * (bin.lo + bin.hi);
      continue;
    }
    bin.mean_distance = sum_d[b] / static_cast<double>(count[b]);
    bin.gamma = sum_sq[b] / (2.0 * static_cast<double>(count[b]));
  }
  return out;
}

double VariogramFit::semivariance(double h) const {
  if (h <= 0.0) return 0.0;
  return nugget + partial_sill * (1.0 - std::exp(-3.0 * h / range));
}

namespace {

struct Obs {
  double h, g, w;
};

struct LinearFit {
  double c0 = 0.0, c1 = 0.0, sse = 0.0;
};

double sse_of(const std::vector<Obs>& obs, double a, double c0, double c1) {
  double s = 0.0;
  for (const Obs& o : obs) {
    const double r = o.g - c0 - c1 * (1.0 - std::exp(-3.0 * o.h / a));
    s += o.w * r * r;
  }
  return s;
}

// Best nonnegative (c0, c1) for a fixed range: the unconstrained solution if
// feasible, else the better of the two faces.
LinearFit fit_for_range(const std::vector<Obs>& obs, double a) {
  double sw = 0, sf = 0, sff = 0, sg = 0, sfg = 0;
  for (const Obs& o : obs) {
    const double f = 1.0 - std::exp(-3.0 * o.h / a);
    sw += o.w;
    sf += o.w * f;
    sff += o.w * f * f;
    sg += o.w * o.g;
    sfg += o.w * f * o.g;
  }
  std::vector<LinearFit> cand;
  const double det = sw * sff - sf * sf;
  if (det > 1e-14 * sw * sff) {
    const double c1 = (sw * sfg - sf * sg) / det;
    const double c0 = (sg - c1 * sf) / sw;
    if (c0 >= 0.0 && c1 >= 0.0) cand.push_back({c0, c1, 0.0});
  }
  cand.push_back({0.0, sff > 0.0 ? std::max(0.0, sfg / sff) : 0.0, 0.0});
  cand.push_back({std::max(0.0, sg / sw), 0.0, 0.0});
  LinearFit best;
  best.sse = std::numeric_limits<double>::infinity();
  for (LinearFit& c : cand) {
    c.sse = sse_of(obs, a, c.c0, c.c1);
    if (c.sse < best.sse) best = c;
  }
  return best;
}

}  // namespace

VariogramFit fit_exponential_variogram(const EmpiricalVariogram& emp) {
  std::vector<Obs> obs;
  const double h_floor = 1e-6 * emp.max_dist;
  for (const auto& b : emp.bins) {
    if (!b.gamma || b.pairs == 0) continue;
    const double h = std::max(b.mean_distance, h_floor);
    obs.push_back({b.mean_distance, *b.gamma, static_cast<double>(b.pairs) / (h * h)});
  }
  if (obs.size() < 3) {
    throw DataError("variogram fit: need at least 3 nonempty bins, have " + std::to_string(obs.size()));
  }
  double hmin = obs.front().h;
  double hmax = obs.front().h;
  double gmax = 0.0;
  double sw = 0.0, sg = 0.0;
  for (const Obs& o : obs) {
    hmin = std::min(hmin, o.h);
    hmax = std::max(hmax, o.h);
    gmax = std::max(gmax, o.g);
    sw += o.w;
    sg += o.w * o.g;
  }
  hmin = std::max(hmin, 1e-12 * hmax);

  VariogramFit flat;
  flat.nugget = sg / sw;
  flat.partial_sill = 0.0;
  flat.range = hmax;
  flat.range_identified = false;
  if (gmax <= 0.0) return flat;

  // Log-grid search over the range, then golden-section refinement around the
  // best grid point.
  const double la = std::log(0.1 * hmin);
  const double lb = std::log(20.0 * hmax);
  const int grid = 160;
  int best_i = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double a = std::exp(la + (lb - la) * i / grid);
    const double s = fit_for_range(obs, a).sse;
    if (s < best_sse) {
      best_sse = s;
      best_i = i;
    }
  }
  double lo = la + (lb - la) * std::max(0, best_i - 1) / grid;
  double hi = la + (lb - la) * std::min(grid, best_i + 1) / grid;
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = fit_for_range(obs, std::exp(x1)).sse;
  double f2 = fit_for_range(obs, std::exp(x2)).sse;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = fit_for_range(obs, std::exp(x1)).sse;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = fit_for_range(obs, std::exp(x2)).sse;
    }
  }
  const double a = std::exp(0.5 * (lo + hi));
  const LinearFit lf = fit_for_range(obs, a);

  if (lf.c1 <= 1e-10 * gmax || best_i == 0) return flat;
  VariogramFit out;
  out.nugget = lf.c0;
  out.partial_sill = lf.c1;
  out.range = a;
  out.range_identified = best_i < grid;
  return out;
}

}  // namespace geofps
