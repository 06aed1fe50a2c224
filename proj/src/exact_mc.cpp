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

#include "geofps/exact_mc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "geofps/covariance.hpp"
#include "geofps/error.hpp"
#include "geofps/linalg.hpp"
#include "geofps/parallel.hpp"
#include "geofps/rng.hpp"

namespace geofps {
namespace {

double diag_scale(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 1.0 : m.diagonal().cwiseAbs().mean();
}

Eigen::MatrixXd inverse_of(const SpdFactor& f) {
  return f.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(f.size(), f.size())));
}

void check_dims(const ConjugateModel& m) {
  const Eigen::Index k = m.y_s.size();
  const Eigen::Index p = m.X_s.cols();
  if (!(m.a > 0.0) || !(m.b > 0.0) || !std::isfinite(m.a) || !std::isfinite(m.b)) {
    throw std::invalid_argument("conjugate model: a and b must be finite and > 0");
  }
  if (k == 0) throw DataError("conjugate model: no observations");
  if (m.X_s.rows() != k || m.V_s.rows() != k || m.V_s.cols() != k) {
    throw std::invalid_argument("conjugate model: X_s / V_s do not match y_s");
  }
  if (m.V_beta.rows() != p || m.V_beta.cols() != p) throw std::invalid_argument("conjugate model: V_beta must be p x p");
  if (m.nu_prior != NuPrior::kFixedZero) {
    if (m.A.rows() != p) throw std::invalid_argument("conjugate model: A must have p rows");
    if (m.nu_prior == NuPrior::kProper &&
        (m.V_nu.rows() != m.A.cols() || m.V_nu.cols() != m.A.cols())) {
      throw std::invalid_argument("conjugate model: V_nu must be r x r");
    }
  }
}

}  // namespace

Eigen::VectorXd ConjugateComponents::m_beta(const Eigen::VectorXd& nu) const {
  if (Vb_inv_A.cols() == 0) return Xt_Vinv_y;
  return Vb_inv_A * nu + Xt_Vinv_y;
}

ConjugateComponents conjugate_components(const ConjugateModel& model) {
  check_dims(model);
  const Eigen::MatrixXd& X = model.X_s;
  const Eigen::VectorXd& y = model.y_s;

  ConjugateComponents c;
  c.a_star = model.a + 0.5 * static_cast<double>(y.size());

  const SpdFactor fs(model.V_s, diag_scale(model.V_s), "scaled sampled covariance");
  const SpdFactor fb(model.V_beta, diag_scale(model.V_beta), "scaled prior covariance of beta");
  const Eigen::MatrixXd Vinv_X = fs.solve(X);
  c.Xt_Vinv_y = X.transpose() * fs.solve(y);
  const Eigen::MatrixXd prec_beta = inverse_of(fb) + X.transpose() * Vinv_X;
  c.M_beta = inverse_of(SpdFactor(prec_beta, diag_scale(prec_beta), "posterior precision of beta"));

  const Eigen::MatrixXd R = model.V_s + X * model.V_beta * X.transpose();
  const SpdFactor fr(R, diag_scale(R), "marginal covariance of y_s");
  const Eigen::VectorXd Riy = fr.solve(y);
  double quad = y.dot(Riy);

  if (model.nu_prior == NuPrior::kFixedZero) {
    c.Vb_inv_A = Eigen::MatrixXd::Zero(X.cols(), 0);
  } else {
    const Eigen::MatrixXd XA = X * model.A;
    Eigen::MatrixXd prec_nu = XA.transpose() * fr.solve(XA);
    if (model.nu_prior == NuPrior::kProper) {
      const SpdFactor fv(model.V_nu, diag_scale(model.V_nu), "scaled prior covariance of nu");
      prec_nu += inverse_of(fv);
    }
    c.M_nu = inverse_of(SpdFactor(prec_nu, diag_scale(prec_nu), "posterior precision of nu"));
    c.m_nu = XA.transpose() * Riy;
    quad -= c.m_nu.dot(c.M_nu * c.m_nu);
    c.Vb_inv_A = fb.solve(model.A);
  }
  c.b_star = model.b + 0.5 * quad;
  if (!(c.b_star > 0.0) || !std::isfinite(c.b_star)) {
    throw NumericalError("conjugate components: posterior scale b* is not positive");
  }
  return c;
}

std::vector<ExactDraw> sample_exact(const ConjugateModel& model, const ConjugatePrediction& pred,
                                    const SplitWeights& alpha, std::size_t L, std::uint64_t seed) {
  if (L == 0) throw std::invalid_argument("sample_exact: need at least one draw");
  const ConjugateComponents comp = conjugate_components(model);
  const Eigen::Index k = model.y_s.size();
  const Eigen::Index p = model.X_s.cols();
  const Eigen::Index K = pred.X_ns.rows();
  if (pred.X_ns.cols() != p || pred.V_ns.rows() != K || pred.V_ns.cols() != K ||
      pred.V_ns_s.rows() != K || pred.V_ns_s.cols() != k) {
    throw std::invalid_argument("sample_exact: prediction blocks do not conform");
  }
  if (alpha.s.size() != k || alpha.ns.size() != K) throw std::invalid_argument("sample_exact: weight lengths");

  const bool has_nu = model.nu_prior != NuPrior::kFixedZero;
  SpdFactor f_nu;
  Eigen::VectorXd nu_mean;
  if (has_nu) {
    f_nu = SpdFactor(comp.M_nu, diag_scale(comp.M_nu), "M_nu");
    nu_mean = comp.M_nu * comp.m_nu;
  }
  const SpdFactor f_beta(comp.M_beta, diag_scale(comp.M_beta), "M_beta");

  // Kriging weights and conditional covariance of y_ns (scaled by delta2).
  Eigen::MatrixXd W;
  SpdFactor f_cond;
  if (K > 0) {
    const SpdFactor fs(model.V_s, diag_scale(model.V_s), "scaled sampled covariance");
    W = fs.solve(Eigen::MatrixXd(pred.V_ns_s.transpose())).transpose();
    Eigen::MatrixXd cond = pred.V_ns - W * pred.V_ns_s.transpose();
    cond = 0.5 * (cond + cond.transpose()).eval();
    f_cond = SpdFactor(cond, diag_scale(cond), "conditional covariance of y_ns");
  }
  const double fp_s = alpha.s.dot(model.y_s);

  std::vector<ExactDraw> out(L);
  parallel_for(L, [&](std::size_t l) {
    StreamRng rng(seed, l);
    ExactDraw& d = out[l];
    d.delta2 = rng.inv_gamma(comp.a_star, comp.b_star);
    const double s = std::sqrt(d.delta2);
    if (has_nu) d.nu = nu_mean + s * f_nu.mul_lower(rng.normal_vector(f_nu.size()));
    d.beta = comp.M_beta * comp.m_beta(d.nu) + s * f_beta.mul_lower(rng.normal_vector(p));
    if (K > 0) {
      d.y_ns = pred.X_ns * d.beta + W * (model.y_s - model.X_s * d.beta) +
               s * f_cond.mul_lower(rng.normal_vector(K));
    } else {
      d.y_ns.resize(0);
    }
    d.fp_value = fp_s + alpha.ns.dot(d.y_ns);
  });
  return out;
}

Eigen::VectorXd Model1Conditionals::c_star(double nu) const {
  std::vector<double> v;
  for (std::size_t g = 0; g < lambda.size(); ++g) {
    if (lambda[g] > 0.0) v.push_back((1.0 - lambda[g]) * nu + lambda[g] * ybar[g]);
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd Model1Conditionals::d_star() const {
  std::vector<double> v;
  for (double l : lambda) {
    if (l > 0.0) v.push_back(1.0 - l);
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Model1Conditionals model1_conditionals(const std::vector<GroupSummary>& groups,
                                       const std::vector<double>& ratio, double gamma_tilde2,
                                       double a, double b) {
  if (ratio.size() != groups.size()) throw std::invalid_argument("model1_conditionals: one ratio per region");
  if (!(gamma_tilde2 > 0.0)) throw std::invalid_argument("model1_conditionals: gamma~2 must be > 0");
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("model1_conditionals: a and b must be > 0");
  Model1Conditionals out;
  out.lambda.assign(groups.size(), 0.0);
  out.ybar.assign(groups.size(), 0.0);
  std::size_t k = 0;
  double sum_lambda = 0.0;
  double sum_ly = 0.0;
  double quad = 0.0;  // y'(X X' + V~)^{-1} y
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const GroupSummary& s = groups[g];
    if (s.m == 0) continue;
    if (!s.mean) throw DataError("model1_conditionals: sampled region '" + s.label + "' has no mean");
    const double r = ratio[g];
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("model1_conditionals: ratios must be finite and >= 0");
    const double m = static_cast<double>(s.m);
    const double lam = m / (m + r);
    out.lambda[g] = lam;
    out.ybar[g] = *s.mean;
    k += s.m;
    sum_lambda += lam;
    sum_ly += lam * *s.mean;
    // (1 1' + r I)^{-1} on the region block gives ssd / r + lambda ybar^2.
    if (r > 0.0) quad += s.sum_sq_dev / r;
    else if (s.sum_sq_dev > 0.0) throw NumericalError("model1_conditionals: zero ratio with within-region spread");
    quad += lam * *s.mean * *s.mean;
  }
  if (k == 0) throw DataError("model1_conditionals: no sampled regions");
  const double inv_gt = std::isinf(gamma_tilde2) ? 0.0 : 1.0 / gamma_tilde2;
  out.d = 1.0 / (inv_gt + sum_lambda);
  out.c = sum_ly * out.d;
  out.a_star = a + 0.5 * static_cast<double>(k);
  out.b_star = b + 0.5 * (quad - out.c * out.c / out.d);
  return out;
}

Model2Conditionals model2_conditionals(const Eigen::VectorXd& y_s, const Eigen::MatrixXd& omega_tilde_s,
                                       double a, double b) {
  const Eigen::Index k = y_s.size();
  if (k == 0) throw DataError("model2_conditionals: no observations");
  if (omega_tilde_s.rows() != k || omega_tilde_s.cols() != k) throw std::invalid_argument("model2_conditionals: Omega~ must be k x k");
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("model2_conditionals: a and b must be > 0");
  const SpdFactor f(omega_tilde_s, diag_scale(omega_tilde_s), "Omega~_s");
  const Eigen::VectorXd Oi1 = f.solve(Eigen::VectorXd(Eigen::VectorXd::Ones(k)));
  const Eigen::VectorXd Oiy = f.solve(y_s);
  Model2Conditionals out;
  out.mu_var_scale = 1.0 / (1.0 + Oi1.sum());
  const double t = Oi1.dot(y_s);
  out.mu_mean = out.mu_var_scale * t;
  out.a_star = a + 0.5 * static_cast<double>(k);
  out.b_star = b + 0.5 * (y_s.dot(Oiy) - t * out.mu_var_scale * t);
  return out;
}

ExactRun fixed_ratio_two_stage(const SurveyData& data, const SplitWeights& alpha,
                               const FixedRatioTwoStageOptions& opt) {
  const Partition& p = data.part;
  if (p.n < 2) throw DataError("fixed-ratio two-stage sampler: need at least 2 sampled regions");
  if (opt.draws == 0) throw std::invalid_argument("fixed-ratio two-stage sampler: need at least one draw");
  if (alpha.s.size() != data.y_s.size() || static_cast<std::size_t>(alpha.ns.size()) != p.K()) {
    throw std::invalid_argument("fixed-ratio two-stage sampler: weight lengths");
  }

  // Group summaries straight from y_s.
  std::vector<GroupSummary> groups(p.N);
  double sum_var = 0.0;
  std::size_t n_var = 0;
  for (std::size_t g = 0; g < p.N; ++g) {
    GroupSummary& s = groups[g];
    s.label = p.labels[g];
    s.m = p.m[g];
    s.M = p.M[g];
    if (s.m == 0) continue;
    const auto seg = data.y_s.segment(static_cast<Eigen::Index>(p.s_offset[g]), static_cast<Eigen::Index>(s.m));
    s.mean = seg.mean();
    s.sum_sq_dev = (seg.array() - *s.mean).square().sum();
    if (s.m >= 2) {
      s.variance = s.sum_sq_dev / static_cast<double>(s.m - 1);
      sum_var += *s.variance;
      ++n_var;
    }
  }
  if (n_var == 0) throw DataError("fixed-ratio two-stage sampler: no region has two or more sampled units");
  const double mean_var = sum_var / static_cast<double>(n_var);
  double mbar = 0.0;
  for (std::size_t g = 0; g < p.n; ++g) mbar += *groups[g].mean;
  mbar /= static_cast<double>(p.n);
  double var_mu = 0.0;
  for (std::size_t g = 0; g < p.n; ++g) var_mu += std::pow(*groups[g].mean - mbar, 2);
  var_mu /= static_cast<double>(p.n - 1);
  if (!(var_mu > 0.0)) throw DataError("fixed-ratio two-stage sampler: sampled region means do not vary");

  std::vector<double> ratio(p.N);
  for (std::size_t g = 0; g < p.N; ++g) {
    ratio[g] = (groups[g].variance ? *groups[g].variance : mean_var) / var_mu;
  }
  const double gt2 = opt.inv_gamma_tilde2 > 0.0 ? 1.0 / opt.inv_gamma_tilde2 : std::numeric_limits<double>::infinity();
  const Model1Conditionals mc = model1_conditionals(groups, ratio, gt2, opt.a, opt.b);

  const auto k = static_cast<Eigen::Index>(p.k());
  const auto L = static_cast<Eigen::Index>(opt.draws);
  ExactRun run;
  run.draws.resize(opt.draws);
  run.pointwise.mean.resize(k, L);
  run.pointwise.var.resize(k, L);
  const double fp_s = alpha.s.dot(data.y_s);

  parallel_for(opt.draws, [&](std::size_t l) {
    StreamRng rng(opt.seed, l);
    ExactDraw& d = run.draws[l];
    d.delta2 = rng.inv_gamma(mc.a_star, mc.b_star);
    const double s = std::sqrt(d.delta2);
    const double nu = rng.normal(mc.c, s * std::sqrt(mc.d));
    d.nu = Eigen::VectorXd::Constant(1, nu);
    d.beta.resize(static_cast<Eigen::Index>(p.N));
    for (std::size_t g = 0; g < p.N; ++g) {
      const double lam = mc.lambda[g];
      d.beta[static_cast<Eigen::Index>(g)] =
          g < p.n ? rng.normal((1.0 - lam) * nu + lam * mc.ybar[g], s * std::sqrt(1.0 - lam))
                  : rng.normal(nu, s);
    }
    d.y_ns.resize(static_cast<Eigen::Index>(p.K()));
    for (std::size_t h = 0; h < p.K(); ++h) {
      const std::size_t g = p.ns_group[h];
      d.y_ns[static_cast<Eigen::Index>(h)] = rng.normal(d.beta[static_cast<Eigen::Index>(g)], s * std::sqrt(ratio[g]));
    }
    d.fp_value = fp_s + alpha.ns.dot(d.y_ns);
    for (Eigen::Index h = 0; h < k; ++h) {
      const std::size_t g = p.s_group[static_cast<std::size_t>(h)];
      run.pointwise.mean(h, static_cast<Eigen::Index>(l)) = d.beta[static_cast<Eigen::Index>(g)];
      run.pointwise.var(h, static_cast<Eigen::Index>(l)) = d.delta2 * ratio[g];
    }
  });
  return run;
}

ExactRun fixed_ratio_spatial(const SurveyData& data, const SplitWeights& alpha,
                             const FixedRatioSpatialOptions& opt) {
  if (!(opt.phi > 0.0) || !(opt.tau2_over_delta2 >= 0.0)) {
    throw std::invalid_argument("fixed-ratio spatial sampler: phi must be > 0 and the ratio >= 0");
  }
  const auto k = static_cast<Eigen::Index>(data.part.k());
  const auto K = static_cast<Eigen::Index>(data.part.K());
  const double rho = opt.tau2_over_delta2;

  ConjugateModel m;
  m.a = opt.a;
  m.b = opt.b;
  m.nu_prior = NuPrior::kFixedZero;
  m.V_beta = Eigen::MatrixXd::Ones(1, 1);
  m.X_s = Eigen::MatrixXd::Ones(k, 1);
  m.y_s = data.y_s;
  m.V_s = spatial_covariance(data.coords_s, rho, opt.phi);
  m.V_s.diagonal().array() += 1.0;

  ConjugatePrediction pred;
  pred.X_ns = Eigen::MatrixXd::Ones(K, 1);
  pred.V_ns = spatial_covariance(data.coords_ns, rho, opt.phi);
  pred.V_ns.diagonal().array() += 1.0;
  pred.V_ns_s = spatial_covariance(data.coords_ns, data.coords_s, rho, opt.phi);

  ExactRun run;
  run.draws = sample_exact(m, pred, alpha, opt.draws, opt.seed);

  // omega_s | y_s, mu, delta2 ~ N((I - V~^{-1})(y - mu), delta2 (I - V~^{-1})).
  const SpdFactor fv(m.V_s, diag_scale(m.V_s), "Omega~_s");
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(k, k) - inverse_of(fv);
  C = 0.5 * (C + C.transpose()).eval();
  const SpdFactor fc(C, 1.0, "conditional covariance of omega_s");
  const std::uint64_t omega_seed = derive_seed(opt.seed, 1);
  const auto L = static_cast<Eigen::Index>(opt.draws);
  run.pointwise.mean.resize(k, L);
  run.pointwise.var.resize(k, L);
  parallel_for(opt.draws, [&](std::size_t l) {
    StreamRng rng(omega_seed, l);
    const ExactDraw& d = run.draws[l];
    const double mu = d.beta[0];
    const Eigen::VectorXd r = (data.y_s.array() - mu).matrix();
    const Eigen::VectorXd omega = C * r + std::sqrt(d.delta2) * fc.mul_lower(rng.normal_vector(k));
    run.pointwise.mean.col(static_cast<Eigen::Index>(l)) = (omega.array() + mu).matrix();
    run.pointwise.var.col(static_cast<Eigen::Index>(l)).setConstant(d.delta2);
  });
  return run;
}

}  // namespace geofps
