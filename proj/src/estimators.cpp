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

#include "geofps/estimators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "geofps/error.hpp"

namespace geofps {
namespace {

double mean_abs_diag(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 1.0 : m.diagonal().cwiseAbs().mean();
}

void require_shape(const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* what) {
  if (m.rows() != r || m.cols() != c) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(r) + "x" +
                                std::to_string(c) + ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  }
}

// True when the Cholesky factor exists with pivots well away from zero.
bool clearly_positive_definite(const Eigen::MatrixXd& m, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(m);
  if (llt.info() != Eigen::Success) return false;
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  const Eigen::VectorXd piv = Eigen::MatrixXd(llt.matrixL()).diagonal();
  return piv.cwiseAbs2().minCoeff() > 1e-12 * scale;
}

}  // namespace

LinearPosterior::LinearPosterior(const Eigen::MatrixXd& X_s, const Eigen::MatrixXd& X_ns,
                                 const FixedVarianceModel& model)
    : X_s_(X_s), V_s_(model.V_s) {
  const Eigen::Index k = X_s.rows();
  const Eigen::Index K = X_ns.rows();
  const Eigen::Index p = X_s.cols();
  require_shape(X_ns, K, p, "X_ns");
  require_shape(model.V_s, k, k, "V_s");
  require_shape(model.V_ns, K, K, "V_ns");
  require_shape(model.V_ns_s, K, k, "V_ns,s");
  require_shape(model.V_beta, p, p, "V_beta");
  if (model.A.rows() != p) throw std::invalid_argument("A: row count must match the columns of X");
  if (std::isnan(model.gamma2) || model.gamma2 < 0.0) throw std::invalid_argument("gamma2 must be >= 0");

  V_s_factor_ = SpdFactor(model.V_s, mean_abs_diag(model.V_s), "V_s");
  const Eigen::MatrixXd Vinv_X = V_s_factor_.solve(X_s);
  const Eigen::MatrixXd XtVX = X_s.transpose() * Vinv_X;

  if (std::isinf(model.gamma2)) {
    // Flat nu: P^{-1} = Vb^{-1} - Vb^{-1} A (A' Vb^{-1} A)^{-1} A' Vb^{-1}.
    flat_nu_ = true;
    const SpdFactor fb(model.V_beta, mean_abs_diag(model.V_beta), "V_beta");
    const Eigen::MatrixXd VbA = fb.solve(model.A);
    const SpdFactor fa(model.A.transpose() * VbA, 1.0, "A' V_beta^{-1} A");
    const Eigen::MatrixXd Pinv =
        fb.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p))) - VbA * fa.solve(Eigen::MatrixXd(VbA.transpose()));
    const SpdFactor fpost(Pinv + XtVX, 1.0, "posterior precision of beta");
    V_beta_post_ = fpost.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p)));
  } else {
    P_ = model.gamma2 * model.A * model.A.transpose() + model.V_beta;
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (p > 0 && clearly_positive_definite(P_, llt)) {
      const Eigen::MatrixXd Pinv = llt.solve(Eigen::MatrixXd::Identity(p, p));
      const SpdFactor fpost(Pinv + XtVX, mean_abs_diag(Pinv + XtVX), "posterior precision of beta");
      V_beta_post_ = fpost.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p)));
    } else {
      // Singular prior covariance: P - P X' (X P X' + V)^{-1} X P.
      const Eigen::MatrixXd XP = X_s * P_;
      const Eigen::MatrixXd S = XP * X_s.transpose() + model.V_s;
      const SpdFactor fs(S, mean_abs_diag(S), "marginal covariance of y_s");
      V_beta_post_ = P_ - XP.transpose() * fs.solve(XP);
    }
    V_beta_post_ = 0.5 * (V_beta_post_ + V_beta_post_.transpose()).eval();
  }

  // Q = X_ns - V_ns,s V_s^{-1} X_s
  const Eigen::MatrixXd Q = X_ns - model.V_ns_s * Vinv_X;
  B_V_ = model.V_ns_s + Q * V_beta_post_ * X_s.transpose();
  // Conditional covariance of y_ns given y_s.
  const Eigen::MatrixXd G = V_s_factor_.solve(Eigen::MatrixXd(model.V_ns_s.transpose()));
  cond_ = Q * V_beta_post_ * Q.transpose() + model.V_ns - model.V_ns_s * G;
}

Eigen::VectorXd LinearPosterior::weight_on_ys(const SplitWeights& alpha) const {
  if (alpha.s.size() != X_s_.rows() || alpha.ns.size() != B_V_.rows()) {
    throw std::invalid_argument("weights do not match the sampled / nonsampled split");
  }
  return alpha.s + V_s_factor_.solve(Eigen::VectorXd(B_V_.transpose() * alpha.ns));
}

double LinearPosterior::mean(const SplitWeights& alpha, const Eigen::VectorXd& y_s) const {
  if (y_s.size() != X_s_.rows()) throw std::invalid_argument("y_s length does not match X_s");
  return weight_on_ys(alpha).dot(y_s);
}

double LinearPosterior::variance_of_expectation(const SplitWeights& alpha,
                                                ExpectationVariance kind) const {
  const Eigen::VectorXd w = weight_on_ys(alpha);
  double v = w.dot(V_s_ * w);
  if (kind == ExpectationVariance::kMarginal) {
    if (flat_nu_) {
      throw std::invalid_argument("marginal variance of the estimate is unbounded under a flat prior on nu");
    }
    const Eigen::VectorXd xw = X_s_.transpose() * w;
    v += xw.dot(P_ * xw);
  }
  return std::max(0.0, v);
}

double LinearPosterior::posterior_variance(const SplitWeights& alpha) const {
  if (alpha.ns.size() != cond_.rows()) throw std::invalid_argument("weights do not match the nonsampled split");
  return std::max(0.0, alpha.ns.dot(cond_ * alpha.ns));
}

double posterior_mean_linear(const SplitWeights& alpha, const Eigen::VectorXd& y_s,
                             const DesignMatrices& design, const FixedVarianceModel& model) {
  return LinearPosterior(design.X_s, design.X_ns, model).mean(alpha, y_s);
}

double variance_of_expectation(const SplitWeights& alpha, const DesignMatrices& design,
                               const FixedVarianceModel& model, ExpectationVariance kind) {
  return LinearPosterior(design.X_s, design.X_ns, model).variance_of_expectation(alpha, kind);
}

double posterior_variance(const SplitWeights& alpha, const DesignMatrices& design,
                          const FixedVarianceModel& model) {
  return LinearPosterior(design.X_s, design.X_ns, model).posterior_variance(alpha);
}

double srs_estimate(const Eigen::VectorXd& alpha_s, const Eigen::VectorXd& alpha_ns,
                    const Eigen::VectorXd& y_s, double sigma2, double xi2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("srs_estimate: sigma2 must be > 0");
  if (!(xi2 > 0.0)) throw std::invalid_argument("srs_estimate: xi2 must be > 0");
  if (y_s.size() == 0) throw std::invalid_argument("srs_estimate: empty sample");
  if (alpha_s.size() != y_s.size()) throw std::invalid_argument("srs_estimate: length mismatch");
  const double ratio = std::isinf(xi2) ? 0.0 : sigma2 / xi2;
  const double shared = alpha_ns.sum() / (ratio + static_cast<double>(y_s.size()));
  return (alpha_s.array() + shared).matrix().dot(y_s);
}

double shrinkage_weight(double delta2, double sigma2, std::size_t m) {
  if (m == 0) return 0.0;
  if (std::isinf(delta2)) return 1.0;
  return delta2 / (delta2 + sigma2 / static_cast<double>(m));
}

double two_stage_estimate(const Partition& part, const SplitWeights& alpha,
                          const Eigen::VectorXd& y_s, double delta2, double gamma2,
                          const std::vector<double>& sigma2) {
  if (sigma2.size() != part.N) throw std::invalid_argument("two_stage_estimate: need one sigma2 per region");
  if (!(delta2 > 0.0) || !(gamma2 > 0.0)) throw std::invalid_argument("two_stage_estimate: delta2 and gamma2 must be > 0");
  if (static_cast<std::size_t>(y_s.size()) != part.k() || static_cast<std::size_t>(alpha.s.size()) != part.k() ||
      static_cast<std::size_t>(alpha.ns.size()) != part.K()) {
    throw std::invalid_argument("two_stage_estimate: length mismatch");
  }
  std::vector<double> lambda(part.N, 0.0);
  std::vector<double> alpha_group(part.N, 0.0);
  double sum_lambda = 0.0;
  for (std::size_t g = 0; g < part.N; ++g) {
    if (g < part.n) {
      if (part.m[g] == 0) throw DataError("two_stage_estimate: sampled region '" + part.labels[g] + "' has no units");
      if (!(sigma2[g] > 0.0) || !std::isfinite(sigma2[g])) {
        throw std::invalid_argument("two_stage_estimate: sigma2 must be > 0 for sampled regions");
      }
      lambda[g] = shrinkage_weight(delta2, sigma2[g], part.m[g]);
    }
    sum_lambda += lambda[g];
  }
  for (std::size_t h = 0; h < part.K(); ++h) alpha_group[part.ns_group[h]] += alpha.ns[h];

  // 1 / gamma~2 with gamma~2 = gamma2 / delta2.
  double inv_gt = 0.0;
  if (!std::isinf(gamma2)) inv_gt = std::isinf(delta2) ? std::numeric_limits<double>::infinity() : delta2 / gamma2;
  double num = 0.0;
  for (std::size_t g = 0; g < part.N; ++g) num += alpha_group[g] * (1.0 - lambda[g]);
  const double shared = std::isinf(inv_gt) ? 0.0 : num / (inv_gt + sum_lambda);

  double est = 0.0;
  for (std::size_t h = 0; h < part.k(); ++h) {
    const std::size_t g = part.s_group[h];
    const double coef = alpha.s[h] + (alpha_group[g] + shared) * lambda[g] / static_cast<double>(part.m[g]);
    est += coef * y_s[h];
  }
  return est;
}

double stratified_limit_estimate(const Partition& part, const Eigen::VectorXd& y_s) {
  if (part.n != part.N) throw DataError("stratified estimate: every stratum must be sampled");
  if (static_cast<std::size_t>(y_s.size()) != part.k()) throw std::invalid_argument("stratified estimate: length mismatch");
  double est = 0.0;
  for (std::size_t g = 0; g < part.N; ++g) {
    const auto m = static_cast<Eigen::Index>(part.m[g]);
    const double ybar = y_s.segment(static_cast<Eigen::Index>(part.s_offset[g]), m).mean();
    est += static_cast<double>(part.M[g]) / static_cast<double>(part.T()) * ybar;
  }
  return est;
}

double spatial_two_stage_estimate(const Partition& part, const SplitWeights& alpha,
                                  const Eigen::VectorXd& y_s, const PartitionedCovariance& omega,
                                  const Eigen::VectorXd& v_sigma_s, double delta2, double gamma2) {
  const auto k = static_cast<Eigen::Index>(part.k());
  const auto K = static_cast<Eigen::Index>(part.K());
  const auto N = static_cast<Eigen::Index>(part.N);
  require_shape(omega.omega_s, k, k, "Omega_s");
  require_shape(omega.omega_s_ns, k, K, "Omega_s,ns");
  if (y_s.size() != k || v_sigma_s.size() != k || alpha.s.size() != k || alpha.ns.size() != K) {
    throw std::invalid_argument("spatial_two_stage_estimate: length mismatch");
  }
  if (!(delta2 > 0.0) || !std::isfinite(delta2)) throw std::invalid_argument("spatial_two_stage_estimate: delta2 must be finite and > 0");
  if (!(gamma2 > 0.0)) throw std::invalid_argument("spatial_two_stage_estimate: gamma2 must be > 0");

  const DesignMatrices d = build_design_matrices(part);
  const Eigen::MatrixXd Qs = omega.omega_s + Eigen::MatrixXd(v_sigma_s.asDiagonal());
  const SpdFactor fq(Qs, mean_abs_diag(Qs), "Omega_s + V_s");
  const Eigen::MatrixXd QiX = fq.solve(d.X_s);
  const Eigen::VectorXd Qiy = fq.solve(y_s);

  // nu-hat = 1' X' R^{-1} y / (1/gamma2 + 1' X' R^{-1} X 1), R = delta2 X X' + Q_s.
  const Eigen::MatrixXd R = delta2 * d.X_s * d.X_s.transpose() + Qs;
  const SpdFactor fr(R, mean_abs_diag(R), "marginal covariance of y_s");
  const Eigen::VectorXd ones_k = Eigen::VectorXd::Ones(k);
  const Eigen::VectorXd Ri1 = fr.solve(ones_k);
  const double inv_g = std::isinf(gamma2) ? 0.0 : 1.0 / gamma2;
  const double nu_hat = Ri1.dot(y_s) / (inv_g + Ri1.sum());

  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(N, N) / delta2 + d.X_s.transpose() * QiX;
  const SpdFactor fh(H, mean_abs_diag(H), "posterior precision of the region means");
  const Eigen::VectorXd rhs =
      d.X_s.transpose() * Qiy + Eigen::VectorXd::Constant(N, nu_hat / delta2);
  const Eigen::VectorXd beta_hat = fh.solve(rhs);

  const Eigen::VectorXd c = omega.omega_s_ns * alpha.ns;
  return alpha.s.dot(y_s) + c.dot(Qiy) + (d.X_ns.transpose() * alpha.ns).dot(beta_hat) -
         c.dot(QiX * beta_hat);
}

FixedVarianceModel two_stage_model(const Partition& part, double delta2, double gamma2,
                                   const std::vector<double>& sigma2) {
  if (sigma2.size() != part.N) throw std::invalid_argument("two_stage_model: need one sigma2 per region");
  const auto k = static_cast<Eigen::Index>(part.k());
  const auto K = static_cast<Eigen::Index>(part.K());
  const auto N = static_cast<Eigen::Index>(part.N);
  FixedVarianceModel m;
  m.V_s = Eigen::MatrixXd::Zero(k, k);
  m.V_ns = Eigen::MatrixXd::Zero(K, K);
  m.V_ns_s = Eigen::MatrixXd::Zero(K, k);
  for (Eigen::Index h = 0; h < k; ++h) m.V_s(h, h) = sigma2[part.s_group[static_cast<std::size_t>(h)]];
  for (Eigen::Index h = 0; h < K; ++h) m.V_ns(h, h) = sigma2[part.ns_group[static_cast<std::size_t>(h)]];
  m.V_beta = delta2 * Eigen::MatrixXd::Identity(N, N);
  m.A = Eigen::MatrixXd::Ones(N, 1);
  m.gamma2 = gamma2;
  return m;
}

FixedVarianceModel spatial_two_stage_model(const Partition& part, const PartitionedCovariance& omega,
                                           const std::vector<double>& sigma2, double delta2,
                                           double gamma2) {
  FixedVarianceModel m = two_stage_model(part, delta2, gamma2, sigma2);
  m.V_s += omega.omega_s;
  m.V_ns += omega.omega_ns;
  m.V_ns_s = omega.omega_s_ns.transpose();
  return m;
}

}  // namespace geofps
