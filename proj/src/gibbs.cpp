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

#include "geofps/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "geofps/covariance.hpp"
#include "geofps/diagnostics.hpp"
#include "geofps/error.hpp"
#include "geofps/parallel.hpp"

namespace geofps {

const char* model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTwoStage: return "two_stage";
    case ModelKind::kSpatial: return "spatial";
    case ModelKind::kTwoStageSpatial: return "two_stage_spatial";
    case ModelKind::kRegionalSpatial: return "regional_spatial";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(const std::string& s) {
  if (s == "1" || s == "two_stage") return ModelKind::kTwoStage;
  if (s == "2" || s == "spatial") return ModelKind::kSpatial;
  if (s == "3" || s == "two_stage_spatial") return ModelKind::kTwoStageSpatial;
  if (s == "4" || s == "regional_spatial") return ModelKind::kRegionalSpatial;
  return std::nullopt;
}

double InvGammaPrior::mean() const {
  if (!(shape > 1.0)) throw std::invalid_argument("inverse-gamma prior mean needs shape > 1");
  return scale / (shape - 1.0);
}

namespace {

void check_ig(const InvGammaPrior& p, const char* name) {
  if (!(p.shape > 0.0 && std::isfinite(p.shape) && p.scale > 0.0 && std::isfinite(p.scale)))
    throw std::invalid_argument(std::string("prior ") + name + ": shape and scale must be positive");
}

void check_positive(const std::optional<double>& v, const char* name, bool allow_zero = false) {
  if (!v) return;
  const bool ok = std::isfinite(*v) && (allow_zero ? *v >= 0.0 : *v > 0.0);
  if (!ok) throw std::invalid_argument(std::string(name) + " must be positive and finite");
}

}  // namespace

void ModelSpec::validate() const {
  check_ig(sigma2, "sigma2");
  check_ig(tau2, "tau2");
  check_ig(delta2, "delta2");
  check_ig(gamma2, "gamma2");
  if (!(phi.lo > 0.0 && phi.hi > phi.lo && std::isfinite(phi.hi)))
    throw std::invalid_argument("prior phi: need 0 < lo < hi");
  if (!(eta > 0.0 && std::isfinite(eta))) throw std::invalid_argument("eta must be positive");
  check_positive(unsampled_sigma2, "unsampled_sigma2");
  check_positive(unsampled_tau2, "unsampled_tau2");
  check_positive(unsampled_phi, "unsampled_phi");
  check_positive(fixed_gamma2, "fixed_gamma2");
  check_positive(fixed_delta2, "fixed_delta2");
  check_positive(fixed_sigma2, "fixed_sigma2");
  check_positive(fixed_tau2, "fixed_tau2", true);
  check_positive(fixed_phi, "fixed_phi");
  if (fixed_phi && (*fixed_phi < phi.lo || *fixed_phi > phi.hi))
    throw std::invalid_argument("fixed_phi lies outside the phi prior support");
  if (unsampled_phi && (*unsampled_phi < phi.lo || *unsampled_phi > phi.hi))
    throw std::invalid_argument("unsampled_phi lies outside the phi prior support");
}

Eigen::VectorXd PosteriorDraws::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return values.col(static_cast<Eigen::Index>(j));
  throw std::out_of_range("no parameter named " + name);
}

OmegaPosterior omega_posterior(const Eigen::MatrixXd& omega, const Eigen::VectorXd& noise_var,
                               const Eigen::VectorXd& resid) {
  const Eigen::Index n = omega.rows();
  if (omega.cols() != n || noise_var.size() != n || resid.size() != n)
    throw std::invalid_argument("omega_posterior: dimension mismatch");
  OmegaPosterior out;
  if (n == 0) return out;
  Eigen::MatrixXd s = omega;
  s.diagonal() += noise_var;
  const double scale = std::max(1.0, s.diagonal().mean());
  const SpdFactor f(s, scale, "omega conditional");
  out.mean = omega * f.solve(resid);
  out.cov = omega - omega * f.solve(omega);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_finite(double v, const char* block) {
  if (!std::isfinite(v)) throw NumericalError(std::string("gibbs: non-finite value in ") + block + " update");
}

void require_finite(const Eigen::VectorXd& v, const char* block) {
  if (!v.allFinite()) throw NumericalError(std::string("gibbs: non-finite value in ") + block + " update");
}

Coords slice(const Coords& c, std::size_t off, std::size_t len) {
  Coords out;
  out.x.assign(c.x.begin() + static_cast<std::ptrdiff_t>(off),
               c.x.begin() + static_cast<std::ptrdiff_t>(off + len));
  out.y.assign(c.y.begin() + static_cast<std::ptrdiff_t>(off),
               c.y.begin() + static_cast<std::ptrdiff_t>(off + len));
  return out;
}

Coords concat(const Coords& a, const Coords& b) {
  Coords out = a;
  out.x.insert(out.x.end(), b.x.begin(), b.x.end());
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

}  // namespace

struct GibbsSampler::Impl {
  struct Block {
    std::size_t s_off = 0, s_len = 0, ns_off = 0, ns_len = 0;
    Coords cs, cns;
    bool tau_free = true;
    bool phi_free = true;
    double step = 0.5;
    std::size_t win_acc = 0, win_n = 0, tot_acc = 0, tot_n = 0;

    double cached_phi = kNaN;
    Eigen::MatrixXd Rs;   // s x s correlation
    SpdFactor Rs_f;
    bool have_field = false;
    Eigen::MatrixXd W;    // ns x s: R_ns,s R_s^{-1}
    SpdFactor cond_f;     // R_ns - W R_s,ns
    bool have_functional = false;
    Eigen::VectorXd wa;   // W' alpha_ns
    double va = 0.0;      // alpha_ns' (R_ns - W R_s,ns) alpha_ns

    SpdFactor Cf;         // tau2 R_s + D
    double cf_phi = kNaN, cf_tau2 = kNaN;
    Eigen::VectorXd cf_noise;
  };

  ModelSpec model;
  SurveyData data;
  SplitWeights alpha;
  StreamRng rng;
  ChainState st;
  bool full_latent = true;
  Eigen::VectorXd base_ns;  // y_ns - omega_ns of the current imputation
  double fp_spatial = 0.0;  // alpha_ns' omega_ns when the field is not drawn

  std::size_t G = 0;  // mean groups
  std::size_t R = 0;  // noise groups
  std::vector<std::size_t> s_mean, ns_mean, s_noise, ns_noise;
  std::vector<bool> sigma_free;
  std::vector<std::size_t> sampled_units;  // sampled units per noise group
  std::vector<Block> blocks;

  // Parameter table for recording.
  enum class Slot { kNu, kGamma2, kDelta2, kMu, kSigma2, kTau2, kPhi, kFp };
  std::vector<std::pair<Slot, std::size_t>> slots;
  std::vector<std::string> names;

  Impl(const ModelSpec& m, const SurveyData& d, const SplitWeights& a, std::uint64_t seed,
       std::uint64_t chain)
      : model(m), data(d), alpha(a), rng(seed, chain) {
    model.validate();
    const Partition& p = data.part;
    if (p.k() == 0) throw DataError("gibbs: no sampled units");
    if (static_cast<std::size_t>(data.y_s.size()) != p.k())
      throw std::invalid_argument("gibbs: y_s length does not match the partition");
    if (static_cast<std::size_t>(alpha.s.size()) != p.k() ||
        static_cast<std::size_t>(alpha.ns.size()) != p.K())
      throw std::invalid_argument("gibbs: weight lengths do not match the partition");
    layout();
    init_state();
    update_latent();
    compute_fp();
  }

  bool is_spatial() const { return model.spatial(); }
  bool global_mean() const { return model.kind == ModelKind::kSpatial; }

  double pinned_sigma2() const {
    return model.unsampled_sigma2 ? *model.unsampled_sigma2 : model.sigma2.mean();
  }
  double pinned_tau2() const { return model.unsampled_tau2 ? *model.unsampled_tau2 : model.tau2.mean(); }
  double pinned_phi() const {
    return model.unsampled_phi ? *model.unsampled_phi : 0.5 * (model.phi.lo + model.phi.hi);
  }

  void layout() {
    const Partition& p = data.part;
    const std::size_t k = p.k(), K = p.K();
    G = global_mean() ? 1 : p.N;
    R = global_mean() ? 1 : p.N;
    s_mean.assign(k, 0);
    ns_mean.assign(K, 0);
    if (!global_mean()) {
      s_mean = p.s_group;
      ns_mean = p.ns_group;
    }
    s_noise = s_mean;
    ns_noise = ns_mean;
    sampled_units.assign(R, 0);
    for (auto g : s_noise) ++sampled_units[g];
    sigma_free.assign(R, !model.fixed_sigma2.has_value());
    if (!global_mean() && model.unsampled == UnsampledPolicy::kPinned)
      for (std::size_t g = p.n; g < p.N; ++g) sigma_free[g] = false;

    if (model.kind == ModelKind::kSpatial || model.kind == ModelKind::kTwoStageSpatial) {
      Block b;
      b.s_len = k;
      b.ns_len = K;
      b.cs = data.coords_s;
      b.cns = data.coords_ns;
      blocks.push_back(std::move(b));
    } else if (model.kind == ModelKind::kRegionalSpatial) {
      for (std::size_t g = 0; g < p.N; ++g) {
        Block b;
        b.s_off = p.s_offset[g];
        b.s_len = p.m[g];
        b.ns_off = p.ns_offset[g];
        b.ns_len = p.M[g] - p.m[g];
        b.cs = slice(data.coords_s, b.s_off, b.s_len);
        b.cns = slice(data.coords_ns, b.ns_off, b.ns_len);
        if (b.s_len == 0 && model.unsampled == UnsampledPolicy::kPinned) {
          b.tau_free = false;
          b.phi_free = false;
        }
        blocks.push_back(std::move(b));
      }
    }
    for (auto& b : blocks) {
      if (model.fixed_tau2) b.tau_free = false;
      if (model.fixed_phi) b.phi_free = false;
    }

    // Recorded parameters.
    const bool regional = model.kind == ModelKind::kRegionalSpatial;
    auto lab = [&](const char* base, std::size_t g, bool per_group) {
      return per_group ? std::string(base) + "[" + p.labels[g] + "]" : std::string(base);
    };
    if (!global_mean()) {
      slots.emplace_back(Slot::kNu, 0);
      names.emplace_back("nu");
      if (model.nu_prior == NuPriorKind::kNormal && !model.fixed_gamma2) {
        slots.emplace_back(Slot::kGamma2, 0);
        names.emplace_back("gamma2");
      }
    }
    if (!model.fixed_delta2) {
      slots.emplace_back(Slot::kDelta2, 0);
      names.emplace_back("delta2");
    }
    for (std::size_t g = 0; g < G; ++g) {
      slots.emplace_back(Slot::kMu, g);
      names.push_back(lab("mu", g, !global_mean()));
    }
    for (std::size_t r = 0; r < R; ++r) {
      if (!sigma_free[r]) continue;
      slots.emplace_back(Slot::kSigma2, r);
      names.push_back(lab("sigma2", r, !global_mean()));
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (!blocks[b].tau_free) continue;
      slots.emplace_back(Slot::kTau2, b);
      names.push_back(lab("tau2", b, regional));
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (!blocks[b].phi_free) continue;
      slots.emplace_back(Slot::kPhi, b);
      names.push_back(lab("phi", b, regional));
    }
    slots.emplace_back(Slot::kFp, 0);
    names.emplace_back("fp");
  }

  void init_state() {
    const Partition& p = data.part;
    const Eigen::VectorXd& y = data.y_s;
    const double ybar = y.mean();
    const double vy = y.size() > 1 ? (y.array() - ybar).square().sum() / double(y.size() - 1) : 1.0;
    const double vpos = vy > 0.0 ? vy : 1.0;

    std::vector<double> gmean(p.N, ybar);
    double within = 0.0;
    std::size_t within_df = 0;
    for (std::size_t g = 0; g < p.n; ++g) {
      const auto seg = y.segment(static_cast<Eigen::Index>(p.s_offset[g]), static_cast<Eigen::Index>(p.m[g]));
      gmean[g] = seg.mean();
      within += (seg.array() - gmean[g]).square().sum();
      within_df += p.m[g] - 1;
    }
    const double sig0 = within_df > 0 && within > 0.0 ? within / double(within_df) : vpos;
    double between = 0.0;
    for (std::size_t g = 0; g < p.n; ++g) between += (gmean[g] - ybar) * (gmean[g] - ybar);
    between = p.n > 1 ? between / double(p.n - 1) : vpos;

    const double jitter = rng.normal() * std::sqrt(vpos) * 0.1;
    if (global_mean()) {
      st.nu = 0.0;
      st.mu = Eigen::VectorXd::Constant(1, ybar + jitter);
    } else {
      double nu = 0.0;
      for (std::size_t g = 0; g < p.n; ++g) nu += gmean[g];
      nu = nu / double(p.n) + jitter;
      st.nu = nu;
      st.mu.resize(static_cast<Eigen::Index>(p.N));
      for (std::size_t g = 0; g < p.N; ++g) st.mu[static_cast<Eigen::Index>(g)] = g < p.n ? gmean[g] : nu;
    }
    st.delta2 = model.fixed_delta2 ? *model.fixed_delta2 : std::max(between, 1e-3 * vpos);
    st.gamma2 = model.fixed_gamma2 ? *model.fixed_gamma2
                                   : (model.gamma2.shape > 1.0 ? model.gamma2.mean() : 1.0);
    const double sig_start = is_spatial() ? 0.5 * sig0 : sig0;
    st.sigma2 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(R), sig_start);
    for (std::size_t r = 0; r < R; ++r) {
      if (model.fixed_sigma2)
        st.sigma2[static_cast<Eigen::Index>(r)] = *model.fixed_sigma2;
      else if (!sigma_free[r])
        st.sigma2[static_cast<Eigen::Index>(r)] = pinned_sigma2();
    }
    const auto nb = static_cast<Eigen::Index>(blocks.size());
    st.tau2.resize(nb);
    st.phi.resize(nb);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto i = static_cast<Eigen::Index>(b);
      if (model.fixed_tau2) st.tau2[i] = *model.fixed_tau2;
      else if (!blocks[b].tau_free) st.tau2[i] = pinned_tau2();
      else st.tau2[i] = 0.5 * sig0;
      if (model.fixed_phi) st.phi[i] = *model.fixed_phi;
      else if (!blocks[b].phi_free) st.phi[i] = pinned_phi();
      else st.phi[i] = 0.5 * (model.phi.lo + model.phi.hi);
    }
    const auto k = static_cast<Eigen::Index>(p.k());
    const auto K = static_cast<Eigen::Index>(p.K());
    st.omega_s = is_spatial() ? Eigen::VectorXd::Zero(k) : Eigen::VectorXd();
    st.omega_ns = is_spatial() ? Eigen::VectorXd::Zero(K) : Eigen::VectorXd();
    st.y_ns.resize(K);
    for (Eigen::Index h = 0; h < K; ++h) st.y_ns[h] = st.mu[static_cast<Eigen::Index>(ns_mean[h])];
  }

  double omega_s_at(Eigen::Index h) const { return st.omega_s.size() ? st.omega_s[h] : 0.0; }

  Eigen::MatrixXd correlation(const Coords& a, const Coords& b, double phi) const {
    return spatial_covariance(a, b, 1.0, phi, model.eta);
  }
  Eigen::MatrixXd correlation(const Coords& a, double phi) const {
    return spatial_covariance(a, 1.0, phi, model.eta);
  }

  // alpha' R(phi) alpha over the nonsampled units of a block, row chunk by chunk.
  double alpha_quad(const Block& b, const Eigen::VectorXd& a, double phi) const {
    constexpr std::size_t kChunk = 256;
    double q = 0.0;
    for (std::size_t r0 = 0; r0 < b.ns_len; r0 += kChunk) {
      const std::size_t len = std::min(kChunk, b.ns_len - r0);
      const Eigen::MatrixXd rows = correlation(slice(b.cns, r0, len), b.cns, phi);
      q += a.segment(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(len)).dot(rows * a);
    }
    return q;
  }

  Eigen::VectorXd block_alpha_ns(const Block& b) const {
    return alpha.ns.segment(static_cast<Eigen::Index>(b.ns_off), static_cast<Eigen::Index>(b.ns_len));
  }

  void ensure_cache(Block& b, double phi, bool field = false, bool functional = false) {
    if (b.cached_phi != phi) {
      b.Rs = correlation(b.cs, phi);
      b.Rs_f = SpdFactor(b.Rs, 1.0, "spatial correlation");
      b.have_field = false;
      b.have_functional = false;
      b.cached_phi = phi;
    }
    if (functional && !b.have_functional) {
      const Eigen::VectorXd a = block_alpha_ns(b);
      b.va = b.ns_len ? alpha_quad(b, a, phi) : 0.0;
      b.wa = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.s_len));
      if (b.s_len > 0 && b.ns_len > 0) {
        const Eigen::VectorXd ra = correlation(b.cs, b.cns, phi) * a;  // R_s,ns alpha
        b.wa = b.Rs_f.solve(ra);
        b.va -= ra.dot(b.wa);
      }
      b.va = std::max(b.va, 0.0);
      b.have_functional = true;
    }
    if (!field || b.have_field) return;
    if (b.ns_len > 0) {
      const Eigen::MatrixXd Rns_s = correlation(b.cns, b.cs, phi);
      Eigen::MatrixXd cond = correlation(b.cns, phi);
      if (b.s_len > 0) {
        b.W = b.Rs_f.solve(Eigen::MatrixXd(Rns_s.transpose())).transpose();
        cond.noalias() -= b.W * Rns_s.transpose();
        cond = 0.5 * (cond + cond.transpose()).eval();
      } else {
        b.W.resize(static_cast<Eigen::Index>(b.ns_len), 0);
      }
      b.cond_f = SpdFactor(cond, 1.0, "conditional spatial correlation");
    } else {
      b.W.resize(0, static_cast<Eigen::Index>(b.s_len));
      b.cond_f = SpdFactor();
    }
    b.have_field = true;
  }

  Eigen::VectorXd block_resid(const Block& b) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(b.s_len));
    for (std::size_t i = 0; i < b.s_len; ++i) {
      const std::size_t h = b.s_off + i;
      r[static_cast<Eigen::Index>(i)] = data.y_s[static_cast<Eigen::Index>(h)] -
                                        st.mu[static_cast<Eigen::Index>(s_mean[h])];
    }
    return r;
  }

  Eigen::VectorXd block_noise_s(const Block& b) const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(b.s_len));
    for (std::size_t i = 0; i < b.s_len; ++i)
      d[static_cast<Eigen::Index>(i)] = st.sigma2[static_cast<Eigen::Index>(s_noise[b.s_off + i])];
    return d;
  }

  Eigen::VectorXd block_noise_ns(const Block& b) const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(b.ns_len));
    for (std::size_t i = 0; i < b.ns_len; ++i)
      d[static_cast<Eigen::Index>(i)] = st.sigma2[static_cast<Eigen::Index>(ns_noise[b.ns_off + i])];
    return d;
  }

  // ---- conditional updates ----

  // Mean groups that own sampled units: the first n (or the single global mean).
  std::size_t data_groups() const { return global_mean() ? 1 : data.part.n; }

  // Factor of tau2 R_s + D for a block, reused while its inputs are unchanged.
  const SpdFactor& marginal_factor(Block& b, std::size_t bi) {
    const auto i = static_cast<Eigen::Index>(bi);
    const Eigen::VectorXd noise = block_noise_s(b);
    if (b.cf_phi == st.phi[i] && b.cf_tau2 == st.tau2[i] && b.cf_noise.size() == noise.size() &&
        b.cf_noise == noise)
      return b.Cf;
    ensure_cache(b, st.phi[i]);
    Eigen::MatrixXd c = st.tau2[i] * b.Rs;
    c.diagonal() += noise;
    b.Cf = SpdFactor(c, std::max(1e-300, c.diagonal().mean()), "marginal covariance");
    b.cf_phi = st.phi[i];
    b.cf_tau2 = st.tau2[i];
    b.cf_noise = noise;
    return b.Cf;
  }

  // nu given the means of the sampled groups; the others are integrated out
  // here and redrawn in update_delta2.
  void update_nu() {
    if (global_mean()) {
      st.nu = 0.0;
      return;
    }
    const std::size_t nd = data_groups();
    double prec = static_cast<double>(nd) / st.delta2;
    if (model.nu_prior == NuPriorKind::kNormal) prec += 1.0 / st.gamma2;
    const double mean = st.mu.head(static_cast<Eigen::Index>(nd)).sum() / st.delta2 / prec;
    st.nu = mean + rng.normal() / std::sqrt(prec);
    require_finite(st.nu, "nu");
  }

  // Means of the sampled groups given y_s, with omega and y_ns integrated out.
  void update_mu() {
    const auto nd = static_cast<Eigen::Index>(data_groups());
    const double prior_mean = global_mean() ? 0.0 : st.nu;
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nd, nd) / st.delta2;
    Eigen::VectorXd rhs = Eigen::VectorXd::Constant(nd, prior_mean / st.delta2);
    if (!is_spatial()) {
      for (Eigen::Index h = 0; h < data.y_s.size(); ++h) {
        const double w = 1.0 / st.sigma2[static_cast<Eigen::Index>(s_noise[h])];
        const auto g = static_cast<Eigen::Index>(s_mean[h]);
        P(g, g) += w;
        rhs[g] += w * data.y_s[h];
      }
      for (Eigen::Index g = 0; g < nd; ++g)
        st.mu[g] = rhs[g] / P(g, g) + rng.normal() / std::sqrt(P(g, g));
      require_finite(st.mu, "mu");
      return;
    }
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& b = blocks[bi];
      if (b.s_len == 0) continue;
      const SpdFactor& f = marginal_factor(b, bi);
      const std::size_t g0 = s_mean[b.s_off];
      const std::size_t ng = s_mean[b.s_off + b.s_len - 1] - g0 + 1;
      Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.s_len), static_cast<Eigen::Index>(ng));
      for (std::size_t j = 0; j < b.s_len; ++j)
        X(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s_mean[b.s_off + j] - g0)) = 1.0;
      const Eigen::MatrixXd Z = f.solve(X);
      const auto o = static_cast<Eigen::Index>(g0), n = static_cast<Eigen::Index>(ng);
      P.block(o, o, n, n).noalias() += X.transpose() * Z;
      rhs.segment(o, n).noalias() +=
          Z.transpose() * data.y_s.segment(static_cast<Eigen::Index>(b.s_off), static_cast<Eigen::Index>(b.s_len));
    }
    const SpdFactor pf(P, 1.0 / st.delta2, "mean update");
    const Eigen::VectorXd z = rng.normal_vector(nd);
    st.mu.head(nd) = pf.solve(rhs) + pf.lower().transpose().triangularView<Eigen::Upper>().solve(z);
    require_finite(st.mu, "mu");
  }

  // delta2 given the sampled-group means (the remaining means integrated
  // out), then the means of the unsampled groups from N(nu, delta2).
  void update_delta2() {
    const std::size_t nd = data_groups();
    if (!model.fixed_delta2) {
      if (global_mean()) {
        const double m = st.mu[0];
        st.delta2 = rng.inv_gamma(model.delta2.shape + 0.5, model.delta2.scale + 0.5 * m * m);
      } else {
        const double ss = (st.mu.head(static_cast<Eigen::Index>(nd)).array() - st.nu).square().sum();
        st.delta2 = rng.inv_gamma(model.delta2.shape + 0.5 * static_cast<double>(nd),
                                  model.delta2.scale + 0.5 * ss);
      }
      require_finite(st.delta2, "delta2");
    }
    const double sd = std::sqrt(st.delta2);
    for (std::size_t g = nd; g < G; ++g) st.mu[static_cast<Eigen::Index>(g)] = st.nu + sd * rng.normal();
    require_finite(st.mu, "mu");
  }

  // gamma2 | nu, sigma2 | y_s, mu, omega_s and tau2 | omega_s.
  void update_variances() {
    if (!global_mean() && model.nu_prior == NuPriorKind::kNormal && !model.fixed_gamma2) {
      st.gamma2 = rng.inv_gamma(model.gamma2.shape + 0.5, model.gamma2.scale + 0.5 * st.nu * st.nu);
      require_finite(st.gamma2, "gamma2");
    }

    Eigen::VectorXd ss = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(R));
    for (Eigen::Index h = 0; h < data.y_s.size(); ++h) {
      const double e = data.y_s[h] - st.mu[static_cast<Eigen::Index>(s_mean[h])] - omega_s_at(h);
      ss[static_cast<Eigen::Index>(s_noise[h])] += e * e;
    }
    for (std::size_t r = 0; r < R; ++r) {
      if (!sigma_free[r]) continue;
      const auto i = static_cast<Eigen::Index>(r);
      st.sigma2[i] = rng.inv_gamma(model.sigma2.shape + 0.5 * static_cast<double>(sampled_units[r]),
                                   model.sigma2.scale + 0.5 * ss[i]);
    }
    require_finite(st.sigma2, "sigma2");

    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& b = blocks[bi];
      if (!b.tau_free) continue;
      const auto i = static_cast<Eigen::Index>(bi);
      ensure_cache(b, st.phi[i]);
      const Eigen::VectorXd w =
          st.omega_s.segment(static_cast<Eigen::Index>(b.s_off), static_cast<Eigen::Index>(b.s_len));
      const double q = b.s_len ? b.Rs_f.quad(w) : 0.0;
      st.tau2[i] = rng.inv_gamma(model.tau2.shape + 0.5 * static_cast<double>(b.s_len),
                                 model.tau2.scale + 0.5 * q);
    }
    require_finite(st.tau2, "tau2");
  }

  std::size_t update_phi_mh() {
    std::size_t accepted = 0;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& b = blocks[bi];
      if (!b.phi_free) continue;
      const auto i = static_cast<Eigen::Index>(bi);
      const double phi = st.phi[i];
      const double prop = phi * std::exp(b.step * rng.normal());
      const double u = rng.uniform();
      bool accept = false;
      if (prop >= model.phi.lo && prop <= model.phi.hi) {
        if (b.s_len == 0) {
          accept = std::log(u) < std::log(prop) - std::log(phi);
        } else {
          const Eigen::VectorXd r = block_resid(b);
          const SpdFactor& cur = marginal_factor(b, bi);
          const double ll_cur = -0.5 * (cur.log_det() + cur.quad(r));
          Eigen::MatrixXd c = st.tau2[i] * correlation(b.cs, prop);
          c.diagonal() += block_noise_s(b);
          SpdFactor pf(c, std::max(1e-300, c.diagonal().mean()), "phi update");
          const double ll_prop = -0.5 * (pf.log_det() + pf.quad(r));
          accept = std::log(u) < ll_prop - ll_cur + std::log(prop) - std::log(phi);
          if (accept) {
            b.Cf = std::move(pf);
            b.cf_phi = prop;
          }
        }
      }
      if (accept) {
        st.phi[i] = prop;
        ++accepted;
        ++b.win_acc;
        ++b.tot_acc;
      }
      ++b.win_n;
      ++b.tot_n;
    }
    require_finite(st.phi, "phi");
    return accepted;
  }

  void adapt(std::size_t every) {
    for (auto& b : blocks) {
      if (!b.phi_free || b.win_n < every) continue;
      const double rate = static_cast<double>(b.win_acc) / static_cast<double>(b.win_n);
      if (rate < 0.30) b.step *= 0.8;
      else if (rate > 0.45) b.step *= 1.25;
      b.win_acc = 0;
      b.win_n = 0;
    }
  }

  // omega_s | y_s, mu, sigma2, tau2, phi by a Matheron update per block.
  void update_omega_s() {
    if (!is_spatial()) return;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& b = blocks[bi];
      const auto i = static_cast<Eigen::Index>(bi);
      const double tau2 = st.tau2[i];
      const auto so = static_cast<Eigen::Index>(b.s_off), sl = static_cast<Eigen::Index>(b.s_len);
      if (sl == 0) continue;
      if (!(tau2 > 0.0)) {
        st.omega_s.segment(so, sl).setZero();
        continue;
      }
      const SpdFactor& cf = marginal_factor(b, bi);
      const Eigen::VectorXd noise = block_noise_s(b);
      const Eigen::VectorXd prior_w = std::sqrt(tau2) * b.Rs_f.mul_lower(rng.normal_vector(sl));
      const Eigen::VectorXd prior_e = noise.array().sqrt() * rng.normal_vector(sl).array();
      const Eigen::VectorXd r = block_resid(b);
      st.omega_s.segment(so, sl) = prior_w + tau2 * (b.Rs * cf.solve(Eigen::VectorXd(r - prior_w - prior_e)));
    }
    require_finite(st.omega_s, "omega");
  }

  // Nonsampled units given the parameters and omega_s: the noise part, then
  // either the field omega_ns (full mode) or only alpha_ns' omega_ns.
  void update_nonsampled() {
    const auto K = static_cast<Eigen::Index>(data.part.K());
    base_ns.resize(K);
    for (Eigen::Index h = 0; h < K; ++h) {
      const double sd = std::sqrt(st.sigma2[static_cast<Eigen::Index>(ns_noise[h])]);
      base_ns[h] = st.mu[static_cast<Eigen::Index>(ns_mean[h])] + sd * rng.normal();
    }
    fp_spatial = 0.0;
    if (is_spatial()) {
      st.omega_ns.resize(full_latent ? K : 0);
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        Block& b = blocks[bi];
        const auto i = static_cast<Eigen::Index>(bi);
        const double tau2 = st.tau2[i];
        const auto so = static_cast<Eigen::Index>(b.s_off), sl = static_cast<Eigen::Index>(b.s_len);
        const auto no = static_cast<Eigen::Index>(b.ns_off), nl = static_cast<Eigen::Index>(b.ns_len);
        if (nl == 0) continue;
        if (!(tau2 > 0.0)) {
          if (full_latent) st.omega_ns.segment(no, nl).setZero();
          continue;
        }
        ensure_cache(b, st.phi[i], full_latent, !full_latent);
        const Eigen::VectorXd ws = st.omega_s.segment(so, sl);
        if (full_latent) {
          Eigen::VectorXd wn = std::sqrt(tau2) * b.cond_f.mul_lower(rng.normal_vector(nl));
          if (sl > 0) wn.noalias() += b.W * ws;
          st.omega_ns.segment(no, nl) = wn;
        } else {
          fp_spatial += b.wa.dot(ws) + std::sqrt(tau2 * b.va) * rng.normal();
        }
      }
      require_finite(st.omega_ns, "omega");
      require_finite(fp_spatial, "omega");
    }
    if (full_latent || !is_spatial()) {
      st.y_ns = base_ns;
      if (is_spatial()) st.y_ns += st.omega_ns;
    } else {
      st.y_ns.resize(0);
    }
    require_finite(base_ns, "y_ns");
  }

  void update_latent() {
    update_omega_s();
    update_nonsampled();
  }

  double compute_fp() {
    if (st.y_ns.size() == base_ns.size()) st.fp = alpha.s.dot(data.y_s) + alpha.ns.dot(st.y_ns);
    else st.fp = alpha.s.dot(data.y_s) + alpha.ns.dot(base_ns) + fp_spatial;
    return st.fp;
  }

  void sweep(bool adapt_now, std::size_t every) {
    update_nu();
    update_mu();
    update_delta2();
    update_phi_mh();
    if (adapt_now) adapt(every);
    update_omega_s();
    update_variances();
    update_nonsampled();
    compute_fp();
  }

  double slot_value(const std::pair<Slot, std::size_t>& s) const {
    const auto i = static_cast<Eigen::Index>(s.second);
    switch (s.first) {
      case Slot::kNu: return st.nu;
      case Slot::kGamma2: return st.gamma2;
      case Slot::kDelta2: return st.delta2;
      case Slot::kMu: return st.mu[i];
      case Slot::kSigma2: return st.sigma2[i];
      case Slot::kTau2: return st.tau2[i];
      case Slot::kPhi: return st.phi[i];
      case Slot::kFp: return st.fp;
    }
    return kNaN;
  }

  PosteriorDraws run(const RunOptions& opt) {
    if (opt.iters <= opt.burnin) throw std::invalid_argument("gibbs: iters must exceed burnin");
    if (opt.adapt_every == 0) throw std::invalid_argument("gibbs: adapt_every must be positive");
    const auto L = static_cast<Eigen::Index>(opt.iters - opt.burnin);
    const auto k = data.y_s.size();
    PosteriorDraws out;
    out.names = names;
    out.values.resize(L, static_cast<Eigen::Index>(names.size()));
    if (opt.store_pointwise) {
      out.pointwise.mean.resize(k, L);
      out.pointwise.var.resize(k, L);
    }
    if (opt.store_y_ns) out.y_ns.resize(static_cast<Eigen::Index>(data.part.K()), L);
    if (full_latent != (opt.full_latent || opt.store_y_ns)) {
      full_latent = opt.full_latent || opt.store_y_ns;
      update_latent();
      compute_fp();
    }

    for (std::size_t it = 0; it < opt.iters; ++it) {
      if (it == opt.burnin)
        for (auto& b : blocks) b.tot_acc = b.tot_n = 0;
      sweep(it < opt.burnin, opt.adapt_every);
      if (it < opt.burnin) continue;
      const auto l = static_cast<Eigen::Index>(it - opt.burnin);
      for (std::size_t j = 0; j < slots.size(); ++j)
        out.values(l, static_cast<Eigen::Index>(j)) = slot_value(slots[j]);
      if (opt.store_pointwise) {
        for (Eigen::Index h = 0; h < k; ++h) {
          out.pointwise.mean(h, l) = st.mu[static_cast<Eigen::Index>(s_mean[h])] + omega_s_at(h);
          out.pointwise.var(h, l) = st.sigma2[static_cast<Eigen::Index>(s_noise[h])];
        }
      }
      if (opt.store_y_ns) out.y_ns.col(l) = st.y_ns;
      if (opt.store_states) {
        ChainState snap = st;
        snap.omega_s.resize(0);
        snap.omega_ns.resize(0);
        snap.y_ns.resize(0);
        out.states.push_back(std::move(snap));
      }
    }
    for (const auto& b : blocks) {
      if (!b.phi_free) continue;
      out.phi_acceptance.push_back(b.tot_n ? double(b.tot_acc) / double(b.tot_n) : 0.0);
      out.phi_step.push_back(b.step);
    }
    return out;
  }

  // ---- standalone conditionals ----

  Eigen::VectorXd impute_yns(StreamRng& r) const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.part.K()));
    if (!is_spatial()) {
      for (Eigen::Index h = 0; h < y.size(); ++h)
        y[h] = st.mu[static_cast<Eigen::Index>(ns_mean[h])] +
               std::sqrt(st.sigma2[static_cast<Eigen::Index>(ns_noise[h])]) * r.normal();
      return y;
    }
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const Block& b = blocks[bi];
      const auto i = static_cast<Eigen::Index>(bi);
      const auto nl = static_cast<Eigen::Index>(b.ns_len);
      if (nl == 0) continue;
      const double tau2 = st.tau2[i], phi = st.phi[i];
      Eigen::MatrixXd v_ns = tau2 * correlation(b.cns, phi);
      v_ns.diagonal() += block_noise_ns(b);
      Eigen::VectorXd mean(nl);
      for (Eigen::Index h = 0; h < nl; ++h)
        mean[h] = st.mu[static_cast<Eigen::Index>(ns_mean[b.ns_off + static_cast<std::size_t>(h)])];
      if (b.s_len > 0) {
        Eigen::MatrixXd v_s = tau2 * correlation(b.cs, phi);
        v_s.diagonal() += block_noise_s(b);
        const Eigen::MatrixXd v_ns_s = tau2 * correlation(b.cns, b.cs, phi);
        const SpdFactor f(v_s, std::max(1e-300, v_s.diagonal().mean()), "y_ns imputation");
        mean += v_ns_s * f.solve(block_resid(b));
        v_ns -= v_ns_s * f.solve(Eigen::MatrixXd(v_ns_s.transpose()));
        v_ns = 0.5 * (v_ns + v_ns.transpose()).eval();
      }
      const SpdFactor g(v_ns, std::max(1e-300, v_ns.diagonal().mean()), "y_ns imputation");
      y.segment(static_cast<Eigen::Index>(b.ns_off), nl) = mean + g.sample(r);
    }
    return y;
  }

  // Per-block conditional of omega given y = [y_s : y_ns].
  OmegaPosterior block_omega(const Block& b, std::size_t bi) const {
    const auto i = static_cast<Eigen::Index>(bi);
    const Coords all = concat(b.cs, b.cns);
    const Eigen::MatrixXd omega = st.tau2[i] * correlation(all, st.phi[i]);
    Eigen::VectorXd noise(static_cast<Eigen::Index>(b.s_len + b.ns_len));
    noise << block_noise_s(b), block_noise_ns(b);
    Eigen::VectorXd resid(noise.size());
    resid.head(static_cast<Eigen::Index>(b.s_len)) = block_resid(b);
    for (std::size_t j = 0; j < b.ns_len; ++j) {
      const std::size_t h = b.ns_off + j;
      resid[static_cast<Eigen::Index>(b.s_len + j)] =
          st.y_ns[static_cast<Eigen::Index>(h)] - st.mu[static_cast<Eigen::Index>(ns_mean[h])];
    }
    return omega_posterior(omega, noise, resid);
  }

  template <class F>
  Eigen::VectorXd assemble_omega(F&& per_block) const {
    if (static_cast<std::size_t>(st.y_ns.size()) != data.part.K())
      throw std::logic_error("recover_omega needs the imputed y_ns (full latent mode)");
    const auto k = data.y_s.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k + st.y_ns.size());
    if (!is_spatial()) return Eigen::VectorXd();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const Block& b = blocks[bi];
      if (b.s_len + b.ns_len == 0) continue;
      const Eigen::VectorXd v = per_block(b, bi);
      out.segment(static_cast<Eigen::Index>(b.s_off), static_cast<Eigen::Index>(b.s_len)) =
          v.head(static_cast<Eigen::Index>(b.s_len));
      out.segment(k + static_cast<Eigen::Index>(b.ns_off), static_cast<Eigen::Index>(b.ns_len)) =
          v.tail(static_cast<Eigen::Index>(b.ns_len));
    }
    return out;
  }
};

GibbsSampler::GibbsSampler(const ModelSpec& model, const SurveyData& data, const SplitWeights& alpha,
                           std::uint64_t seed, std::uint64_t chain)
    : impl_(std::make_unique<Impl>(model, data, alpha, seed, chain)) {}
GibbsSampler::~GibbsSampler() = default;
GibbsSampler::GibbsSampler(GibbsSampler&&) noexcept = default;
GibbsSampler& GibbsSampler::operator=(GibbsSampler&&) noexcept = default;

const ChainState& GibbsSampler::state() const { return impl_->st; }

void GibbsSampler::set_state(const ChainState& s) {
  const ChainState& cur = impl_->st;
  if (s.mu.size() != cur.mu.size() || s.sigma2.size() != cur.sigma2.size() ||
      s.tau2.size() != cur.tau2.size() || s.phi.size() != cur.phi.size() ||
      s.omega_s.size() != cur.omega_s.size() || s.omega_ns.size() != cur.omega_ns.size() ||
      s.y_ns.size() != cur.y_ns.size())
    throw std::invalid_argument("set_state: dimensions do not match the model");
  impl_->st = s;
  if (s.y_ns.size() == impl_->base_ns.size()) {
    impl_->base_ns = s.y_ns;
    if (s.omega_ns.size() == s.y_ns.size()) impl_->base_ns -= s.omega_ns;
  }
}

void GibbsSampler::set_full_latent(bool full) {
  if (impl_->full_latent == full) return;
  impl_->full_latent = full;
  impl_->update_latent();
  impl_->compute_fp();
}

bool GibbsSampler::full_latent() const { return impl_->full_latent; }

void GibbsSampler::set_observed(const Eigen::VectorXd& y_s) {
  if (y_s.size() != impl_->data.y_s.size())
    throw std::invalid_argument("set_observed: length does not match the sample");
  impl_->data.y_s = y_s;
}

const Eigen::VectorXd& GibbsSampler::observed() const { return impl_->data.y_s; }

void GibbsSampler::update_nu() { impl_->update_nu(); }
void GibbsSampler::update_mu() { impl_->update_mu(); }
void GibbsSampler::update_delta2() { impl_->update_delta2(); }
void GibbsSampler::update_variances() { impl_->update_variances(); }
std::size_t GibbsSampler::update_phi_mh() { return impl_->update_phi_mh(); }
void GibbsSampler::update_omega_s() { impl_->update_omega_s(); }
void GibbsSampler::update_nonsampled() { impl_->update_nonsampled(); }
void GibbsSampler::update_latent() { impl_->update_latent(); }
double GibbsSampler::compute_fp() { return impl_->compute_fp(); }
void GibbsSampler::sweep(bool adapt, std::size_t adapt_every) { impl_->sweep(adapt, adapt_every); }
PosteriorDraws GibbsSampler::run(const RunOptions& opt) { return impl_->run(opt); }

Eigen::VectorXd GibbsSampler::impute_yns(StreamRng& rng) const { return impl_->impute_yns(rng); }

Eigen::VectorXd GibbsSampler::recover_omega(StreamRng& rng) const {
  return impl_->assemble_omega([&](const Impl::Block& b, std::size_t bi) {
    const OmegaPosterior post = impl_->block_omega(b, bi);
    const SpdFactor f(post.cov, std::max(1e-300, post.cov.diagonal().mean()), "omega recovery");
    return Eigen::VectorXd(post.mean + f.sample(rng));
  });
}

Eigen::VectorXd GibbsSampler::omega_conditional_mean() const {
  return impl_->assemble_omega(
      [&](const Impl::Block& b, std::size_t bi) { return impl_->block_omega(b, bi).mean; });
}

double GibbsSampler::phi_step(std::size_t block) const { return impl_->blocks.at(block).step; }

void GibbsSampler::set_phi_step(std::size_t block, double step) {
  if (!(step > 0.0 && std::isfinite(step))) throw std::invalid_argument("set_phi_step: step must be positive");
  impl_->blocks.at(block).step = step;
}

std::size_t GibbsSampler::n_blocks() const { return impl_->blocks.size(); }

std::vector<std::string> GibbsSampler::parameter_names() const { return impl_->names; }

PosteriorDraws run_chain(const ModelSpec& model, const SurveyData& data, const SplitWeights& alpha,
                         std::size_t iters, std::size_t burnin, std::uint64_t seed) {
  RunOptions opt;
  opt.iters = iters;
  opt.burnin = burnin;
  GibbsSampler s(model, data, alpha, seed, 0);
  return s.run(opt);
}

MultiChainResult run_parallel_chains(const ModelSpec& model, const SurveyData& data,
                                     const SplitWeights& alpha, const RunOptions& opt,
                                     const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("run_parallel_chains: no seeds");
  MultiChainResult res;
  res.chains.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t c) {
    GibbsSampler s(model, data, alpha, seeds[c], c);
    res.chains[c] = s.run(opt);
    res.chains[c].chain = c;
  });
  const auto& names = res.chains.front().names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto& ch : res.chains) cols.emplace_back(ch.values.col(static_cast<Eigen::Index>(j)));
    ParamDiagnostics d;
    d.name = names[j];
    d.rhat = split_rhat(cols);
    d.ess = effective_sample_size(cols);
    res.diagnostics.push_back(std::move(d));
  }
  return res;
}

}  // namespace geofps
