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

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geofps/draws.hpp"
#include "geofps/linalg.hpp"
#include "geofps/population.hpp"
#include "geofps/rng.hpp"

namespace geofps {

enum class ModelKind { kTwoStage, kSpatial, kTwoStageSpatial, kRegionalSpatial };

const char* model_name(ModelKind kind);
/// Accepts "1".."4" and the names two_stage, spatial, two_stage_spatial, regional_spatial.
std::optional<ModelKind> parse_model_kind(const std::string& s);

/// Shape / scale inverse-gamma prior.
struct InvGammaPrior {
  double shape = 2.0;
  double scale = 10.0;
  /// scale / (shape - 1); throws when shape <= 1.
  double mean() const;
};

struct UniformPrior {
  double lo = 5.0;
  double hi = 15.0;
};

enum class NuPriorKind { kFlat, kNormal };

/// What happens to the variance and decay parameters of regions with no
/// sampled unit.  kPinned fixes them (default: the prior mean); kPrior keeps
/// them random under their prior.
enum class UnsampledPolicy { kPinned, kPrior };

struct ModelSpec {
  ModelKind kind = ModelKind::kTwoStage;
  InvGammaPrior sigma2;
  InvGammaPrior tau2;
  InvGammaPrior delta2;
  InvGammaPrior gamma2;
  UniformPrior phi;
  double eta = 0.5;
  NuPriorKind nu_prior = NuPriorKind::kFlat;

  UnsampledPolicy unsampled = UnsampledPolicy::kPinned;
  std::optional<double> unsampled_sigma2;
  std::optional<double> unsampled_tau2;
  std::optional<double> unsampled_phi;

  // Pinned parameters (applied to every region for the per-region ones).
  std::optional<double> fixed_gamma2;
  std::optional<double> fixed_delta2;
  std::optional<double> fixed_sigma2;
  std::optional<double> fixed_tau2;
  std::optional<double> fixed_phi;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  bool spatial() const { return kind != ModelKind::kTwoStage; }
};

struct ChainState {
  double nu = 0.0;
  Eigen::VectorXd mu;       // one per mean group (N, or 1 for the spatial model)
  double gamma2 = 1.0;
  double delta2 = 1.0;
  Eigen::VectorXd sigma2;   // one per noise group
  Eigen::VectorXd tau2;     // one per spatial block
  Eigen::VectorXd phi;      // one per spatial block
  Eigen::VectorXd omega_s;  // k (empty without spatial effects)
  Eigen::VectorXd omega_ns; // K; empty unless the field is drawn
  Eigen::VectorXd y_ns;     // K; empty for spatial models unless the field is drawn
  double fp = 0.0;
};

struct PosteriorDraws {
  std::vector<std::string> names;  // scalar parameters, "fp" last
  Eigen::MatrixXd values;          // L x names.size()
  std::vector<double> phi_acceptance;  // per spatial block, after burn-in
  std::vector<double> phi_step;        // final log-scale proposal sd per block
  PointwiseDraws pointwise;        // filled when requested
  Eigen::MatrixXd y_ns;            // K x L when requested
  /// Parameter snapshots (latent vectors left empty) when requested.
  std::vector<ChainState> states;
  std::size_t chain = 0;

  Eigen::Index draws() const { return values.rows(); }
  /// Column of a named parameter; throws std::out_of_range if absent.
  Eigen::VectorXd column(const std::string& name) const;
  Eigen::VectorXd fp() const { return column("fp"); }
};

struct RunOptions {
  std::size_t iters = 5000;
  std::size_t burnin = 1000;
  bool store_pointwise = true;
  bool store_y_ns = false;
  bool store_states = false;
  /// Draw the whole nonsampled field each sweep (implied by store_y_ns).
  /// Otherwise only alpha_ns' omega_ns is drawn, which gives the same fp draws
  /// without factoring the K x K conditional correlation.
  bool full_latent = false;
  std::size_t adapt_every = 50;
};

/// Gibbs / Metropolis sampler for the four hierarchical models.
///
/// One sweep: nu -> mu -> delta2 -> phi -> omega_s -> (gamma2, sigma2, tau2)
/// -> nonsampled units -> fp.  Only y_s enters the parameter updates: the
/// nonsampled units are drawn from their predictive at the end of the sweep.
/// nu and delta2 integrate out the means of unsampled groups, which are
/// redrawn right after delta2; mu and phi integrate out omega.  Each
/// collapsed quantity is redrawn before anything conditions on it.
class GibbsSampler {
 public:
  GibbsSampler(const ModelSpec& model, const SurveyData& data, const SplitWeights& alpha,
               std::uint64_t seed, std::uint64_t chain = 0);
  ~GibbsSampler();
  GibbsSampler(GibbsSampler&&) noexcept;
  GibbsSampler& operator=(GibbsSampler&&) noexcept;

  const ChainState& state() const;
  /// Replaces the state; cached covariance factors follow phi.
  void set_state(const ChainState& s);
  /// Full mode (the default until run() picks its own) keeps omega_ns and
  /// y_ns in the state; otherwise only their contribution to fp is drawn.
  void set_full_latent(bool full);
  bool full_latent() const;
  /// Replaces the observed values (used by joint-distribution tests).
  void set_observed(const Eigen::VectorXd& y_s);
  const Eigen::VectorXd& observed() const;

  void update_nu();
  /// Means of the groups with sampled units.
  void update_mu();
  /// delta2, then the means of the groups without sampled units.
  void update_delta2();
  void update_variances();
  /// One Metropolis step per spatial block; returns the number accepted.
  std::size_t update_phi_mh();
  void update_omega_s();
  /// omega_ns and y_ns given omega_s and the parameters (only their fp
  /// contribution outside full mode).
  void update_nonsampled();
  /// update_omega_s then update_nonsampled.
  void update_latent();
  double compute_fp();

  /// Full sweep.  With `adapt` the proposal scales are tuned every
  /// `adapt_every` sweeps toward 30-45% acceptance.
  void sweep(bool adapt = false, std::size_t adapt_every = 50);

  PosteriorDraws run(const RunOptions& opt);

  /// Posterior predictive draw of y_ns with omega integrated out.
  Eigen::VectorXd impute_yns(StreamRng& rng) const;
  /// Draw of omega ([s : ns] order) given the full y = [y_s : state.y_ns].
  Eigen::VectorXd recover_omega(StreamRng& rng) const;
  /// Mean of that conditional, for checks.
  Eigen::VectorXd omega_conditional_mean() const;

  double phi_step(std::size_t block) const;
  void set_phi_step(std::size_t block, double step);
  std::size_t n_blocks() const;
  /// Scalar parameter names in the order used by PosteriorDraws.
  std::vector<std::string> parameter_names() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PosteriorDraws run_chain(const ModelSpec& model, const SurveyData& data, const SplitWeights& alpha,
                         std::size_t iters, std::size_t burnin, std::uint64_t seed);

/// omega | r ~ N(Omega (Omega + D)^{-1} r, Omega - Omega (Omega + D)^{-1} Omega)
/// with D = diag(noise_var): the conditional of the spatial effect given the
/// residual r = y - X mu.
struct OmegaPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
OmegaPosterior omega_posterior(const Eigen::MatrixXd& omega, const Eigen::VectorXd& noise_var,
                               const Eigen::VectorXd& resid);

struct ParamDiagnostics {
  std::string name;
  std::optional<double> rhat;  // absent with a single chain
  double ess = 0.0;
};

struct MultiChainResult {
  std::vector<PosteriorDraws> chains;
  std::vector<ParamDiagnostics> diagnostics;
};

/// Independent chains, one per seed, run in parallel.  Chain c uses the
/// random stream (seeds[c], c).
MultiChainResult run_parallel_chains(const ModelSpec& model, const SurveyData& data,
                                     const SplitWeights& alpha, const RunOptions& opt,
                                     const std::vector<std::uint64_t>& seeds);

}  // namespace geofps
