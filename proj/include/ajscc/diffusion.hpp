#pragma once

// Variance-preserving diffusion with an analytic Gaussian-mixture data prior.
// Every noised marginal p_t stays a Gaussian mixture, so scores, denoisers and
// their Jacobians are exact closed forms.

#include <cstdint>
#include <vector>

#include "ajscc/common.hpp"

namespace ajscc {

// Timesteps are 1-based; alpha_bar(0) = 1 denotes clean data.
struct NoiseSchedule {
    int T = 0;
    RealVector betas;
    RealVector alphas;
    RealVector alpha_bars;

    double beta(int t) const { return betas[t - 1]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars[t - 1]; }
};

// Linear beta ramp from beta_1 to beta_T.
NoiseSchedule make_schedule(int T = 1000, double beta_1 = 1e-4, double beta_T = 0.02);

class GmmPrior {
public:
    GmmPrior(std::vector<double> weights, std::vector<RealVector> means, std::vector<RealMatrix> covariances);

    // Four unit-covariance components with means (+-2, +-2, 0, ..., 0).
    static GmmPrior axis_mixture(int dim);
    static GmmPrior gaussian(const RealVector& mean, const RealMatrix& covariance);
    // K equal-weight components with Sigma_k = B_k B_k^T + floor I and random means.
    // Per-coordinate variance of the mixture is 1 in expectation.
    static GmmPrior low_rank(int dim, int num_components, int rank, double floor_variance, double mean_variance,
                             std::uint64_t seed);

    int dim() const { return dim_; }
    int num_components() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    const RealVector& mean(int k) const { return means_[k]; }
    const RealMatrix& covariance(int k) const { return covs_[k]; }
    const RealMatrix& eigenvectors(int k) const { return eigvecs_[k]; }
    const RealVector& eigenvalues(int k) const { return eigvals_[k]; }

    RealVector sample(Rng& rng) const;
    RealVector sample(std::uint64_t seed) const;

    // log p_t(x) for p_t = sum_k pi_k N(sqrt(ab) mu_k, ab Sigma_k + (1 - ab) I).
    double log_density(const RealVector& x, double alpha_bar) const;

private:
    int dim_;
    std::vector<double> weights_;
    std::vector<RealVector> means_;
    std::vector<RealMatrix> covs_;
    std::vector<RealMatrix> eigvecs_;
    std::vector<RealVector> eigvals_;
};

// Score, responsibilities and per-component scores of p_t at one point; enough
// to apply the denoiser and its Jacobian without forming d x d matrices.
class DenoiserEval {
public:
    DenoiserEval(const GmmPrior& prior, double alpha_bar, const RealVector& x);

    double alpha_bar() const { return ab_; }
    const RealVector& score() const { return score_; }
    const RealVector& responsibilities() const { return resp_; }

    // (x + (1 - ab) score) / sqrt(ab).
    RealVector denoised() const;
    // -sqrt(1 - ab) score.
    RealVector predicted_noise() const;
    // Hessian of log p_t times v.
    RealVector hessian_times(const RealVector& v) const;
    // v^T d(denoised)/dx; the Jacobian is symmetric, so this is also J v.
    RealVector vjp(const RealVector& v) const;

private:
    const GmmPrior& prior_;
    double ab_;
    RealVector x_;
    RealVector score_;
    RealVector resp_;
    std::vector<RealVector> comp_scores_;
    std::vector<RealVector> inv_cov_diag_;  // 1 / (ab lambda + 1 - ab) per component
};

RealVector gmm_score(const GmmPrior& prior, const NoiseSchedule& schedule, const RealVector& x, int t);
RealMatrix score_hessian(const GmmPrior& prior, double alpha_bar, const RealVector& x);

// Throws ParameterError when alpha_bar(t) = 0.
RealVector tweedie_denoise(const GmmPrior& prior, const NoiseSchedule& schedule, const RealVector& x, int t);
RealVector denoiser_vjp(const GmmPrior& prior, const NoiseSchedule& schedule, const RealVector& x, int t,
                        const RealVector& v);
RealMatrix denoiser_jacobian(const GmmPrior& prior, double alpha_bar, const RealVector& x);

// x_t = sqrt(ab_t) x_0 + sqrt(1 - ab_t) eps.
RealVector marginal_sample(const RealVector& x0, const NoiseSchedule& schedule, int t, Rng& rng);
RealVector marginal_sample(const RealVector& x0, double alpha_bar, Rng& rng);

// One ancestral step t -> t-1 with sigma_t^2 = beta_t, for given eps_hat and z.
RealVector ddpm_update(const RealVector& x, const RealVector& eps_hat, const RealVector& z, int t,
                       const NoiseSchedule& schedule);
RealVector ddpm_step(const RealVector& x, int t, const NoiseSchedule& schedule, const GmmPrior& prior, Rng& rng);

struct SamplerConfig {
    std::vector<int> timesteps;  // t_1 < ... < t_S, all in [1, T]
    std::vector<double> sigmas;  // per step, sigma for the jump t_i -> t_{i-1}

    int steps() const { return static_cast<int>(timesteps.size()); }
    int previous(int i) const { return i == 0 ? 0 : timesteps[static_cast<std::size_t>(i) - 1]; }

    // t_i = round(1 + (i - 1)(T - 1)/(S - 1)); sigma from the DDIM eta family (eta = 0 is deterministic).
    static SamplerConfig uniform(int num_steps, const NoiseSchedule& schedule, double eta = 0.0);
    // Same timesteps with sigma_i^2 = min(beta_{t_i}, 1 - ab_{t_{i-1}}). The cap binds
    // near t = 0, and the final jump to clean data is deterministic.
    static SamplerConfig beta_noise(int num_steps, const NoiseSchedule& schedule);

    void validate(const NoiseSchedule& schedule) const;
};

// x_prev = sqrt(ab') x_hat + sqrt(1 - ab' - sigma^2) eps_hat + sigma z.
// Throws ParameterError when sigma^2 > 1 - ab'.
RealVector ddim_update(const RealVector& x_hat, const RealVector& eps_hat, const RealVector& z, double alpha_bar_prev,
                       double sigma);
// Jump from timesteps[i] to previous(i) (0-based i).
RealVector ddim_step(const RealVector& x, int i, const SamplerConfig& config, const NoiseSchedule& schedule,
                     const GmmPrior& prior, Rng& rng);

RealVector sample_ddpm(const GmmPrior& prior, const NoiseSchedule& schedule, Rng& rng);
RealVector sample_ddim(const GmmPrior& prior, const NoiseSchedule& schedule, const SamplerConfig& config, Rng& rng);

}  // namespace ajscc
