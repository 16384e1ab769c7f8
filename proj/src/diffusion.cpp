#include "ajscc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ajscc {

NoiseSchedule make_schedule(int T, double beta_1, double beta_T) {
    require(T >= 1, "schedule length must be positive");
    require(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0, "need 0 < beta_1 <= beta_T < 1");
    NoiseSchedule s;
    s.T = T;
    s.betas = T == 1 ? RealVector(RealVector::Constant(1, beta_1)) : RealVector(RealVector::LinSpaced(T, beta_1, beta_T));
    s.alphas = RealVector::Ones(T) - s.betas;
    s.alpha_bars.resize(T);
    double running = 1.0;
    for (int t = 0; t < T; ++t) {
        running *= s.alphas[t];
        s.alpha_bars[t] = running;
    }
    return s;
}

GmmPrior::GmmPrior(std::vector<double> weights, std::vector<RealVector> means, std::vector<RealMatrix> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances)) {
    require(!weights_.empty(), "prior needs at least one component");
    require(means_.size() == weights_.size() && covs_.size() == weights_.size(), "component count mismatch");
    dim_ = static_cast<int>(means_[0].size());
    require(dim_ >= 1, "prior dimension must be positive");
    double total = 0.0;
    for (double w : weights_) {
        require(w > 0.0, "mixture weights must be positive");
        total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        require(means_[k].size() == dim_, "mean dimension mismatch");
        require(covs_[k].rows() == dim_ && covs_[k].cols() == dim_, "covariance dimension mismatch");
        require((covs_[k] - covs_[k].transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + covs_[k].cwiseAbs().maxCoeff()),
                "covariance must be symmetric");
        Eigen::SelfAdjointEigenSolver<RealMatrix> eig(covs_[k]);
        require(eig.eigenvalues().minCoeff() > 0.0, "covariance must be positive definite");
        eigvecs_.push_back(eig.eigenvectors());
        eigvals_.push_back(eig.eigenvalues());
    }
}

GmmPrior GmmPrior::axis_mixture(int dim) {
    require(dim >= 2, "axis mixture needs at least two dimensions");
    std::vector<RealVector> means;
    for (double a : {2.0, -2.0}) {
        for (double b : {2.0, -2.0}) {
            RealVector mu = RealVector::Zero(dim);
            mu[0] = a;
            mu[1] = b;
            means.push_back(mu);
        }
    }
    return GmmPrior(std::vector<double>(4, 0.25), std::move(means),
                    std::vector<RealMatrix>(4, RealMatrix::Identity(dim, dim)));
}

GmmPrior GmmPrior::gaussian(const RealVector& mean, const RealMatrix& covariance) {
    return GmmPrior({1.0}, {mean}, {covariance});
}

GmmPrior GmmPrior::low_rank(int dim, int num_components, int rank, double floor_variance, double mean_variance,
                            std::uint64_t seed) {
    require(dim >= 1 && num_components >= 1 && rank >= 1, "low-rank prior sizes must be positive");
    require(floor_variance > 0.0 && mean_variance >= 0.0 && floor_variance + mean_variance < 1.0,
            "need floor_variance > 0 and floor_variance + mean_variance < 1");
    Rng rng(seed);
    const double factor_sd = std::sqrt((1.0 - mean_variance - floor_variance) / rank);
    std::vector<RealVector> means;
    std::vector<RealMatrix> covs;
    for (int k = 0; k < num_components; ++k) means.push_back(rng.normal_vector(dim) * std::sqrt(mean_variance));
    for (int k = 0; k < num_components; ++k) {
        RealMatrix B(dim, rank);
        for (int c = 0; c < rank; ++c) B.col(c) = rng.normal_vector(dim) * factor_sd;
        RealMatrix S = B * B.transpose() + floor_variance * RealMatrix::Identity(dim, dim);
        covs.push_back(0.5 * (S + S.transpose()));
    }
    std::vector<double> weights(static_cast<std::size_t>(num_components), 1.0 / num_components);
    // Equal weights may not sum to exactly 1 in floating point.
    double rest = 1.0;
    for (int k = 0; k + 1 < num_components; ++k) rest -= weights[static_cast<std::size_t>(k)];
    weights.back() = rest;
    return GmmPrior(std::move(weights), std::move(means), std::move(covs));
}

RealVector GmmPrior::sample(Rng& rng) const {
    double u = rng.uniform();
    int k = 0;
    while (k + 1 < num_components() && u >= weights_[static_cast<std::size_t>(k)]) {
        u -= weights_[static_cast<std::size_t>(k)];
        ++k;
    }
    const RealVector z = rng.normal_vector(dim_);
    return means_[k] + eigvecs_[k] * (eigvals_[k].cwiseSqrt().cwiseProduct(z));
}

RealVector GmmPrior::sample(std::uint64_t seed) const {
    Rng rng(seed);
    return sample(rng);
}

double GmmPrior::log_density(const RealVector& x, double alpha_bar) const {
    require(x.size() == dim_, "state dimension mismatch");
    const double a = std::sqrt(alpha_bar);
    std::vector<double> logs;
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < num_components(); ++k) {
        const RealVector c = (alpha_bar * eigvals_[k].array() + (1.0 - alpha_bar)).matrix();
        const RealVector z = eigvecs_[k].transpose() * (x - a * means_[k]);
        const double lk = std::log(weights_[k]) - 0.5 * (z.array().square() / c.array()).sum() -
                          0.5 * c.array().log().sum() - 0.5 * dim_ * std::log(2.0 * std::numbers::pi);
        logs.push_back(lk);
        top = std::max(top, lk);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - top);
    return top + std::log(acc);
}

DenoiserEval::DenoiserEval(const GmmPrior& prior, double alpha_bar, const RealVector& x)
    : prior_(prior), ab_(alpha_bar), x_(x) {
    require(x.size() == prior.dim(), "state dimension mismatch");
    require(alpha_bar >= 0.0 && alpha_bar <= 1.0, "alpha_bar must lie in [0, 1]");
    const int K = prior.num_components();
    const double a = std::sqrt(alpha_bar);
    RealVector logw(K);
    for (int k = 0; k < K; ++k) {
        const RealVector inv_c = (alpha_bar * prior.eigenvalues(k).array() + (1.0 - alpha_bar)).inverse().matrix();
        const RealVector z = prior.eigenvectors(k).transpose() * (x - a * prior.mean(k));
        const RealVector zc = z.cwiseProduct(inv_c);
        logw[k] = std::log(prior.weights()[k]) - 0.5 * z.dot(zc) + 0.5 * inv_c.array().log().sum();
        comp_scores_.push_back(-(prior.eigenvectors(k) * zc));
        inv_cov_diag_.push_back(inv_c);
    }
    resp_ = (logw.array() - logw.maxCoeff()).exp().matrix();
    resp_ /= resp_.sum();
    score_ = RealVector::Zero(x.size());
    for (int k = 0; k < K; ++k) score_ += resp_[k] * comp_scores_[k];
}

RealVector DenoiserEval::denoised() const {
    require(ab_ > 0.0, "denoiser undefined at alpha_bar = 0");
    return (x_ + (1.0 - ab_) * score_) / std::sqrt(ab_);
}

RealVector DenoiserEval::predicted_noise() const { return -std::sqrt(1.0 - ab_) * score_; }

RealVector DenoiserEval::hessian_times(const RealVector& v) const {
    require(v.size() == x_.size(), "vector dimension mismatch");
    RealVector out = -score_ * score_.dot(v);
    for (int k = 0; k < prior_.num_components(); ++k) {
        const RealMatrix& V = prior_.eigenvectors(k);
        const RealVector pv = V * (V.transpose() * v).cwiseProduct(inv_cov_diag_[k]);
        out += resp_[k] * (comp_scores_[k] * comp_scores_[k].dot(v) - pv);
    }
    return out;
}

RealVector DenoiserEval::vjp(const RealVector& v) const {
    require(ab_ > 0.0, "denoiser undefined at alpha_bar = 0");
    return (v + (1.0 - ab_) * hessian_times(v)) / std::sqrt(ab_);
}

RealVector gmm_score(const GmmPrior& prior, const NoiseSchedule& schedule, const RealVector& x, int t) {
    return DenoiserEval(prior, schedule.alpha_bar(t), x).score();
}

RealMatrix score_hessian(const GmmPrior& prior, double alpha_bar, const RealVector& x) {
    const DenoiserEval ev(prior, alpha_bar, x);
    const int d = prior.dim();
    RealMatrix H(d, d);
    for (int i = 0; i < d; ++i) H.col(i) = ev.hessian_times(RealVector::Unit(d, i));
    return H;
}

RealVector tweedie_denoise(const GmmPrior& prior, const NoiseSchedule& schedule, const RealVector& x, int t) {
    return DenoiserEval(prior, schedule.alpha_bar(t), x).denoised();
}

RealVector denoiser_vjp(const GmmPrior& prior, const NoiseSchedule& schedule, const RealVector& x, int t,
                        const RealVector& v) {
    return DenoiserEval(prior, schedule.alpha_bar(t), x).vjp(v);
}

RealMatrix denoiser_jacobian(const GmmPrior& prior, double alpha_bar, const RealVector& x) {
    const DenoiserEval ev(prior, alpha_bar, x);
    const int d = prior.dim();
    RealMatrix J(d, d);
    for (int i = 0; i < d; ++i) J.row(i) = ev.vjp(RealVector::Unit(d, i)).transpose();
    return J;
}

RealVector marginal_sample(const RealVector& x0, double alpha_bar, Rng& rng) {
    require(alpha_bar >= 0.0 && alpha_bar <= 1.0, "alpha_bar must lie in [0, 1]");
    return std::sqrt(alpha_bar) * x0 + std::sqrt(1.0 - alpha_bar) * rng.normal_vector(x0.size());
}

RealVector marginal_sample(const RealVector& x0, const NoiseSchedule& schedule, int t, Rng& rng) {
    require(t >= 1 && t <= schedule.T, "timestep out of range");
    return marginal_sample(x0, schedule.alpha_bar(t), rng);
}

RealVector ddpm_update(const RealVector& x, const RealVector& eps_hat, const RealVector& z, int t,
                       const NoiseSchedule& schedule) {
    require(t >= 1 && t <= schedule.T, "timestep out of range");
    const double a = schedule.alpha(t);
    const double ab = schedule.alpha_bar(t);
    const double beta = schedule.beta(t);
    return (x - (1.0 - a) / std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(a) + std::sqrt(beta) * z;
}

RealVector ddpm_step(const RealVector& x, int t, const NoiseSchedule& schedule, const GmmPrior& prior, Rng& rng) {
    const DenoiserEval ev(prior, schedule.alpha_bar(t), x);
    return ddpm_update(x, ev.predicted_noise(), rng.normal_vector(x.size()), t, schedule);
}

SamplerConfig SamplerConfig::uniform(int num_steps, const NoiseSchedule& schedule, double eta) {
    require(num_steps >= 1 && num_steps <= schedule.T, "step count must lie in [1, T]");
    require(eta >= 0.0, "eta must be nonnegative");
    SamplerConfig c;
    if (num_steps == 1) {
        c.timesteps = {schedule.T};
    } else {
        for (int i = 0; i < num_steps; ++i)
            c.timesteps.push_back(
                static_cast<int>(std::lround(1.0 + static_cast<double>(i) * (schedule.T - 1) / (num_steps - 1))));
    }
    for (int i = 0; i < num_steps; ++i) {
        const double ab = schedule.alpha_bar(c.timesteps[static_cast<std::size_t>(i)]);
        const double ab_prev = schedule.alpha_bar(c.previous(i));
        const double s2 = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev);
        c.sigmas.push_back(eta * std::sqrt(std::max(s2, 0.0)));
    }
    c.validate(schedule);
    return c;
}

SamplerConfig SamplerConfig::beta_noise(int num_steps, const NoiseSchedule& schedule) {
    SamplerConfig c = uniform(num_steps, schedule, 0.0);
    for (int i = 0; i < num_steps; ++i) {
        const double cap = 1.0 - schedule.alpha_bar(c.previous(i));
        c.sigmas[static_cast<std::size_t>(i)] = std::sqrt(std::min(schedule.beta(c.timesteps[i]), cap));
    }
    c.validate(schedule);
    return c;
}

void SamplerConfig::validate(const NoiseSchedule& schedule) const {
    require(!timesteps.empty(), "sampler needs at least one timestep");
    require(sigmas.size() == timesteps.size(), "one sigma per timestep required");
    for (std::size_t i = 0; i < timesteps.size(); ++i) {
        require(timesteps[i] >= 1 && timesteps[i] <= schedule.T, "timestep out of range");
        require(i == 0 || timesteps[i] > timesteps[i - 1], "timesteps must be strictly increasing");
        const double s = sigmas[i];
        require(s >= 0.0 && s * s <= 1.0 - schedule.alpha_bar(previous(static_cast<int>(i))),
                "sigma^2 exceeds 1 - alpha_bar of the target step");
    }
}

RealVector ddim_update(const RealVector& x_hat, const RealVector& eps_hat, const RealVector& z, double alpha_bar_prev,
                       double sigma) {
    const double radicand = 1.0 - alpha_bar_prev - sigma * sigma;
    require(sigma >= 0.0 && radicand >= 0.0, "sigma^2 exceeds 1 - alpha_bar of the target step");
    RealVector out = std::sqrt(alpha_bar_prev) * x_hat + std::sqrt(radicand) * eps_hat;
    if (sigma > 0.0) out += sigma * z;
    return out;
}

RealVector ddim_step(const RealVector& x, int i, const SamplerConfig& config, const NoiseSchedule& schedule,
                     const GmmPrior& prior, Rng& rng) {
    require(i >= 0 && i < config.steps(), "step index out of range");
    const DenoiserEval ev(prior, schedule.alpha_bar(config.timesteps[static_cast<std::size_t>(i)]), x);
    const double sigma = config.sigmas[static_cast<std::size_t>(i)];
    const RealVector z = sigma > 0.0 ? rng.normal_vector(x.size()) : RealVector::Zero(x.size());
    return ddim_update(ev.denoised(), ev.predicted_noise(), z, schedule.alpha_bar(config.previous(i)), sigma);
}

RealVector sample_ddpm(const GmmPrior& prior, const NoiseSchedule& schedule, Rng& rng) {
    RealVector x = rng.normal_vector(prior.dim());
    for (int t = schedule.T; t >= 1; --t) x = ddpm_step(x, t, schedule, prior, rng);
    return x;
}

RealVector sample_ddim(const GmmPrior& prior, const NoiseSchedule& schedule, const SamplerConfig& config, Rng& rng) {
    config.validate(schedule);
    RealVector x = rng.normal_vector(prior.dim());
    for (int i = config.steps() - 1; i >= 0; --i) x = ddim_step(x, i, config, schedule, prior, rng);
    return x;
}

}  // namespace ajscc
