#pragma once

// Independent reference computations used as test oracles. Written directly
// from the defining formulas, sharing no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "ajscc/diffusion.hpp"

namespace oracle {

using cd = std::complex<double>;

// H[k] = sum_l h_l exp(-i 2 pi k l / N), summed term by term.
inline Eigen::VectorXcd direct_dft(const Eigen::VectorXcd& h, int N) {
    Eigen::VectorXcd H = Eigen::VectorXcd::Zero(N);
    for (int k = 0; k < N; ++k)
        for (Eigen::Index l = 0; l < h.size(); ++l)
            H[k] += h[l] * std::exp(cd(0.0, -2.0 * std::numbers::pi * static_cast<double>(k * l) / N));
    return H;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

// Random mixture with well-conditioned SPD covariances, for derivative checks.
inline ajscc::GmmPrior random_gmm(int dim, int components, std::uint64_t seed) {
    ajscc::Rng rng(seed);
    std::vector<double> w;
    std::vector<Eigen::VectorXd> mu;
    std::vector<Eigen::MatrixXd> cov;
    double total = 0.0;
    for (int k = 0; k < components; ++k) {
        w.push_back(0.5 + rng.uniform());
        total += w.back();
        mu.push_back(1.5 * rng.normal_vector(dim));
        Eigen::MatrixXd B(dim, dim);
        for (int i = 0; i < dim; ++i) B.col(i) = rng.normal_vector(dim);
        cov.push_back(0.3 * B * B.transpose() / dim + 0.2 * Eigen::MatrixXd::Identity(dim, dim));
    }
    for (auto& x : w) x /= total;
    // Renormalize so the weights sum to one within rounding.
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < w.size(); ++k) s += w[k];
    w.back() = 1.0 - s;
    return ajscc::GmmPrior(w, mu, cov);
}

// Gaussian conditional mean E[x0 | xt] for x0 ~ N(mu, S), xt = sqrt(ab) x0 + sqrt(1 - ab) eps.
inline Eigen::VectorXd gaussian_posterior_mean(const Eigen::VectorXd& mu, const Eigen::MatrixXd& S, double ab,
                                               const Eigen::VectorXd& xt) {
    const auto d = mu.size();
    const Eigen::MatrixXd C = ab * S + (1.0 - ab) * Eigen::MatrixXd::Identity(d, d);
    return mu + std::sqrt(ab) * S * C.ldlt().solve(xt - std::sqrt(ab) * mu);
}

// Direct mixture log-density, component by component through an LLT factor.
inline double mixture_log_density(const ajscc::GmmPrior& prior, double ab, const Eigen::VectorXd& x) {
    const auto d = x.size();
    double total = 0.0;
    for (int k = 0; k < prior.num_components(); ++k) {
        const Eigen::MatrixXd C = ab * prior.covariance(k) + (1.0 - ab) * Eigen::MatrixXd::Identity(d, d);
        const Eigen::LLT<Eigen::MatrixXd> llt(C);
        const Eigen::VectorXd r = x - std::sqrt(ab) * prior.mean(k);
        const Eigen::VectorXd z = llt.matrixL().solve(r);
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        total += prior.weights()[static_cast<std::size_t>(k)] *
                 std::exp(-0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * d * std::log(2.0 * std::numbers::pi));
    }
    return std::log(total);
}

}  // namespace oracle
