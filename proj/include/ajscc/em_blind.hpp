#pragma once

// Blind channel recovery under pilot spoofing: alternate a guided reconstruction
// of the source (E-step) with gradient refinement of the channel taps (M-step).

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "ajscc/codec.hpp"
#include "ajscc/diffusion.hpp"
#include "ajscc/guidance.hpp"
#include "ajscc/ofdm_channel.hpp"

namespace ajscc {

enum class ReconScaling {
    // L_recon = |y - H(E(x))|^2 / sigma^2 (sigma^2 = 0 falls back to unit weight).
    NoiseNormalized,
    // L_recon = |y - H(E(x))|^2.
    Raw,
};

struct EmConfig {
    int rounds = 5;
    double prior_weight = 12.0;
    // Relative rates per round; the largest maps to a step of 1 / Lipschitz.
    // Empty means geometric from lr_start to lr_end over the rounds.
    std::vector<double> lr_schedule;
    double lr_start = 100.0;
    double lr_end = 1.0;
    int inner_steps = 20;
    ReconScaling recon_scaling = ReconScaling::NoiseNormalized;

    std::vector<double> learning_rates() const;
    void validate() const;
};

// Maps taps to the channel at the codec slots: H = F h with F[i,l] = e^{-i 2 pi k_i l / N}.
class TapForwardModel {
public:
    TapForwardModel(std::shared_ptr<const LinearCodec> codec, int num_subcarriers, int num_taps,
                    int num_data_symbols = 1);

    int num_taps() const { return static_cast<int>(F_.cols()); }
    int num_subcarriers() const { return N_; }
    const ComplexMatrix& fourier() const { return F_; }
    const LinearCodec& codec() const { return *codec_; }
    std::shared_ptr<const LinearCodec> codec_ptr() const { return codec_; }
    int num_data_symbols() const { return Ns_; }

    ComplexVector response(const ComplexVector& taps) const;
    // A = diag(encode(x)) F, so the noiseless observation is A h.
    ComplexMatrix design(const RealVector& x) const;

private:
    std::shared_ptr<const LinearCodec> codec_;
    int N_;
    int Ns_;
    ComplexMatrix F_;
};

struct LossTerms {
    double recon = 0.0;
    double prior = 0.0;  // L * sum |h_l|^2
    double total = 0.0;  // recon + lambda_2 * prior
};

double recon_weight(ReconScaling scaling, double noise_variance);

LossTerms total_loss(const TapForwardModel& model, const ComplexVector& taps, const RealVector& x,
                     const ComplexVector& observation, double prior_weight, double recon_weight = 1.0);

// Real-composite gradient: Re = dL/dRe(h), Im = dL/dIm(h).
// 2 (w A^H (A h - y) + lambda_2 L h).
ComplexVector loss_gradient(const TapForwardModel& model, const ComplexVector& taps, const RealVector& x,
                            const ComplexVector& observation, double prior_weight, double recon_weight = 1.0);

// Minimizer of the quadratic M-step objective for a fixed x.
ComplexVector ridge_solution(const TapForwardModel& model, const RealVector& x, const ComplexVector& observation,
                             double prior_weight, double recon_weight = 1.0);

// Lipschitz constant of the real-composite gradient: 2 (w lambda_max(A^H A) + lambda_2 L).
double lipschitz_bound(const ComplexMatrix& design, double prior_weight, double recon_weight = 1.0);

struct EmRound {
    int round = 0;
    double learning_rate = 0.0;
    LossTerms before;  // at the round's E-step output, before the M-step
    LossTerms after;
    double tap_nmse = std::numeric_limits<double>::quiet_NaN();  // NaN without ground truth
    bool monotone = true;  // L_total non-increasing across every inner step
};

struct EmState {
    ComplexVector tap_estimate;
    std::vector<EmRound> loss_trace;
    RealVector reconstruction;
    ComplexVector initial_taps;
    LossTerms initial_loss;  // first E-step output with the initial taps
    LossTerms final_loss;    // final E-step output with the final taps
};

struct EmProblem {
    std::shared_ptr<const TapForwardModel> model;
    ComplexVector observation;  // received samples at the codec slots
    double noise_variance = 0.0;
    std::optional<ComplexVector> true_taps;  // only for trace diagnostics
};

// Initial taps: inverse DFT of the contaminated response truncated to L taps.
// Each E-step restarts from fresh noise; a final E-step after the last M-step
// yields the returned reconstruction. Throws DivergenceError from the sampler or
// when the taps turn non-finite.
EmState em_run(const EmProblem& problem, const FrequencyResponse& contaminated, const GmmPrior& prior,
               const NoiseSchedule& schedule, const GuidanceConfig& guidance, const EmConfig& config,
               std::uint64_t seed);

void write_em_trace_csv(std::ostream& out, const std::vector<EmRound>& trace);

}  // namespace ajscc
