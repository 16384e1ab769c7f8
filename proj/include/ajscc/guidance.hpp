#pragma once

// Pseudoinverse-guided DDIM sampling through the codec + OFDM measurement
// chain, with masked and hybrid guidance for jammed subcarriers.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "ajscc/codec.hpp"
#include "ajscc/common.hpp"
#include "ajscc/detection.hpp"
#include "ajscc/diffusion.hpp"
#include "ajscc/ofdm_channel.hpp"

namespace ajscc {

// Observation space: the m received frequency-domain samples at the codec's slots.
// forward(x)      = M . H . encode(x)
// pseudoinverse(y) = decode(M . y . H^* / (|H|^2 + reg))
// With reg = 0 the equalizer is zero-forcing (zero where H = 0), which makes the
// unmasked chain a generalized pseudoinverse of forward.
class MeasurementOperator {
public:
    MeasurementOperator(std::shared_ptr<const LinearCodec> codec, ComplexVector csi, double noise_variance,
                        std::optional<RealVector> mask = std::nullopt);

    // Gathers the CSI at the codec slots of an N-subcarrier response.
    static MeasurementOperator from_response(std::shared_ptr<const LinearCodec> codec,
                                             const FrequencyResponse& response, double noise_variance,
                                             int num_data_symbols = 1, const std::optional<Mask>& mask = std::nullopt);

    ComplexVector forward(const RealVector& x) const;
    RealVector pseudoinverse(const ComplexVector& observation, double regularizer) const;
    // Literal MMSE path: regularizer = noise_variance.
    RealVector pseudoinverse(const ComplexVector& observation) const;

    MeasurementOperator with_mask(const RealVector& mask) const;
    MeasurementOperator without_mask() const;

    bool has_mask() const { return mask_.has_value(); }
    const RealVector& mask() const { return *mask_; }
    const ComplexVector& csi() const { return csi_; }
    const LinearCodec& codec() const { return *codec_; }
    std::shared_ptr<const LinearCodec> codec_ptr() const { return codec_; }
    double noise_variance() const { return noise_variance_; }

    // 2m x n real matrix of forward, rows stacked as [Re; Im].
    RealMatrix real_matrix() const;

private:
    std::shared_ptr<const LinearCodec> codec_;
    ComplexVector csi_;
    double noise_variance_;
    std::optional<RealVector> mask_;
};

// The received samples at the codec slots of the data grid.
ComplexVector observe(const LinearCodec& codec, const OfdmReception& rx);

enum class EqualizerWeighting {
    // reg_t = sigma_eff^2 / r_t^2: the equalizer tracks the shrinking uncertainty of x_hat.
    NoiseAware,
    // reg = sigma^2 at every step.
    Mmse,
};

enum class StepRule {
    // Net step r_t^2 g: the r_t^{-2} inside g cancels.
    Unit,
    // Net step c_t r_t^2 g with c_t = sqrt(ab'/ab) - sqrt((1 - ab' - sigma^2)/(1 - ab)),
    // the sensitivity of the DDIM update to its predicted-x0 input per unit of x_t.
    DdimConsistent,
};

struct GuidanceConfig {
    SamplerConfig sampler;
    double w = 0.3;  // hybrid weight on the masked term
    double guidance_scale = 1.0;
    EqualizerWeighting weighting = EqualizerWeighting::NoiseAware;
    StepRule step_rule = StepRule::DdimConsistent;
    // sigma_eff^2 for NoiseAware; defaults to sigma^2 n / (2m), the observation noise
    // per real source coordinate after decoding.
    std::optional<double> effective_noise;
    double divergence_factor = 1e3;  // abort when |x_t| > factor sqrt(d)

    void validate(const NoiseSchedule& schedule) const;
};

// r_t^2 = 1 - ab_t.
inline double guidance_r2(double alpha_bar) { return 1.0 - alpha_bar; }

struct GuidanceTerm {
    RealVector residual;  // pinv(y) - pinv(forward(x_hat))
    RealVector g;         // r_t^{-2} J^T residual
};

GuidanceTerm pig_guidance(const MeasurementOperator& op, const DenoiserEval& eval, const ComplexVector& observation,
                          double regularizer);
GuidanceTerm pig_guidance(const MeasurementOperator& op, const GmmPrior& prior, const NoiseSchedule& schedule,
                          const RealVector& x_t, int t, const ComplexVector& observation, const GuidanceConfig& config);

// g_w = w g_m + (1 - w) g.
RealVector hybrid_guidance(const RealVector& g_masked, const RealVector& g, double w);

// Covariance-solve guidance for an explicit real operator A with noise variance
// sigma_y^2 per observation coordinate:
//   g = J^T A^T (r^2 A A^T + sigma_y^2 I)^{-1} (y - A x_hat).
RealVector linear_operator_guidance(const RealMatrix& A, const RealVector& y, double sigma_y2, double r2,
                                    const DenoiserEval& eval);

// Regularizer used by the equalizer at a given alpha_bar.
double equalizer_regularizer(const MeasurementOperator& op, const GuidanceConfig& config, double alpha_bar);
double step_coefficient(const GuidanceConfig& config, double alpha_bar, double alpha_bar_prev, double sigma);

struct TraceRow {
    int step = 0;
    int t = 0;
    double residual_norm = 0.0;
    double guidance_norm = 0.0;
};

struct GuidedResult {
    RealVector estimate;
    std::vector<TraceRow> trace;
};

// Guided DDIM from x_T ~ N(0, I). When op carries a mask, the masked operator
// supplies g_m and the unmasked one g; otherwise g_m = g. Throws DivergenceError
// when the state turns non-finite or leaves the divergence radius.
GuidedResult guided_reconstruct(const MeasurementOperator& op, const GmmPrior& prior, const NoiseSchedule& schedule,
                                const GuidanceConfig& config, const ComplexVector& observation, std::uint64_t seed);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace ajscc
