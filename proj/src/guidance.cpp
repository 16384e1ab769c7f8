#include "ajscc/guidance.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace ajscc {

MeasurementOperator::MeasurementOperator(std::shared_ptr<const LinearCodec> codec, ComplexVector csi,
                                         double noise_variance, std::optional<RealVector> mask)
    : codec_(std::move(codec)), csi_(std::move(csi)), noise_variance_(noise_variance), mask_(std::move(mask)) {
    require(codec_ != nullptr, "measurement operator needs a codec");
    require(csi_.size() == codec_->symbol_dim(), "CSI length must equal the codec symbol dimension");
    require(noise_variance_ >= 0.0, "noise variance must be nonnegative");
    if (mask_) require(mask_->size() == codec_->symbol_dim(), "mask length must equal the codec symbol dimension");
}

MeasurementOperator MeasurementOperator::from_response(std::shared_ptr<const LinearCodec> codec,
                                                       const FrequencyResponse& response, double noise_variance,
                                                       int num_data_symbols, const std::optional<Mask>& mask) {
    ComplexVector csi = codec->gather(response.response, num_data_symbols);
    std::optional<RealVector> m;
    if (mask) {
        require(mask->size() == response.response.size(), "mask length must equal the subcarrier count");
        m = codec->gather(mask->bits, num_data_symbols);
    }
    return MeasurementOperator(std::move(codec), std::move(csi), noise_variance, std::move(m));
}

ComplexVector MeasurementOperator::forward(const RealVector& x) const {
    ComplexVector y = csi_.cwiseProduct(codec_->encode(x));
    if (mask_) y = y.cwiseProduct(mask_->cast<Complex>());
    return y;
}

RealVector MeasurementOperator::pseudoinverse(const ComplexVector& observation, double regularizer) const {
    require(observation.size() == csi_.size(), "observation length mismatch");
    require(regularizer >= 0.0, "regularizer must be nonnegative");
    ComplexVector eq(csi_.size());
    for (Eigen::Index i = 0; i < csi_.size(); ++i) {
        const double den = std::norm(csi_[i]) + regularizer;
        eq[i] = den > 0.0 ? observation[i] * std::conj(csi_[i]) / den : Complex{0.0, 0.0};
    }
    if (mask_) eq = eq.cwiseProduct(mask_->cast<Complex>());
    return codec_->decode(eq);
}

RealVector MeasurementOperator::pseudoinverse(const ComplexVector& observation) const {
    return pseudoinverse(observation, noise_variance_);
}

MeasurementOperator MeasurementOperator::with_mask(const RealVector& mask) const {
    return MeasurementOperator(codec_, csi_, noise_variance_, mask);
}

MeasurementOperator MeasurementOperator::without_mask() const {
    return MeasurementOperator(codec_, csi_, noise_variance_, std::nullopt);
}

RealMatrix MeasurementOperator::real_matrix() const {
    const int n = codec_->source_dim();
    const int m = codec_->symbol_dim();
    RealMatrix A(2 * m, n);
    for (int j = 0; j < n; ++j) {
        const ComplexVector col = forward(RealVector::Unit(n, j));
        A.col(j).head(m) = col.real();
        A.col(j).tail(m) = col.imag();
    }
    return A;
}

ComplexVector observe(const LinearCodec& codec, const OfdmReception& rx) { return codec.from_grid(rx.data_grid); }

void GuidanceConfig::validate(const NoiseSchedule& schedule) const {
    sampler.validate(schedule);
    require(w >= 0.0 && w <= 1.0, "hybrid weight w must lie in [0, 1]");
    require(guidance_scale > 0.0, "guidance_scale must be positive");
    require(!effective_noise || *effective_noise >= 0.0, "effective noise must be nonnegative");
    require(divergence_factor > 0.0, "divergence factor must be positive");
}

GuidanceTerm pig_guidance(const MeasurementOperator& op, const DenoiserEval& eval, const ComplexVector& observation,
                          double regularizer) {
    const double r2 = guidance_r2(eval.alpha_bar());
    require(r2 > 0.0, "guidance needs alpha_bar < 1");
    const RealVector x_hat = eval.denoised();
    GuidanceTerm out;
    out.residual = op.pseudoinverse(observation, regularizer) - op.pseudoinverse(op.forward(x_hat), regularizer);
    out.g = eval.vjp(out.residual) / r2;
    return out;
}

double equalizer_regularizer(const MeasurementOperator& op, const GuidanceConfig& config, double alpha_bar) {
    if (config.weighting == EqualizerWeighting::Mmse) return op.noise_variance();
    const double eff = config.effective_noise
                           ? *config.effective_noise
                           : op.noise_variance() * op.codec().source_dim() / (2.0 * op.codec().symbol_dim());
    return eff / guidance_r2(alpha_bar);
}

GuidanceTerm pig_guidance(const MeasurementOperator& op, const GmmPrior& prior, const NoiseSchedule& schedule,
                          const RealVector& x_t, int t, const ComplexVector& observation, const GuidanceConfig& config) {
    const double ab = schedule.alpha_bar(t);
    require(ab > 0.0, "guidance needs alpha_bar > 0");
    const DenoiserEval eval(prior, ab, x_t);
    return pig_guidance(op, eval, observation, equalizer_regularizer(op, config, ab));
}

RealVector hybrid_guidance(const RealVector& g_masked, const RealVector& g, double w) {
    require(w >= 0.0 && w <= 1.0, "hybrid weight w must lie in [0, 1]");
    require(g_masked.size() == g.size(), "guidance dimension mismatch");
    if (w == 1.0) return g_masked;
    if (w == 0.0) return g;
    return w * g_masked + (1.0 - w) * g;
}

RealVector linear_operator_guidance(const RealMatrix& A, const RealVector& y, double sigma_y2, double r2,
                                    const DenoiserEval& eval) {
    require(A.rows() == y.size(), "observation length mismatch");
    const RealMatrix C = r2 * A * A.transpose() + sigma_y2 * RealMatrix::Identity(A.rows(), A.rows());
    const RealVector u = C.ldlt().solve(y - A * eval.denoised());
    return eval.vjp(A.transpose() * u);
}

double step_coefficient(const GuidanceConfig& config, double alpha_bar, double alpha_bar_prev, double sigma) {
    if (config.step_rule == StepRule::Unit) return 1.0;
    return std::sqrt(alpha_bar_prev / alpha_bar) -
           std::sqrt(std::max(1.0 - alpha_bar_prev - sigma * sigma, 0.0) / (1.0 - alpha_bar));
}

GuidedResult guided_reconstruct(const MeasurementOperator& op, const GmmPrior& prior, const NoiseSchedule& schedule,
                                const GuidanceConfig& config, const ComplexVector& observation, std::uint64_t seed) {
    config.validate(schedule);
    const int d = prior.dim();
    require(d == op.codec().source_dim(), "prior and codec dimensions differ");
    require(observation.size() == op.codec().symbol_dim(), "observation length mismatch");

    const MeasurementOperator plain = op.without_mask();
    const double radius = config.divergence_factor * std::sqrt(static_cast<double>(d));
    Rng rng(seed);
    RealVector x = rng.normal_vector(d);
    GuidedResult result;
    const int S = config.sampler.steps();
    for (int i = S - 1; i >= 0; --i) {
        const int t = config.sampler.timesteps[static_cast<std::size_t>(i)];
        const double ab = schedule.alpha_bar(t);
        const double ab_prev = schedule.alpha_bar(config.sampler.previous(i));
        const double sigma = config.sampler.sigmas[static_cast<std::size_t>(i)];
        const double r2 = guidance_r2(ab);
        const double reg = equalizer_regularizer(op, config, ab);

        const DenoiserEval eval(prior, ab, x);
        const GuidanceTerm g = pig_guidance(plain, eval, observation, reg);
        RealVector residual = g.residual;
        RealVector gw = g.g;
        if (op.has_mask() && config.w > 0.0) {
            const GuidanceTerm gm = pig_guidance(op, eval, observation, reg);
            gw = hybrid_guidance(gm.g, g.g, config.w);
            residual = hybrid_guidance(gm.residual, g.residual, config.w);
        }
        const RealVector step = (config.guidance_scale * step_coefficient(config, ab, ab_prev, sigma)) * (r2 * gw);

        const RealVector z = sigma > 0.0 ? rng.normal_vector(d) : RealVector::Zero(d);
        x = ddim_update(eval.denoised(), eval.predicted_noise(), z, ab_prev, sigma) + step;

        result.trace.push_back({S - i, t, residual.norm(), step.norm()});
        const double nx = x.norm();
        if (!std::isfinite(nx) || nx > radius) {
            std::ostringstream msg;
            msg << "guided sampler diverged at step " << (S - i) << " (t=" << t << "): |x|=" << nx
                << " exceeds " << radius;
            throw DivergenceError(msg.str());
        }
    }
    result.estimate = std::move(x);
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "step,t,residual_norm,guidance_norm\n";
    out.precision(17);
    for (const auto& r : trace) out << r.step << ',' << r.t << ',' << r.residual_norm << ',' << r.guidance_norm << '\n';
}

}  // namespace ajscc
