#include "ajscc/em_blind.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <numbers>
#include <ostream>

namespace ajscc {

std::vector<double> EmConfig::learning_rates() const {
    if (!lr_schedule.empty()) return lr_schedule;
    if (rounds == 1) return {lr_start};
    std::vector<double> rates;
    const double ratio = lr_end / lr_start;
    for (int r = 0; r < rounds; ++r) rates.push_back(lr_start * std::pow(ratio, static_cast<double>(r) / (rounds - 1)));
    return rates;
}

void EmConfig::validate() const {
    require(rounds >= 1, "em rounds must be positive");
    require(prior_weight >= 0.0, "prior_weight must be nonnegative");
    require(inner_steps >= 1, "inner_grad_steps must be positive");
    if (lr_schedule.empty()) {
        require(lr_start > 0.0 && lr_end > 0.0, "learning rates must be positive");
    } else {
        require(static_cast<int>(lr_schedule.size()) == rounds, "lr_schedule length must equal em rounds");
        for (double r : lr_schedule) require(r > 0.0, "learning rates must be positive");
    }
}

TapForwardModel::TapForwardModel(std::shared_ptr<const LinearCodec> codec, int num_subcarriers, int num_taps,
                                 int num_data_symbols)
    : codec_(std::move(codec)), N_(num_subcarriers), Ns_(num_data_symbols) {
    require(codec_ != nullptr, "tap model needs a codec");
    require(num_taps >= 1 && num_taps <= num_subcarriers, "num_taps out of range");
    const auto slots = codec_->grid_map(num_subcarriers, num_data_symbols);
    F_.resize(codec_->symbol_dim(), num_taps);
    for (int i = 0; i < codec_->symbol_dim(); ++i)
        for (int l = 0; l < num_taps; ++l)
            F_(i, l) = std::polar(1.0, -2.0 * std::numbers::pi * slots[static_cast<std::size_t>(i)].col * l /
                                           static_cast<double>(num_subcarriers));
}

ComplexVector TapForwardModel::response(const ComplexVector& taps) const {
    require(taps.size() == F_.cols(), "tap count mismatch");
    return F_ * taps;
}

ComplexMatrix TapForwardModel::design(const RealVector& x) const { return codec_->encode(x).asDiagonal() * F_; }

double recon_weight(ReconScaling scaling, double noise_variance) {
    if (scaling == ReconScaling::Raw || noise_variance <= 0.0) return 1.0;
    return 1.0 / noise_variance;
}

LossTerms total_loss(const TapForwardModel& model, const ComplexVector& taps, const RealVector& x,
                     const ComplexVector& observation, double prior_weight, double recon_weight) {
    require(observation.size() == model.fourier().rows(), "observation length mismatch");
    const ComplexVector r = observation - model.design(x) * taps;
    LossTerms l;
    l.recon = recon_weight * r.squaredNorm();
    l.prior = static_cast<double>(taps.size()) * taps.squaredNorm();
    l.total = l.recon + prior_weight * l.prior;
    return l;
}

ComplexVector loss_gradient(const TapForwardModel& model, const ComplexVector& taps, const RealVector& x,
                            const ComplexVector& observation, double prior_weight, double recon_weight) {
    require(observation.size() == model.fourier().rows(), "observation length mismatch");
    const ComplexMatrix A = model.design(x);
    const double L = static_cast<double>(taps.size());
    return 2.0 * (recon_weight * (A.adjoint() * (A * taps - observation)) + prior_weight * L * taps);
}

ComplexVector ridge_solution(const TapForwardModel& model, const RealVector& x, const ComplexVector& observation,
                             double prior_weight, double recon_weight) {
    const ComplexMatrix A = model.design(x);
    const auto L = A.cols();
    const ComplexMatrix G = recon_weight * (A.adjoint() * A) +
                            prior_weight * static_cast<double>(L) * ComplexMatrix::Identity(L, L);
    return G.ldlt().solve(recon_weight * (A.adjoint() * observation));
}

double lipschitz_bound(const ComplexMatrix& design, double prior_weight, double recon_weight) {
    const ComplexMatrix G = design.adjoint() * design;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(G, Eigen::EigenvaluesOnly);
    return 2.0 * (recon_weight * eig.eigenvalues().maxCoeff() + prior_weight * static_cast<double>(design.cols()));
}

namespace {

double tap_nmse(const ComplexVector& estimate, const std::optional<ComplexVector>& truth) {
    if (!truth) return std::numeric_limits<double>::quiet_NaN();
    return (estimate - *truth).squaredNorm() / truth->squaredNorm();
}

RealVector e_step(const EmProblem& p, const ComplexVector& taps, const GmmPrior& prior, const NoiseSchedule& schedule,
                  const GuidanceConfig& guidance, std::uint64_t seed) {
    const MeasurementOperator op(p.model->codec_ptr(), p.model->response(taps), p.noise_variance);
    return guided_reconstruct(op, prior, schedule, guidance, p.observation, seed).estimate;
}

}  // namespace

EmState em_run(const EmProblem& problem, const FrequencyResponse& contaminated, const GmmPrior& prior,
               const NoiseSchedule& schedule, const GuidanceConfig& guidance, const EmConfig& config,
               std::uint64_t seed) {
    config.validate();
    require(problem.model != nullptr, "em problem needs a tap model");
    const TapForwardModel& model = *problem.model;
    require(contaminated.response.size() == model.num_subcarriers(), "contaminated response length mismatch");
    const double lambda = config.prior_weight;
    const double wr = recon_weight(config.recon_scaling, problem.noise_variance);
    const std::vector<double> rates = config.learning_rates();
    const double rate_max = *std::max_element(rates.begin(), rates.end());

    EmState state;
    state.tap_estimate = taps_from_response(contaminated, model.num_taps()).taps;
    state.initial_taps = state.tap_estimate;
    ComplexVector& h = state.tap_estimate;

    for (int r = 0; r < config.rounds; ++r) {
        const RealVector x = e_step(problem, h, prior, schedule, guidance, stage_seed(seed, "e-step-" + std::to_string(r)));
        const ComplexMatrix A = model.design(x);
        const double step = (rates[static_cast<std::size_t>(r)] / rate_max) / lipschitz_bound(A, lambda, wr);

        EmRound round;
        round.round = r;
        round.learning_rate = rates[static_cast<std::size_t>(r)];
        round.before = total_loss(model, h, x, problem.observation, lambda, wr);
        if (r == 0) state.initial_loss = round.before;
        double previous = round.before.total;
        for (int k = 0; k < config.inner_steps; ++k) {
            const ComplexVector grad =
                2.0 * (wr * (A.adjoint() * (A * h - problem.observation)) + lambda * static_cast<double>(h.size()) * h);
            h -= step * grad;
            if (!h.allFinite()) throw DivergenceError("tap estimate became non-finite in round " + std::to_string(r));
            const double now = total_loss(model, h, x, problem.observation, lambda, wr).total;
            if (now > previous * (1.0 + 1e-12) + 1e-300) round.monotone = false;
            previous = now;
        }
        round.after = total_loss(model, h, x, problem.observation, lambda, wr);
        round.tap_nmse = tap_nmse(h, problem.true_taps);
        state.loss_trace.push_back(round);
    }
    state.reconstruction = e_step(problem, h, prior, schedule, guidance, stage_seed(seed, "e-step-final"));
    state.final_loss = total_loss(model, h, state.reconstruction, problem.observation, lambda, wr);
    return state;
}

void write_em_trace_csv(std::ostream& out, const std::vector<EmRound>& trace) {
    out << "round,L_recon,R_prior,L_total,tap_nmse\n";
    out.precision(17);
    for (const auto& r : trace)
        out << r.round << ',' << r.after.recon << ',' << r.after.prior << ',' << r.after.total << ',' << r.tap_nmse
            << '\n';
}

}  // namespace ajscc
