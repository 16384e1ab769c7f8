#include "ajscc/ofdm_channel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "ajscc/fft.hpp"

namespace ajscc {

void OfdmConfig::validate(int num_taps) const {
    require(num_subcarriers > 0 && (num_subcarriers & (num_subcarriers - 1)) == 0,
            "num_subcarriers must be a positive power of two");
    require(cp_length >= 0, "cp_length must be nonnegative");
    require(cp_length >= num_taps - 1, "cp_length must be at least num_taps - 1");
    require(num_taps <= num_subcarriers, "num_taps must not exceed num_subcarriers");
    require(num_pilot_symbols >= 1, "num_pilot_symbols must be positive");
    require(num_data_symbols >= 1, "num_data_symbols must be positive");
    require(clipping_ratio > 0.0, "clipping_ratio must be positive");
    require(noise_variance >= 0.0 && std::isfinite(noise_variance), "noise_variance must be finite and nonnegative");
}

ChannelProfile build_profile(int num_taps, double decay) {
    require(num_taps >= 1, "num_taps must be positive");
    require(decay > 0.0 && std::isfinite(decay), "decay must be positive");
    RealVector p(num_taps);
    for (int l = 0; l < num_taps; ++l) p[l] = std::exp(-static_cast<double>(l) / decay);
    p /= p.sum();
    return {num_taps, decay, p};
}

ChannelTaps sample_taps(const ChannelProfile& profile, std::uint64_t seed) {
    Rng rng(seed);
    ComplexVector h(profile.num_taps);
    for (int l = 0; l < profile.num_taps; ++l) h[l] = rng.complex_normal(profile.tap_powers[l]);
    return {h};
}

FrequencyResponse frequency_response(const ChannelTaps& taps, int num_subcarriers) {
    const auto L = taps.taps.size();
    require(num_subcarriers >= 1, "num_subcarriers must be positive");
    require(L <= num_subcarriers, "more taps than subcarriers");
    ComplexVector padded = ComplexVector::Zero(num_subcarriers);
    padded.head(L) = taps.taps;
    // Plain DFT = sqrt(N) * unitary DFT.
    return {unitary_dft(padded) * std::sqrt(static_cast<double>(num_subcarriers)), false};
}

ChannelTaps taps_from_response(const FrequencyResponse& response, int num_taps) {
    const auto n = response.response.size();
    require(num_taps >= 1 && num_taps <= n, "num_taps out of range");
    ComplexVector h = unitary_idft(response.response) / std::sqrt(static_cast<double>(n));
    return {h.head(num_taps)};
}

ComplexVector clip_renormalize(const ComplexVector& signal, double clipping_ratio) {
    require(signal.size() > 0, "clip_renormalize needs a nonempty signal");
    require(clipping_ratio > 0.0, "clipping_ratio must be positive");
    if (std::isinf(clipping_ratio)) return signal;
    const double power_in = signal.squaredNorm() / static_cast<double>(signal.size());
    if (power_in == 0.0) return signal;

    const double limit = clipping_ratio * std::sqrt(power_in);
    ComplexVector out = signal;
    for (auto& s : out) {
        const double a = std::abs(s);
        if (a > limit) s *= limit / a;
    }
    const double power_out = out.squaredNorm() / static_cast<double>(out.size());
    if (power_out > 0.0) out *= std::sqrt(power_in / power_out);
    return out;
}

ComplexGrid make_pilots(int num_pilot_symbols, int num_subcarriers, std::uint64_t seed) {
    require(num_pilot_symbols >= 1 && num_subcarriers >= 1, "pilot grid dimensions must be positive");
    Rng rng(seed);
    ComplexGrid pilots(num_pilot_symbols, num_subcarriers);
    for (int i = 0; i < num_pilot_symbols; ++i) {
        for (int k = 0; k < num_subcarriers; ++k) {
            const auto q = static_cast<double>(rng.uniform_index(4));
            pilots(i, k) = std::polar(1.0, std::numbers::pi / 4.0 * (2.0 * q + 1.0));
        }
    }
    return pilots;
}

OfdmReception apply_channel(const OfdmFrame& frame, const ChannelTaps& taps, const OfdmConfig& config,
                            std::uint64_t seed) {
    const int N = config.num_subcarriers;
    const int L = static_cast<int>(taps.taps.size());
    config.validate(L);
    require(frame.pilots.cols() == N && frame.data.cols() == N, "frame grids must have N columns");
    require(frame.pilots.rows() >= 1 && frame.data.rows() >= 1, "frame needs pilot and data symbols");

    const int cp = config.cp_length;
    const int block = N + cp;
    const auto n_pilot = frame.pilots.rows();
    const auto n_sym = n_pilot + frame.data.rows();

    // Serialize pilots then data, each symbol with its cyclic prefix.
    std::vector<Complex> stream(static_cast<std::size_t>(n_sym * block));
    for (Eigen::Index j = 0; j < n_sym; ++j) {
        ComplexVector freq = j < n_pilot ? ComplexVector(frame.pilots.row(j).transpose())
                                         : ComplexVector(frame.data.row(j - n_pilot).transpose());
        ComplexVector time = clip_renormalize(unitary_idft(freq), config.clipping_ratio);
        Complex* dst = stream.data() + j * block;
        for (int n = 0; n < cp; ++n) dst[n] = time[N - cp + n];
        for (int n = 0; n < N; ++n) dst[cp + n] = time[n];
    }

    Rng rng(seed);
    std::vector<Complex> received(stream.size());
    for (std::size_t n = 0; n < stream.size(); ++n) {
        Complex acc{0.0, 0.0};
        for (int l = 0; l < L && static_cast<std::size_t>(l) <= n; ++l) acc += taps.taps[l] * stream[n - l];
        if (config.noise_variance > 0.0) acc += rng.complex_normal(config.noise_variance);
        received[n] = acc;
    }

    OfdmReception rx;
    rx.pilot_grid.resize(n_pilot, N);
    rx.data_grid.resize(frame.data.rows(), N);
    rx.pilot_ref = frame.pilots;
    for (Eigen::Index j = 0; j < n_sym; ++j) {
        ComplexVector time = Eigen::Map<const ComplexVector>(received.data() + j * block + cp, N);
        ComplexVector freq = unitary_dft(time);
        if (j < n_pilot)
            rx.pilot_grid.row(j) = freq.transpose();
        else
            rx.data_grid.row(j - n_pilot) = freq.transpose();
    }
    return rx;
}

FrequencyResponse estimate_channel_mmse(const OfdmReception& rx, double noise_variance) {
    const auto n_p = rx.pilot_grid.rows();
    require(n_p >= 1, "need at least one pilot symbol");
    require(rx.pilot_ref.rows() == n_p && rx.pilot_ref.cols() == rx.pilot_grid.cols(),
            "pilot reference does not match pilot grid");
    require(noise_variance >= 0.0, "noise_variance must be nonnegative");
    const auto N = rx.pilot_grid.cols();
    ComplexVector est(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        Complex acc{0.0, 0.0};
        for (Eigen::Index i = 0; i < n_p; ++i) acc += rx.pilot_grid(i, k) * std::conj(rx.pilot_ref(i, k));
        est[k] = acc / (static_cast<double>(n_p) + noise_variance);
    }
    return {est, true};
}

ComplexGrid equalize_mmse(const ComplexGrid& data_grid, const FrequencyResponse& estimate, double noise_variance) {
    require(estimate.response.size() == data_grid.cols(), "estimate length must match grid columns");
    require(noise_variance >= 0.0, "noise_variance must be nonnegative");
    ComplexGrid out(data_grid.rows(), data_grid.cols());
    for (Eigen::Index k = 0; k < data_grid.cols(); ++k) {
        const Complex h = estimate.response[k];
        const double denom = std::norm(h) + noise_variance;
        const Complex gain = denom > 0.0 ? std::conj(h) / denom : Complex{0.0, 0.0};
        out.col(k) = data_grid.col(k) * gain;
    }
    return out;
}

double snr_db_to_noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double response_nmse(const FrequencyResponse& estimate, const FrequencyResponse& truth) {
    require(estimate.response.size() == truth.response.size(), "response lengths differ");
    return (estimate.response - truth.response).squaredNorm() / truth.response.squaredNorm();
}

double taps_nmse(const ChannelTaps& estimate, const ChannelTaps& truth) {
    require(estimate.taps.size() == truth.taps.size(), "tap counts differ");
    return (estimate.taps - truth.taps).squaredNorm() / truth.taps.squaredNorm();
}

}  // namespace ajscc
