#pragma once

// Multipath Rayleigh fading over a cyclic-prefix OFDM link, with pilot-based
// MMSE channel estimation and MMSE equalization.

#include <cstdint>
#include <limits>
#include <optional>

#include "ajscc/common.hpp"

namespace ajscc {

// Exponential power delay profile sigma_l^2 = alpha * exp(-l / decay), normalized
// to unit total power.
struct ChannelProfile {
    int num_taps = 0;
    double decay = 0.0;
    RealVector tap_powers;
};

struct ChannelTaps {
    ComplexVector taps;
};

struct OfdmConfig {
    int num_subcarriers = 256;
    int cp_length = 10;
    int num_pilot_symbols = 1;
    int num_data_symbols = 1;
    // Infinite disables clipping.
    double clipping_ratio = std::numeric_limits<double>::infinity();
    // Per frequency-domain sample (equivalently per time sample, the DFT is unitary).
    double noise_variance = 0.1;

    // Throws ParameterError; the CP must cover the channel memory.
    void validate(int num_taps) const;
};

struct FrequencyResponse {
    ComplexVector response;
    bool is_estimate = false;
};

// Transmitted frequency-domain grids.
struct OfdmFrame {
    ComplexGrid pilots;  // N_p x N, unit modulus
    ComplexGrid data;    // N_s x N
};

struct OfdmReception {
    ComplexGrid pilot_grid;  // received pilots, N_p x N
    ComplexGrid data_grid;   // received data, N_s x N
    ComplexGrid pilot_ref;   // known pilots X_p; never modified after transmission
    std::optional<ComplexGrid> equalized;

    int num_subcarriers() const { return static_cast<int>(data_grid.cols()); }
};

ChannelProfile build_profile(int num_taps, double decay);

ChannelTaps sample_taps(const ChannelProfile& profile, std::uint64_t seed);

// H[k] = sum_l h_l e^{-i 2 pi k l / N} (plain DFT of the zero-padded taps).
FrequencyResponse frequency_response(const ChannelTaps& taps, int num_subcarriers);

// Inverse of frequency_response truncated to the first num_taps delays.
ChannelTaps taps_from_response(const FrequencyResponse& response, int num_taps);

// Amplitude clipping at clipping_ratio * RMS with phase preserved, then
// rescaled to the input mean power. Zero-power input is returned unchanged.
ComplexVector clip_renormalize(const ComplexVector& signal, double clipping_ratio);

// Unit-modulus QPSK pilots, one full OFDM symbol per pilot row.
ComplexGrid make_pilots(int num_pilot_symbols, int num_subcarriers, std::uint64_t seed);

// Time-domain link: IDFT, clip, CP insertion, tap convolution over the
// serialized frame, AWGN, CP removal, DFT.
OfdmReception apply_channel(const OfdmFrame& frame, const ChannelTaps& taps, const OfdmConfig& config,
                            std::uint64_t seed);

// Per-subcarrier MMSE estimate H^[k] = sum_i Yp[i,k] Xp*[i,k] / (N_p + sigma^2).
FrequencyResponse estimate_channel_mmse(const OfdmReception& rx, double noise_variance);

// Y[j,k] H^*[k] / (|H^[k]|^2 + sigma^2). A bin with sigma^2 = 0 and H^[k] = 0
// equalizes to zero.
ComplexGrid equalize_mmse(const ComplexGrid& data_grid, const FrequencyResponse& estimate, double noise_variance);

double snr_db_to_noise_variance(double snr_db);

double response_nmse(const FrequencyResponse& estimate, const FrequencyResponse& truth);
double taps_nmse(const ChannelTaps& estimate, const ChannelTaps& truth);

}  // namespace ajscc
