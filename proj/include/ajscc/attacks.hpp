#pragma once

// Adversaries: contiguous-block subcarrier jamming on the data grid and
// aligned pilot spoofing on the pilot grid.

#include <cstdint>
#include <optional>
#include <vector>

#include "ajscc/common.hpp"
#include "ajscc/ofdm_channel.hpp"

namespace ajscc {

struct JammingConfig {
    double ratio = 0.2;   // fraction of subcarriers jammed, in (0, 1)
    double jr_db = 8.0;   // total-band jamming-to-signal ratio
    std::optional<int> block_start;  // nullopt: drawn uniformly per trial
};

struct SpoofingConfig {
    // Spoofed pilot power relative to the legitimate pilots; -inf disables.
    double power_ratio_db = 0.0;
    // Explicit spoof symbols; defaults to the legitimate pilots scaled by the power ratio.
    std::optional<ComplexGrid> spoof_symbols;
};

// |J| = floor(ratio * N).
int jammed_count(double ratio, int num_subcarriers);

// Contiguous block of `count` indices starting at `start`, wrapping mod N.
std::vector<int> jammed_set(int start, int count, int num_subcarriers);

// Per-subcarrier jamming power P_J = 10^{jr_db/10} * sum_k P_d[k] / |J|.
double jr_to_power(double jr_db, double ratio, int num_subcarriers, const RealVector& data_powers);

// P_d[k] = mean over data symbols of |X[j,k]|^2 for the transmitted grid.
RealVector transmitted_data_power(const ComplexGrid& data);

struct JammingOutcome {
    OfdmReception rx;
    std::vector<int> jammed;
    double jam_power = 0.0;
};

// Adds CN(0, P_J) to every data symbol on the jammed block; pilots stay clean.
// An empty block (floor(ratio N) = 0) returns the reception unchanged.
JammingOutcome inject_jamming(const OfdmReception& rx, const JammingConfig& config, const RealVector& data_powers,
                              std::uint64_t seed);

ComplexGrid default_spoof_symbols(const ComplexGrid& pilot_ref, double power_ratio_db);

// pilot_grid[i,k] += H_a[k] X_s[i,k]; the data grid is untouched.
OfdmReception inject_spoofing(const OfdmReception& rx, const ChannelTaps& adversary_taps,
                              const SpoofingConfig& config);

}  // namespace ajscc
