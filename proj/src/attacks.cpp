#include "ajscc/attacks.hpp"

#include <cmath>

namespace ajscc {

int jammed_count(double ratio, int num_subcarriers) {
    require(ratio > 0.0 && ratio < 1.0, "jamming ratio must lie in (0, 1)");
    return static_cast<int>(std::floor(ratio * num_subcarriers));
}

std::vector<int> jammed_set(int start, int count, int num_subcarriers) {
    require(count >= 0 && count <= num_subcarriers, "jammed count out of range");
    std::vector<int> set(static_cast<std::size_t>(count));
    const int base = ((start % num_subcarriers) + num_subcarriers) % num_subcarriers;
    for (int i = 0; i < count; ++i) set[static_cast<std::size_t>(i)] = (base + i) % num_subcarriers;
    return set;
}

double jr_to_power(double jr_db, double ratio, int num_subcarriers, const RealVector& data_powers) {
    const int count = jammed_count(ratio, num_subcarriers);
    require(count > 0, "jamming block is empty (floor(ratio * N) = 0)");
    const double total = data_powers.sum();
    require(total > 0.0, "data power must be positive");
    return std::pow(10.0, jr_db / 10.0) * total / count;
}

RealVector transmitted_data_power(const ComplexGrid& data) {
    return data.cwiseAbs2().colwise().mean().transpose();
}

JammingOutcome inject_jamming(const OfdmReception& rx, const JammingConfig& config, const RealVector& data_powers,
                              std::uint64_t seed) {
    const int N = rx.num_subcarriers();
    require(data_powers.size() == N, "data_powers must have one entry per subcarrier");
    JammingOutcome out{rx, {}, 0.0};
    const int count = jammed_count(config.ratio, N);
    if (count == 0) return out;

    Rng rng(seed);
    const int start = config.block_start ? *config.block_start : static_cast<int>(rng.uniform_index(N));
    out.jammed = jammed_set(start, count, N);
    out.jam_power = jr_to_power(config.jr_db, config.ratio, N, data_powers);
    for (Eigen::Index j = 0; j < out.rx.data_grid.rows(); ++j)
        for (int k : out.jammed) out.rx.data_grid(j, k) += rng.complex_normal(out.jam_power);
    return out;
}

ComplexGrid default_spoof_symbols(const ComplexGrid& pilot_ref, double power_ratio_db) {
    if (std::isinf(power_ratio_db) && power_ratio_db < 0) return ComplexGrid::Zero(pilot_ref.rows(), pilot_ref.cols());
    return pilot_ref * std::pow(10.0, power_ratio_db / 20.0);
}

OfdmReception inject_spoofing(const OfdmReception& rx, const ChannelTaps& adversary_taps,
                              const SpoofingConfig& config) {
    const int N = rx.num_subcarriers();
    const ComplexGrid spoof =
        config.spoof_symbols ? *config.spoof_symbols : default_spoof_symbols(rx.pilot_ref, config.power_ratio_db);
    require(spoof.rows() == rx.pilot_grid.rows() && spoof.cols() == rx.pilot_grid.cols(),
            "spoof symbols must match the pilot grid");
    const ComplexVector Ha = frequency_response(adversary_taps, N).response;
    OfdmReception out = rx;
    for (Eigen::Index i = 0; i < spoof.rows(); ++i)
        for (int k = 0; k < N; ++k) out.pilot_grid(i, k) += Ha[k] * spoof(i, k);
    return out;
}

}  // namespace ajscc
