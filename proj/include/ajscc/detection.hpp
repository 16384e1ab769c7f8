#pragma once

// Jamming detection by pilot/data power difference with a two-sided
// alpha-sigma outlier rule, producing the subcarrier mask used by masked guidance.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "ajscc/common.hpp"
#include "ajscc/ofdm_channel.hpp"

namespace ajscc {

struct PowerDifference {
    RealVector pilot_power;  // mean_i |Yp[i,k]|^2
    RealVector data_power;   // mean_j |Y[j,k]|^2
    RealVector diff;         // data_power - pilot_power
};

struct DetectionReport {
    RealVector pilot_power;
    RealVector data_power;
    RealVector diff;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, N - 1 denominator
    double alpha = 2.0;
    std::vector<bool> flags;

    std::vector<int> flagged_indices() const;
};

// bits[k] = 0 exactly when subcarrier k is flagged.
struct Mask {
    RealVector bits;

    static Mask all_ones(int n) { return {RealVector::Ones(n)}; }
    int size() const { return static_cast<int>(bits.size()); }
};

PowerDifference power_difference(const OfdmReception& rx);

struct DetectionResult {
    DetectionReport report;
    Mask mask;
};

// flags[k] = |diff[k] - mean| > alpha * std. A zero std flags nothing.
DetectionResult detect_jammed(const RealVector& diff, double alpha = 2.0);

// Convenience: power_difference followed by detect_jammed, with the powers kept in the report.
DetectionResult detect_jammed(const OfdmReception& rx, double alpha = 2.0);

struct DetectionScores {
    double precision = 0.0;  // 1 when nothing is flagged
    double recall = 0.0;     // 1 when nothing is jammed
    double false_positive_rate = 0.0;
};

DetectionScores score_detection(const std::vector<bool>& flags, const std::vector<int>& jammed);

void to_json(nlohmann::json& j, const DetectionReport& report);

}  // namespace ajscc
