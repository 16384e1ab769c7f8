#include "ajscc/detection.hpp"

#include <cmath>


namespace ajscc {

std::vector<int> DetectionReport::flagged_indices() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < flags.size(); ++k)
        if (flags[k]) out.push_back(static_cast<int>(k));
    return out;
}

PowerDifference power_difference(const OfdmReception& rx) {
    require(rx.pilot_grid.rows() >= 1 && rx.data_grid.rows() >= 1, "need at least one pilot and one data symbol");
    require(rx.pilot_grid.cols() == rx.data_grid.cols(), "pilot and data grids differ in width");
    PowerDifference p;
    p.pilot_power = rx.pilot_grid.cwiseAbs2().colwise().mean().transpose();
    p.data_power = rx.data_grid.cwiseAbs2().colwise().mean().transpose();
    p.diff = p.data_power - p.pilot_power;
    return p;
}

DetectionResult detect_jammed(const RealVector& diff, double alpha) {
    const auto n = diff.size();
    require(n >= 2, "detection needs at least two subcarriers");
    require(alpha > 0.0, "alpha must be positive");
    DetectionResult out;
    auto& r = out.report;
    r.diff = diff;
    r.alpha = alpha;
    r.mean = diff.mean();
    r.std = std::sqrt((diff.array() - r.mean).square().sum() / static_cast<double>(n - 1));
    r.flags.assign(static_cast<std::size_t>(n), false);
    out.mask = Mask::all_ones(static_cast<int>(n));
    if (r.std == 0.0) return out;
    const double threshold = alpha * r.std;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::abs(diff[k] - r.mean) > threshold) {
            r.flags[static_cast<std::size_t>(k)] = true;
            out.mask.bits[k] = 0.0;
        }
    }
    return out;
}

DetectionResult detect_jammed(const OfdmReception& rx, double alpha) {
    PowerDifference p = power_difference(rx);
    DetectionResult out = detect_jammed(p.diff, alpha);
    out.report.pilot_power = std::move(p.pilot_power);
    out.report.data_power = std::move(p.data_power);
    return out;
}

DetectionScores score_detection(const std::vector<bool>& flags, const std::vector<int>& jammed) {
    std::vector<bool> truth(flags.size(), false);
    for (int k : jammed) {
        require(k >= 0 && static_cast<std::size_t>(k) < flags.size(), "jammed index out of range");
        truth[static_cast<std::size_t>(k)] = true;
    }
    double tp = 0, fp = 0, negatives = 0;
    for (std::size_t k = 0; k < flags.size(); ++k) {
        if (flags[k] && truth[k]) ++tp;
        if (flags[k] && !truth[k]) ++fp;
        if (!truth[k]) ++negatives;
    }
    DetectionScores s;
    s.precision = (tp + fp) > 0 ? tp / (tp + fp) : 1.0;
    s.recall = jammed.empty() ? 1.0 : tp / static_cast<double>(jammed.size());
    s.false_positive_rate = negatives > 0 ? fp / negatives : 0.0;
    return s;
}

void to_json(nlohmann::json& j, const DetectionReport& report) {
    auto vec = [](const RealVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    j = nlohmann::json{{"pilot_power", vec(report.pilot_power)},
                       {"data_power", vec(report.data_power)},
                       {"diff", vec(report.diff)},
                       {"mean", report.mean},
                       {"std", report.std},
                       {"alpha", report.alpha},
                       {"flagged", report.flagged_indices()}};
}

}  // namespace ajscc
