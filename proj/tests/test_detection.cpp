#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ajscc/attacks.hpp"
#include "ajscc/detection.hpp"

using namespace ajscc;

namespace {

RealVector vec(std::initializer_list<double> v) {
    RealVector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("single spike example") {
    const auto r = detect_jammed(vec({10, 0, 0, 0, 0, 0, 0, 0, 0, 0}), 2.0);
    CHECK(r.report.mean == doctest::Approx(1.0).epsilon(1e-15));
    // sum of squared deviations 81 + 9 = 90, over N - 1 = 9.
    CHECK(r.report.std == doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));
    CHECK(r.report.std == doctest::Approx(3.1623).epsilon(1e-4));
    CHECK(r.report.flagged_indices() == std::vector<int>{0});
    CHECK(r.mask.bits[0] == 0.0);
    for (int k = 1; k < 10; ++k) CHECK(r.mask.bits[k] == 1.0);
}

TEST_CASE("a constant difference flags nothing") {
    const auto r = detect_jammed(RealVector::Constant(16, 3.5), 2.0);
    CHECK(r.report.std == 0.0);
    CHECK(r.report.flagged_indices().empty());
    CHECK(r.mask.bits == RealVector::Ones(16));
}

TEST_CASE("symmetric spike pair") {
    // [c, -c, 0 x 8]: mean 0, std = sqrt(2 c^2 / 9) = 0.4714 c, threshold 0.9428 c < c.
    for (double c : {1.0, 7.0, 1e3}) {
        const auto r = detect_jammed(vec({c, -c, 0, 0, 0, 0, 0, 0, 0, 0}), 2.0);
        CHECK(r.report.mean == doctest::Approx(0.0));
        CHECK(r.report.std == doctest::Approx(c * std::sqrt(2.0 / 9.0)).epsilon(1e-13));
        CHECK(r.report.flagged_indices() == std::vector<int>{0, 1});
    }
    // Two spikes in a five-element vector: std = c sqrt(2/4) = 0.707 c, threshold 1.414 c > c.
    const auto r5 = detect_jammed(vec({4, -4, 0, 0, 0}), 2.0);
    CHECK(2.0 * r5.report.std > 4.0);
    CHECK(r5.report.flagged_indices().empty());
}

TEST_CASE("power_difference examples") {
    Rng rng(1);
    OfdmReception rx;
    rx.pilot_ref = make_pilots(1, 32, 2);
    rx.pilot_grid.resize(1, 32);
    for (int k = 0; k < 32; ++k) rx.pilot_grid(0, k) = rng.complex_normal(1.0);
    rx.data_grid = rx.pilot_grid;
    const auto p = power_difference(rx);
    CHECK(p.diff == RealVector::Zero(32));

    OfdmConfig cfg;
    cfg.num_subcarriers = 64;
    cfg.cp_length = 8;
    cfg.noise_variance = 0.0;
    const auto taps = sample_taps(build_profile(8, 4.0), 3);
    const auto clean = apply_channel({make_pilots(1, 64, 4), make_pilots(3, 64, 5)}, taps, cfg, 6);
    const auto pc = power_difference(clean);
    const auto H = frequency_response(taps, 64).response;
    CHECK(pc.diff.cwiseAbs().maxCoeff() < 1e-10);
    for (int k = 0; k < 64; ++k) CHECK(pc.pilot_power[k] == doctest::Approx(std::norm(H[k])).epsilon(1e-9));
    CHECK((pc.diff - (pc.data_power - pc.pilot_power)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one jammed column raises the expected difference by P_J") {
    OfdmReception base;
    base.pilot_ref = make_pilots(1, 16, 1);
    base.pilot_grid = base.pilot_ref;
    base.data_grid = make_pilots(1, 16, 2);
    const int trials = 20000;
    RealVector mean_diff = RealVector::Zero(16);
    for (int t = 0; t < trials; ++t) {
        Rng rng(static_cast<std::uint64_t>(t) + 100);
        OfdmReception rx = base;
        rx.data_grid(0, 5) += rng.complex_normal(10.0);
        mean_diff += power_difference(rx).diff;
    }
    mean_diff /= trials;
    CHECK(std::abs(mean_diff[5] / 10.0 - 1.0) < 0.05);
    for (int k = 0; k < 16; ++k)
        if (k != 5) CHECK(std::abs(mean_diff[k]) < 1e-12);
}

TEST_CASE("flags are invariant to a common scaling of both grids") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        OfdmReception rx;
        rx.pilot_ref = make_pilots(1, 64, 8);
        rx.pilot_grid.resize(1, 64);
        rx.data_grid.resize(2, 64);
        for (int k = 0; k < 64; ++k) rx.pilot_grid(0, k) = rng.complex_normal(1.0);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 64; ++k) rx.data_grid(j, k) = rng.complex_normal(k < 8 ? 10.0 : 1.0);
        const auto base = detect_jammed(rx, 2.0).report.flags;
        // Powers of two keep every product exact, so the comparison cannot sit on a rounding edge.
        for (double s : {0.25, 2.0, 8.0}) {
            OfdmReception scaled = rx;
            scaled.pilot_grid *= s;
            scaled.data_grid *= s;
            CHECK(detect_jammed(scaled, 2.0).report.flags == base);
        }
    }
}

TEST_CASE("false-positive rate without attack stays below 0.1") {
    OfdmConfig cfg;
    cfg.noise_variance = 0.1;
    const auto profile = build_profile(8, 4.0);
    double fpr = 0.0;
    for (int t = 0; t < 100; ++t) {
        Rng rng(static_cast<std::uint64_t>(t));
        ComplexGrid data(1, 256);
        for (int k = 0; k < 256; ++k) data(0, k) = rng.complex_normal(1.0);
        const auto rx = apply_channel({make_pilots(1, 256, rng.engine()()), data},
                                      sample_taps(profile, rng.engine()()), cfg, rng.engine()());
        fpr += score_detection(detect_jammed(rx, 2.0).report.flags, {}).false_positive_rate;
    }
    CHECK(fpr / 100.0 <= 0.1);
}

TEST_CASE("score_detection conventions") {
    std::vector<bool> flags(8, false);
    auto s = score_detection(flags, {});
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.false_positive_rate == 0.0);
    flags[1] = flags[2] = flags[6] = true;
    s = score_detection(flags, {1, 2, 3, 4});
    CHECK(s.precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.false_positive_rate == doctest::Approx(0.25));
    CHECK_THROWS_AS(score_detection(flags, {9}), ParameterError);
}

TEST_CASE("report serializes to JSON") {
    const auto r = detect_jammed(vec({10, 0, 0, 0, 0, 0, 0, 0, 0, 0}), 2.0);
    nlohmann::json j;
    to_json(j, r.report);
    CHECK(j["mean"].get<double>() == doctest::Approx(1.0));
    CHECK(j["std"].get<double>() == doctest::Approx(std::sqrt(10.0)));
    CHECK(j["flagged"] == nlohmann::json::array({0}));
    CHECK(j["alpha"].get<double>() == 2.0);
    CHECK(j.contains("diff"));
}
