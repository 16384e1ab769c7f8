// Recomputes the success threshold: four times the median source MSE of
// oracle-CSI MMSE decoding at 10 dB SNR under the default configuration.

#include <cstdio>

#include <CLI11.hpp>

#include "ajscc/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Success-threshold calibration"};
    int trials = 1000;
    std::uint64_t seed = 20240611;
    app.add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "master seed");
    CLI11_PARSE(app, argc, argv);

    ajscc::ExperimentConfig cfg = ajscc::default_config(ajscc::Scenario::Clean);
    cfg.method = ajscc::Method::Mmse;
    cfg.csi = ajscc::CsiSource::Oracle;
    cfg.channel.snr_db = 10.0;
    cfg.trials = trials;
    cfg.master_seed = seed;
    const auto cells = ajscc::sweep(cfg);
    std::vector<double> mse;
    for (const auto& t : cells.front().trials) mse.push_back(t.source_mse);
    const auto stats = ajscc::summarize(mse);
    std::printf("median oracle-CSI MMSE source MSE: %.6g over %zu trials\n", stats.median, stats.count);
    std::printf("threshold (4x median): %.6g\n", 4.0 * stats.median);
    return 0;
}
