// Command-line front end: simulate, detect, decode, em, sweep.
// Exit codes: 0 success, 1 configuration error, 2 divergence in every trial, 3 IO error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ajscc/detection.hpp"
#include "ajscc/guidance.hpp"
#include "ajscc/harness.hpp"
#include "ajscc/sdif.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIo = 3;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string out_dir;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "experiment config (JSON)");
    cmd->add_option("--seed", o.seed, "master seed override");
    cmd->add_option("--trials", o.trials, "trial count override")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_flag("--quiet", o.quiet, "suppress console output");
}

ajscc::ExperimentConfig resolve(const CommonOptions& o, ajscc::Scenario fallback) {
    ajscc::ExperimentConfig cfg =
        o.config_path.empty() ? ajscc::default_config(fallback) : ajscc::load_config(o.config_path);
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.trials) cfg.trials = *o.trials;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw ajscc::IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path);
    if (!out) throw ajscc::IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw ajscc::IoError("write failed: " + path.string());
}

json trial_json(const ajscc::TrialResult& r) {
    return {{"trial", r.trial},
            {"seed", r.seed},
            {"source_mse", r.source_mse},
            {"psnr_db", r.psnr_db},
            {"channel_nmse", r.channel_nmse},
            {"det_precision", r.det_precision},
            {"det_recall", r.det_recall},
            {"contaminated_tap_nmse", r.contaminated_tap_nmse},
            {"final_tap_nmse", r.final_tap_nmse},
            {"success", r.success},
            {"diverged", r.diverged},
            {"diagnostic", r.diagnostic}};
}

std::string vector_csv(const ajscc::RealVector& truth, const ajscc::RealVector& estimate) {
    std::string s = "index,source,estimate\n";
    char buf[96];
    for (Eigen::Index i = 0; i < estimate.size(); ++i) {
        const double t = truth.size() == estimate.size() ? truth[i] : std::numeric_limits<double>::quiet_NaN();
        std::snprintf(buf, sizeof buf, "%ld,%.12g,%.12g\n", static_cast<long>(i), t, estimate[i]);
        s += buf;
    }
    return s;
}

int all_diverged_code(const std::vector<ajscc::CellResult>& cells) {
    std::size_t total = 0, diverged = 0;
    for (const auto& c : cells)
        for (const auto& t : c.trials) {
            ++total;
            diverged += t.diverged ? 1 : 0;
        }
    return total > 0 && diverged == total ? kExitDiverged : kExitOk;
}

int run_simulate(const CommonOptions& o, int trial, const std::string& save_reception) {
    const auto cfg = resolve(o, ajscc::Scenario::Jamming);
    const ajscc::TrialContext ctx(cfg);
    ajscc::TrialArtifacts art;
    const auto r = ajscc::run_trial(ctx, trial, &art);
    if (!o.quiet) {
        std::cout << trial_json(r).dump(2) << '\n';
        for (const auto& row : art.trace)
            std::printf("step %3d  t=%4d  residual=%.6g  guidance=%.6g\n", row.step, row.t, row.residual_norm,
                        row.guidance_norm);
    }
    if (!save_reception.empty()) ajscc::save_reception(save_reception, art.reception);
    if (!o.out_dir.empty()) {
        const fs::path dir(o.out_dir);
        write_text(dir / "trial.json", trial_json(r).dump(2) + "\n");
        std::ostringstream trace;
        ajscc::write_trace_csv(trace, art.trace);
        write_text(dir / "trace.csv", trace.str());
        write_text(dir / "estimate.csv", vector_csv(art.source, art.estimate));
        if (art.em) {
            std::ostringstream em;
            ajscc::write_em_trace_csv(em, art.em->loss_trace);
            write_text(dir / "em_trace.csv", em.str());
        }
        write_text(dir / "config.json", ajscc::resolved_config_json(cfg).dump(2) + "\n");
    }
    return r.diverged ? kExitDiverged : kExitOk;
}

int run_detect(const CommonOptions& o, const std::string& input, double alpha) {
    if (input.empty()) throw ajscc::ConfigError("detect needs --input <reception.sdif>");
    const auto rx = ajscc::load_reception(input);
    const auto det = ajscc::detect_jammed(rx, alpha);
    json j;
    ajscc::to_json(j, det.report);
    if (!o.quiet) {
        std::cout << "flagged " << det.report.flagged_indices().size() << " of " << rx.num_subcarriers()
                  << " subcarriers (mean " << det.report.mean << ", std " << det.report.std << ")\n";
    }
    if (!o.out_dir.empty()) write_text(fs::path(o.out_dir) / "detection.json", j.dump(2) + "\n");
    return kExitOk;
}

int run_decode(const CommonOptions& o, const std::string& input, bool use_mask) {
    if (input.empty()) throw ajscc::ConfigError("decode needs --input <reception.sdif>");
    const auto cfg = resolve(o, ajscc::Scenario::Jamming);
    const ajscc::TrialContext ctx(cfg);
    const auto rx = ajscc::load_reception(input);
    if (rx.num_subcarriers() != cfg.channel.num_subcarriers)
        throw ajscc::ConfigError("reception width does not match the configured subcarrier count");
    const double noise = cfg.ofdm_config().noise_variance;
    const auto csi = ajscc::estimate_channel_mmse(rx, noise);
    std::optional<ajscc::Mask> mask;
    if (use_mask) mask = ajscc::detect_jammed(rx, cfg.jamming ? cfg.jamming->alpha : 2.0).mask;
    const auto op = ajscc::MeasurementOperator::from_response(ctx.codec(), csi, noise,
                                                              cfg.channel.num_data_symbols, mask);
    const auto y = ajscc::observe(*ctx.codec(), rx);
    const auto g = ajscc::guided_reconstruct(op, ctx.prior(), ctx.schedule(), cfg.guidance_config(ctx.schedule()), y,
                                             ajscc::derive_seed(cfg.master_seed, 0, "sampler"));
    if (!o.quiet) {
        std::cout << "guided reconstruction: " << g.trace.size() << " steps, final residual "
                  << (g.trace.empty() ? 0.0 : g.trace.back().residual_norm) << '\n';
    }
    if (!o.out_dir.empty()) {
        const fs::path dir(o.out_dir);
        write_text(dir / "estimate.csv", vector_csv(ajscc::RealVector(), g.estimate));
        std::ostringstream trace;
        ajscc::write_trace_csv(trace, g.trace);
        write_text(dir / "trace.csv", trace.str());
    }
    return kExitOk;
}

int run_grid(const CommonOptions& o, ajscc::Scenario fallback, bool force_em) {
    auto cfg = resolve(o, fallback);
    if (force_em) {
        if (cfg.scenario != ajscc::Scenario::Spoofing) throw ajscc::ConfigError("em needs the spoofing scenario");
        cfg.method = ajscc::Method::Em;
    }
    const auto cells = ajscc::sweep(cfg);
    if (!o.out_dir.empty()) ajscc::write_outputs(cells, cfg, o.out_dir);
    if (!o.quiet) {
        const json s = ajscc::summary_json(cells);
        for (const auto& c : s["cells"]) {
            std::cout << c["scenario"].get<std::string>() << " jr=" << c["jr_db"] << " snr=" << c["snr_db"]
                      << " rho=" << c["rho"] << " w=" << c["w"] << " S=" << c["S"] << " n_m=" << c["n_m"]
                      << "  median mse=" << c["metrics"]["source_mse"]["median"]
                      << "  success=" << c["success_rate"] << "  diverged=" << c["diverged"] << '\n';
        }
    }
    return all_diverged_code(cells);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secure diffusion-guided JSCC decoding simulator"};
    app.require_subcommand(1);

    CommonOptions sim_o, det_o, dec_o, em_o, sw_o;
    int sim_trial = 0;
    std::string save_reception, det_input, dec_input;
    double alpha = 2.0;
    bool dec_mask = false;

    auto* sim = app.add_subcommand("simulate", "run one trial with a verbose trace");
    add_common(sim, sim_o);
    sim->add_option("--trial", sim_trial, "trial index")->check(CLI::NonNegativeNumber);
    sim->add_option("--save-reception", save_reception, "write the received grids to an SDIF file");

    auto* det = app.add_subcommand("detect", "jamming detection on a saved reception");
    add_common(det, det_o);
    det->add_option("--input", det_input, "reception SDIF file")->required();
    det->add_option("--alpha", alpha, "threshold in standard deviations")->check(CLI::PositiveNumber);

    auto* dec = app.add_subcommand("decode", "guided reconstruction on a saved reception");
    add_common(dec, dec_o);
    dec->add_option("--input", dec_input, "reception SDIF file")->required();
    dec->add_flag("--mask", dec_mask, "detect jammed subcarriers and use hybrid masked guidance");

    auto* em = app.add_subcommand("em", "EM blind recovery under pilot spoofing");
    add_common(em, em_o);

    auto* sw = app.add_subcommand("sweep", "grid experiment over the configured axes");
    add_common(sw, sw_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*sim) return run_simulate(sim_o, sim_trial, save_reception);
        if (*det) return run_detect(det_o, det_input, alpha);
        if (*dec) return run_decode(dec_o, dec_input, dec_mask);
        if (*em) return run_grid(em_o, ajscc::Scenario::Spoofing, true);
        if (*sw) return run_grid(sw_o, ajscc::Scenario::Jamming, false);
    } catch (const ajscc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ajscc::ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ajscc::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ajscc::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kExitDiverged;
    }
    return kExitOk;
}
