#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ajscc/harness.hpp"
#include "ajscc/sdif.hpp"
#include "oracles.hpp"

using namespace ajscc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

std::string csv(const std::vector<CellResult>& cells) {
    std::ostringstream out;
    write_results_csv(out, cells);
    return out.str();
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ajscc_harness_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("run_trial is deterministic in (master_seed, trial_index)") {
    for (Scenario s : {Scenario::Clean, Scenario::Jamming, Scenario::Spoofing}) {
        auto cfg = default_config(s);
        cfg.master_seed = 99;
        const TrialContext ctx(cfg);
        for (int i : {0, 7}) {
            const auto a = run_trial(ctx, i);
            const auto b = run_trial(ctx, i);
            CHECK(a.seed == b.seed);
            CHECK(a.seed == trial_seed(99, static_cast<std::uint64_t>(i)));
            CHECK(same_bits(a.source_mse, b.source_mse));
            CHECK(same_bits(a.psnr_db, b.psnr_db));
            CHECK(same_bits(a.channel_nmse, b.channel_nmse));
            CHECK(same_bits(a.det_precision, b.det_precision));
            CHECK(same_bits(a.det_recall, b.det_recall));
            CHECK(same_bits(a.final_tap_nmse, b.final_tap_nmse));
            CHECK(a.success == b.success);
            CHECK(a.diverged == b.diverged);
        }
    }
}

TEST_CASE("trial metrics follow their definitions") {
    const auto cfg = default_config(Scenario::Jamming);
    const TrialContext ctx(cfg);
    TrialArtifacts art;
    const auto r = run_trial(ctx, 3, &art);
    const double mse = (art.estimate - art.source).squaredNorm() / 64.0;
    CHECK(r.source_mse == doctest::Approx(mse).epsilon(1e-14));
    const double peak = art.source.cwiseAbs().maxCoeff();
    CHECK(r.psnr_db == doctest::Approx(10.0 * std::log10(peak * peak / mse)).epsilon(1e-12));
    CHECK(std::isfinite(r.psnr_db));
    CHECK(r.success == (mse < kDefaultSuccessThreshold));
    CHECK(art.jammed.size() == 51);
    CHECK(r.det_precision >= 0.0);
    CHECK(r.det_precision <= 1.0);
    CHECK(r.wall_time_s == 0.0);
    CHECK(r.channel_nmse == doctest::Approx((art.csi.response - frequency_response(art.taps, 256).response).squaredNorm() /
                                            frequency_response(art.taps, 256).response.squaredNorm()));
}

TEST_CASE("config validation") {
    auto cfg = default_config(Scenario::Jamming);
    CHECK_NOTHROW(cfg.validate());
    cfg.jamming->ratio = 0.003;  // floor(0.768) = 0
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_config(Scenario::Jamming);
    cfg.sweep.rho = {0.2, 0.001};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_config(Scenario::Jamming);
    cfg.spoofing = SpoofingSettings{};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_config(Scenario::Clean);
    cfg.method = Method::Em;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_config(Scenario::Clean);
    cfg.channel.cp_length = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_config(Scenario::Clean);
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config JSON parsing rejects unknown keys and mismatched blocks") {
    const json base = config_to_json(default_config(Scenario::Jamming));
    CHECK_NOTHROW(config_from_json(base));

    json j = base;
    j["unexpected"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j["channel"]["taps"] = 8;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j["sweep"]["gamma"] = {1.0};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j["schema_version"] = 2;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j.erase("schema_version");
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j.erase("jamming");
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j["jamming"]["ratio"] = 0.001;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j["guidance"]["weighting"] = "bogus";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = base;
    j["trials"] = "many";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    const json minimal = {{"schema_version", 1}, {"scenario", "spoofing"}, {"spoofing", {{"power_ratio_db", "-inf"}}}};
    const auto c = config_from_json(minimal);
    CHECK(c.method == Method::Em);
    CHECK(std::isinf(c.spoofing->power_ratio_db));
    CHECK(c.spoofing->power_ratio_db < 0);
}

TEST_CASE("config JSON round trip") {
    auto cfg = default_config(Scenario::Jamming);
    cfg.master_seed = 1234567890123ULL;
    cfg.sweep.jr_db = {0.0, 4.0};
    cfg.sweep.w = {0.3};
    cfg.channel.clipping_ratio = 1.5;
    cfg.guidance.effective_noise = 0.05;
    const auto back = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(back) == config_to_json(cfg));
    CHECK(back.master_seed == cfg.master_seed);
}

TEST_CASE("results header is exact") {
    CHECK(kResultsHeader ==
          "scenario,jr_db,snr_db,rho,w,S,n_m,trial,seed,source_mse,psnr_db,channel_nmse,det_precision,det_recall,"
          "success,wall_time_s");
}

TEST_CASE("empty results give a header-only CSV and a valid summary") {
    CHECK(csv({}) == std::string(kResultsHeader) + "\n");
    const json s = summary_json({});
    CHECK(s["cells"].is_array());
    CHECK(s["cells"].empty());
    CHECK(json::parse(s.dump()) == s);
    const auto stats = summarize({});
    CHECK(stats.count == 0);
    CHECK(std::isnan(stats.median));
}

TEST_CASE("summarize quantiles and NaN handling") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto s = summarize({4.0, nan, 1.0, 3.0, 2.0});
    CHECK(s.count == 4);
    CHECK(s.median == doctest::Approx(2.5));
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.q25 == doctest::Approx(1.75));
    CHECK(s.q75 == doctest::Approx(3.25));
    CHECK(summarize({5.0, 1.0, 3.0}).median == 3.0);
}

TEST_CASE("sweep row count, ordering and aggregate medians") {
    auto cfg = default_config(Scenario::Jamming);
    cfg.trials = 100;
    cfg.sweep.jr_db = {8.0, 0.0, 4.0, 2.0, 6.0};
    const auto cells = sweep(cfg);
    REQUIRE(cells.size() == 5);
    const auto rows = lines(csv(cells));
    REQUIRE(rows.size() == 1 + 500 + 5);
    CHECK(rows[0] == kResultsHeader);

    const auto header = split(rows[0]);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

    std::vector<double> mse;
    double last_jr = -1.0;
    int expected_trial = 0;
    std::size_t aggregates = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = split(rows[r]);
        REQUIRE(f.size() == header.size());
        const double jr = std::stod(f[col["jr_db"]]);
        if (f[col["trial"]] == "aggregate") {
            ++aggregates;
            CHECK(f[col["seed"]].empty());
            CHECK(expected_trial == 100);
            // Independent recomputation of the median from the trial rows just read.
            CHECK(std::stod(f[col["source_mse"]]) == doctest::Approx(oracle::median(mse)).epsilon(1e-10));
            mse.clear();
            expected_trial = 0;
            continue;
        }
        if (expected_trial == 0) {
            CHECK(jr > last_jr);
            last_jr = jr;
        }
        CHECK(std::stoi(f[col["trial"]]) == expected_trial);
        ++expected_trial;
        mse.push_back(std::stod(f[col["source_mse"]]));
        CHECK(f[col["scenario"]] == "jamming");
        CHECK(f[col["n_m"]] == "nan");
        CHECK(f[col["S"]] == "50");
    }
    CHECK(aggregates == 5);
}

TEST_CASE("adding sweep cells does not perturb other cells") {
    auto cfg = default_config(Scenario::Jamming);
    cfg.trials = 6;
    cfg.sweep.jr_db = {8.0};
    const auto alone = sweep(cfg);
    cfg.sweep.jr_db = {0.0, 8.0};
    cfg.sweep.w = {0.0, 0.3};
    const auto grid = sweep(cfg);
    bool found = false;
    for (const auto& cell : grid) {
        if (cell.values.jr_db != 8.0 || cell.values.w != 0.3) continue;
        found = true;
        for (int i = 0; i < 6; ++i) {
            CHECK(cell.trials[static_cast<std::size_t>(i)].seed == alone[0].trials[static_cast<std::size_t>(i)].seed);
            CHECK(same_bits(cell.trials[static_cast<std::size_t>(i)].source_mse,
                            alone[0].trials[static_cast<std::size_t>(i)].source_mse));
        }
    }
    CHECK(found);
}

TEST_CASE("thread count does not change results") {
    auto cfg = default_config(Scenario::Spoofing);
    cfg.trials = 8;
    cfg.threads = 1;
    const std::string one = csv(sweep(cfg));
    cfg.threads = 4;
    CHECK(csv(sweep(cfg)) == one);
}

TEST_CASE("write_outputs files and config.json round trip") {
    auto cfg = default_config(Scenario::Jamming);
    cfg.trials = 5;
    cfg.master_seed = 42;
    cfg.sweep.w = {0.0, 0.3};
    const auto dir = scratch_dir("outputs");
    write_outputs(sweep(cfg), cfg, dir);
    REQUIRE(fs::exists(dir / "results.csv"));
    REQUIRE(fs::exists(dir / "summary.json"));
    REQUIRE(fs::exists(dir / "config.json"));

    const json resolved = json::parse(slurp(dir / "config.json"));
    REQUIRE(resolved["derived_seeds"].size() == 5);
    const auto& t3 = resolved["derived_seeds"][3];
    CHECK(t3["root"].get<std::uint64_t>() == trial_seed(42, 3));
    CHECK(t3["stages"]["noise"].get<std::uint64_t>() == derive_seed(42, 3, "noise"));
    for (auto tag : kStageTags) CHECK(t3["stages"].contains(std::string(tag)));

    const json summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary["cells"].size() == 2);

    const auto reloaded = load_config(dir / "config.json");
    const auto again = scratch_dir("outputs_again");
    write_outputs(sweep(reloaded), reloaded, again);
    CHECK(slurp(again / "results.csv") == slurp(dir / "results.csv"));
    CHECK(slurp(again / "config.json") == slurp(dir / "config.json"));
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_CASE("IO failures carry the failing path") {
    const auto dir = scratch_dir("io");
    fs::create_directories(dir);
    const fs::path blocker = dir / "file";
    std::ofstream(blocker) << "x";
    auto cfg = default_config(Scenario::Clean);
    cfg.trials = 1;
    try {
        write_outputs({}, cfg, blocker / "sub");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find((blocker / "sub").string()) != std::string::npos);
    }
    CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("divergence is reported as a failed trial") {
    auto cfg = default_config(Scenario::Jamming);
    cfg.guidance.guidance_scale = 1e12;
    const auto r = run_trial(cfg, 0);
    CHECK(r.diverged);
    CHECK_FALSE(r.success);
    CHECK(r.diagnostic.find("diverged") != std::string::npos);
}

TEST_CASE("clean oracle-CSI decoding beats guided decoding under attack") {
    auto clean = default_config(Scenario::Clean);
    clean.csi = CsiSource::Oracle;
    clean.method = Method::Mmse;
    auto jammed = default_config(Scenario::Jamming);
    const TrialContext c1(clean), c2(jammed);
    std::vector<double> p1, p2;
    for (int i = 0; i < 50; ++i) {
        p1.push_back(run_trial(c1, i).psnr_db);
        p2.push_back(run_trial(c2, i).psnr_db);
    }
    MESSAGE("median PSNR clean/oracle " << oracle::median(p1) << " dB, jammed/guided " << oracle::median(p2) << " dB");
    CHECK(oracle::median(p1) > oracle::median(p2));
}
