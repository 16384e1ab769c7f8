#include "ajscc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ajscc/codec.hpp"
#include "ajscc/detection.hpp"
#include "ajscc/sdif.hpp"

namespace ajscc {

using nlohmann::json;

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::Clean: return "clean";
        case Scenario::Jamming: return "jamming";
        case Scenario::Spoofing: return "spoofing";
    }
    return "?";
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Guided: return "guided";
        case Method::Mmse: return "mmse";
        case Method::Em: return "em";
    }
    return "?";
}

namespace {

template <class E>
struct EnumName {
    E value;
    std::string_view name;
};

constexpr EnumName<Scenario> kScenarios[] = {
    {Scenario::Clean, "clean"}, {Scenario::Jamming, "jamming"}, {Scenario::Spoofing, "spoofing"}};
constexpr EnumName<Method> kMethods[] = {{Method::Guided, "guided"}, {Method::Mmse, "mmse"}, {Method::Em, "em"}};
constexpr EnumName<CsiSource> kCsi[] = {{CsiSource::Estimated, "estimated"}, {CsiSource::Oracle, "oracle"}};
constexpr EnumName<PriorKind> kPriors[] = {{PriorKind::Axis, "axis"}, {PriorKind::LowRank, "low_rank"}};
constexpr EnumName<EqualizerWeighting> kWeightings[] = {{EqualizerWeighting::NoiseAware, "noise_aware"},
                                                        {EqualizerWeighting::Mmse, "mmse"}};
constexpr EnumName<StepRule> kStepRules[] = {{StepRule::DdimConsistent, "ddim_consistent"}, {StepRule::Unit, "unit"}};
constexpr EnumName<ReconScaling> kScalings[] = {{ReconScaling::NoiseNormalized, "noise_normalized"},
                                                {ReconScaling::Raw, "raw"}};

template <class E, std::size_t K>
E parse_enum(const json& j, const EnumName<E> (&table)[K], std::string_view field) {
    if (!j.is_string()) throw ConfigError(std::string(field) + " must be a string");
    const auto s = j.get<std::string>();
    for (const auto& e : table)
        if (e.name == s) return e.value;
    throw ConfigError("unknown value '" + s + "' for " + std::string(field));
}

template <class E, std::size_t K>
std::string enum_name(E v, const EnumName<E> (&table)[K]) {
    for (const auto& e : table)
        if (e.value == v) return std::string(e.name);
    return "?";
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError("unknown key '" + item.key() + "' in " + std::string(where));
    }
}

template <class T>
void read(const json& j, std::string_view key, T& out) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
    }
}

void read_positive_or_inf(const json& j, std::string_view key, double& out) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return;
    if (it->is_null() || (it->is_string() && it->get<std::string>() == "inf")) {
        out = std::numeric_limits<double>::infinity();
        return;
    }
    read(j, key, out);
}

template <class T>
void read_optional(const json& j, std::string_view key, std::optional<T>& out) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return;
    if (it->is_null()) {
        out.reset();
        return;
    }
    T v{};
    read(j, key, v);
    out = v;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

bool SweepAxes::empty() const {
    return jr_db.empty() && snr_db.empty() && rho.empty() && w.empty() && steps.empty() && rounds.empty() &&
           lr_start.empty();
}

OfdmConfig ExperimentConfig::ofdm_config() const {
    OfdmConfig c;
    c.num_subcarriers = channel.num_subcarriers;
    c.cp_length = channel.cp_length;
    c.num_pilot_symbols = channel.num_pilot_symbols;
    c.num_data_symbols = channel.num_data_symbols;
    c.clipping_ratio = channel.clipping_ratio;
    c.noise_variance = snr_db_to_noise_variance(channel.snr_db);
    return c;
}

NoiseSchedule ExperimentConfig::schedule() const {
    return make_schedule(guidance.schedule_steps, guidance.beta_start, guidance.beta_end);
}

GuidanceConfig ExperimentConfig::guidance_config(const NoiseSchedule& schedule) const {
    GuidanceConfig g;
    g.sampler = SamplerConfig::uniform(guidance.steps, schedule, guidance.eta);
    g.w = guidance.w;
    g.guidance_scale = guidance.guidance_scale;
    g.weighting = guidance.weighting;
    g.step_rule = guidance.step_rule;
    g.effective_noise = guidance.effective_noise;
    return g;
}

EmConfig ExperimentConfig::em_config() const {
    EmConfig c;
    c.rounds = em.rounds;
    c.prior_weight = em.prior_weight;
    c.lr_start = em.lr_start;
    c.lr_end = em.lr_end;
    c.inner_steps = em.inner_steps;
    c.recon_scaling = em.recon_scaling;
    return c;
}

GmmPrior ExperimentConfig::make_prior() const {
    if (prior.kind == PriorKind::Axis) return GmmPrior::axis_mixture(codec.source_dim);
    return GmmPrior::low_rank(codec.source_dim, prior.num_components, prior.rank, prior.floor_variance,
                              prior.mean_variance, prior.seed);
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (trials < 1) fail("trials must be positive");
    if (threads < 0) fail("threads must be nonnegative");
    if (!(success_threshold > 0.0)) fail("success_threshold must be positive");

    switch (scenario) {
        case Scenario::Clean:
            if (jamming || spoofing) fail("clean scenario takes no attack block");
            break;
        case Scenario::Jamming:
            if (!jamming) fail("jamming scenario requires a 'jamming' block");
            if (spoofing) fail("jamming scenario must not carry a 'spoofing' block");
            break;
        case Scenario::Spoofing:
            if (!spoofing) fail("spoofing scenario requires a 'spoofing' block");
            if (jamming) fail("spoofing scenario must not carry a 'jamming' block");
            break;
    }
    if (method == Method::Em && scenario != Scenario::Spoofing) fail("method 'em' applies to the spoofing scenario only");

    try {
        ofdm_config().validate(channel.num_taps);
        build_profile(channel.num_taps, channel.decay);
        const LinearCodec codec_check(codec.source_dim, codec.symbol_dim, codec.seed);
        codec_check.grid_map(channel.num_subcarriers, channel.num_data_symbols);
        if (prior.kind == PriorKind::LowRank) {
            require(prior.num_components >= 1 && prior.rank >= 1, "prior sizes must be positive");
            require(prior.floor_variance > 0.0 && prior.mean_variance >= 0.0 &&
                        prior.floor_variance + prior.mean_variance < 1.0,
                    "prior variances out of range");
        } else {
            require(codec.source_dim >= 2, "axis prior needs source_dim >= 2");
        }
        const NoiseSchedule sched = schedule();
        guidance_config(sched).validate(sched);
        em_config().validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }

    auto check_rho = [&](double rho) {
        if (!(rho > 0.0 && rho < 1.0)) fail("jamming ratio must lie in (0, 1)");
        if (static_cast<int>(std::floor(rho * channel.num_subcarriers)) < 1)
            fail("jamming ratio leaves an empty jammed block (floor(rho * N) = 0)");
    };
    if (jamming) {
        check_rho(jamming->ratio);
        for (double r : sweep.rho) check_rho(r);
        if (!(jamming->alpha > 0.0)) fail("detection alpha must be positive");
        if (jamming->block_start && *jamming->block_start < 0) fail("block_start must be nonnegative");
    } else if (!sweep.rho.empty() || !sweep.jr_db.empty()) {
        fail("rho and jr_db axes need the jamming scenario");
    }
    for (double w : sweep.w)
        if (!(w >= 0.0 && w <= 1.0)) fail("w axis values must lie in [0, 1]");
    for (int s : sweep.steps)
        if (s < 1 || s > guidance.schedule_steps) fail("S axis values must lie in [1, T]");
    for (int r : sweep.rounds)
        if (r < 1) fail("n_m axis values must be positive");
    for (double e : sweep.lr_start)
        if (!(e > 0.0)) fail("eta axis values must be positive");
}

ExperimentConfig default_config(Scenario scenario) {
    ExperimentConfig c;
    c.scenario = scenario;
    c.method = Method::Guided;
    if (scenario == Scenario::Jamming) c.jamming = JammingSettings{};
    if (scenario == Scenario::Spoofing) {
        c.spoofing = SpoofingSettings{};
        c.method = Method::Em;
    }
    return c;
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j, "config",
               {"schema_version", "scenario", "method", "csi", "master_seed", "trials", "threads", "record_timing",
                "success_threshold", "channel", "codec", "prior", "jamming", "spoofing", "guidance", "em", "sweep",
                "derived_seeds"});
    if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kConfigSchemaVersion)
        throw ConfigError("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
    if (!j.contains("scenario")) throw ConfigError("missing scenario");

    const Scenario scenario = parse_enum(j["scenario"], kScenarios, "scenario");
    ExperimentConfig c = default_config(scenario);
    // The attack blocks come only from the file, so a mismatch is reported rather than defaulted.
    c.jamming.reset();
    c.spoofing.reset();
    if (j.contains("method")) c.method = parse_enum(j["method"], kMethods, "method");
    if (j.contains("csi")) c.csi = parse_enum(j["csi"], kCsi, "csi");
    read(j, "master_seed", c.master_seed);
    read(j, "trials", c.trials);
    read(j, "threads", c.threads);
    read(j, "record_timing", c.record_timing);
    read(j, "success_threshold", c.success_threshold);

    if (j.contains("channel")) {
        const json& ch = j["channel"];
        check_keys(ch, "channel",
                   {"num_taps", "decay", "num_subcarriers", "cp_length", "num_pilot_symbols", "num_data_symbols",
                    "clipping_ratio", "snr_db"});
        read(ch, "num_taps", c.channel.num_taps);
        read(ch, "decay", c.channel.decay);
        read(ch, "num_subcarriers", c.channel.num_subcarriers);
        read(ch, "cp_length", c.channel.cp_length);
        read(ch, "num_pilot_symbols", c.channel.num_pilot_symbols);
        read(ch, "num_data_symbols", c.channel.num_data_symbols);
        read_positive_or_inf(ch, "clipping_ratio", c.channel.clipping_ratio);
        read(ch, "snr_db", c.channel.snr_db);
    }
    if (j.contains("codec")) {
        const json& co = j["codec"];
        check_keys(co, "codec", {"source_dim", "symbol_dim", "seed"});
        read(co, "source_dim", c.codec.source_dim);
        read(co, "symbol_dim", c.codec.symbol_dim);
        read(co, "seed", c.codec.seed);
    }
    if (j.contains("prior")) {
        const json& p = j["prior"];
        check_keys(p, "prior", {"kind", "num_components", "rank", "floor_variance", "mean_variance", "seed"});
        if (p.contains("kind")) c.prior.kind = parse_enum(p["kind"], kPriors, "prior.kind");
        read(p, "num_components", c.prior.num_components);
        read(p, "rank", c.prior.rank);
        read(p, "floor_variance", c.prior.floor_variance);
        read(p, "mean_variance", c.prior.mean_variance);
        read(p, "seed", c.prior.seed);
    }
    if (j.contains("jamming")) {
        const json& jm = j["jamming"];
        check_keys(jm, "jamming", {"ratio", "jr_db", "block_start", "alpha"});
        JammingSettings s;
        read(jm, "ratio", s.ratio);
        read(jm, "jr_db", s.jr_db);
        read_optional(jm, "block_start", s.block_start);
        read(jm, "alpha", s.alpha);
        c.jamming = s;
    }
    if (j.contains("spoofing")) {
        const json& sp = j["spoofing"];
        check_keys(sp, "spoofing", {"power_ratio_db"});
        SpoofingSettings s;
        if (sp.contains("power_ratio_db") && sp["power_ratio_db"].is_string() &&
            sp["power_ratio_db"].get<std::string>() == "-inf")
            s.power_ratio_db = -std::numeric_limits<double>::infinity();
        else
            read_positive_or_inf(sp, "power_ratio_db", s.power_ratio_db);
        c.spoofing = s;
    }
    if (j.contains("guidance")) {
        const json& g = j["guidance"];
        check_keys(g, "guidance",
                   {"steps", "eta", "w", "guidance_scale", "weighting", "step_rule", "effective_noise",
                    "schedule_steps", "beta_start", "beta_end"});
        read(g, "steps", c.guidance.steps);
        read(g, "eta", c.guidance.eta);
        read(g, "w", c.guidance.w);
        read(g, "guidance_scale", c.guidance.guidance_scale);
        if (g.contains("weighting")) c.guidance.weighting = parse_enum(g["weighting"], kWeightings, "weighting");
        if (g.contains("step_rule")) c.guidance.step_rule = parse_enum(g["step_rule"], kStepRules, "step_rule");
        read_optional(g, "effective_noise", c.guidance.effective_noise);
        read(g, "schedule_steps", c.guidance.schedule_steps);
        read(g, "beta_start", c.guidance.beta_start);
        read(g, "beta_end", c.guidance.beta_end);
    }
    if (j.contains("em")) {
        const json& e = j["em"];
        check_keys(e, "em", {"rounds", "prior_weight", "lr_start", "lr_end", "inner_steps", "recon_scaling"});
        read(e, "rounds", c.em.rounds);
        read(e, "prior_weight", c.em.prior_weight);
        read(e, "lr_start", c.em.lr_start);
        read(e, "lr_end", c.em.lr_end);
        read(e, "inner_steps", c.em.inner_steps);
        if (e.contains("recon_scaling"))
            c.em.recon_scaling = parse_enum(e["recon_scaling"], kScalings, "recon_scaling");
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, "sweep", {"jr_db", "snr_db", "rho", "w", "S", "n_m", "eta"});
        read(s, "jr_db", c.sweep.jr_db);
        read(s, "snr_db", c.sweep.snr_db);
        read(s, "rho", c.sweep.rho);
        read(s, "w", c.sweep.w);
        read(s, "S", c.sweep.steps);
        read(s, "n_m", c.sweep.rounds);
        read(s, "eta", c.sweep.lr_start);
    }
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["scenario"] = std::string(to_string(c.scenario));
    j["method"] = std::string(to_string(c.method));
    j["csi"] = enum_name(c.csi, kCsi);
    j["master_seed"] = c.master_seed;
    j["trials"] = c.trials;
    j["threads"] = c.threads;
    j["record_timing"] = c.record_timing;
    j["success_threshold"] = c.success_threshold;
    j["channel"] = {{"num_taps", c.channel.num_taps},
                    {"decay", c.channel.decay},
                    {"num_subcarriers", c.channel.num_subcarriers},
                    {"cp_length", c.channel.cp_length},
                    {"num_pilot_symbols", c.channel.num_pilot_symbols},
                    {"num_data_symbols", c.channel.num_data_symbols},
                    {"clipping_ratio", std::isinf(c.channel.clipping_ratio) ? json(nullptr)
                                                                           : json(c.channel.clipping_ratio)},
                    {"snr_db", c.channel.snr_db}};
    j["codec"] = {{"source_dim", c.codec.source_dim}, {"symbol_dim", c.codec.symbol_dim}, {"seed", c.codec.seed}};
    j["prior"] = {{"kind", enum_name(c.prior.kind, kPriors)},
                  {"num_components", c.prior.num_components},
                  {"rank", c.prior.rank},
                  {"floor_variance", c.prior.floor_variance},
                  {"mean_variance", c.prior.mean_variance},
                  {"seed", c.prior.seed}};
    if (c.jamming) {
        j["jamming"] = {{"ratio", c.jamming->ratio},
                        {"jr_db", c.jamming->jr_db},
                        {"block_start", c.jamming->block_start ? json(*c.jamming->block_start) : json(nullptr)},
                        {"alpha", c.jamming->alpha}};
    }
    if (c.spoofing) {
        const double p = c.spoofing->power_ratio_db;
        j["spoofing"] = {{"power_ratio_db", std::isinf(p) ? json(p < 0 ? "-inf" : "inf") : json(p)}};
    }
    j["guidance"] = {{"steps", c.guidance.steps},
                     {"eta", c.guidance.eta},
                     {"w", c.guidance.w},
                     {"guidance_scale", c.guidance.guidance_scale},
                     {"weighting", enum_name(c.guidance.weighting, kWeightings)},
                     {"step_rule", enum_name(c.guidance.step_rule, kStepRules)},
                     {"effective_noise", optional_json(c.guidance.effective_noise)},
                     {"schedule_steps", c.guidance.schedule_steps},
                     {"beta_start", c.guidance.beta_start},
                     {"beta_end", c.guidance.beta_end}};
    j["em"] = {{"rounds", c.em.rounds},
               {"prior_weight", c.em.prior_weight},
               {"lr_start", c.em.lr_start},
               {"lr_end", c.em.lr_end},
               {"inner_steps", c.em.inner_steps},
               {"recon_scaling", enum_name(c.em.recon_scaling, kScalings)}};
    json s = json::object();
    if (!c.sweep.jr_db.empty()) s["jr_db"] = c.sweep.jr_db;
    if (!c.sweep.snr_db.empty()) s["snr_db"] = c.sweep.snr_db;
    if (!c.sweep.rho.empty()) s["rho"] = c.sweep.rho;
    if (!c.sweep.w.empty()) s["w"] = c.sweep.w;
    if (!c.sweep.steps.empty()) s["S"] = c.sweep.steps;
    if (!c.sweep.rounds.empty()) s["n_m"] = c.sweep.rounds;
    if (!c.sweep.lr_start.empty()) s["eta"] = c.sweep.lr_start;
    j["sweep"] = s;
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

TrialContext::TrialContext(const ExperimentConfig& config)
    : config_(config),
      codec_(std::make_shared<const LinearCodec>(config.codec.source_dim, config.codec.symbol_dim, config.codec.seed)),
      prior_(config.make_prior()),
      schedule_(config.schedule()),
      profile_(build_profile(config.channel.num_taps, config.channel.decay)) {
    config_.validate();
}

TrialResult run_trial(const TrialContext& context, int trial_index, TrialArtifacts* artifacts) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig& cfg = context.config();
    const std::uint64_t root = trial_seed(cfg.master_seed, static_cast<std::uint64_t>(trial_index));
    const LinearCodec& codec = *context.codec();
    const OfdmConfig ofdm = cfg.ofdm_config();
    const int N = ofdm.num_subcarriers;
    const int Ns = ofdm.num_data_symbols;
    const double noise = ofdm.noise_variance;

    TrialResult result;
    result.trial = trial_index;
    result.seed = root;

    const ChannelTaps taps = sample_taps(context.profile(), stage_seed(root, "channel"));
    const FrequencyResponse truth = frequency_response(taps, N);
    const RealVector x0 = context.prior().sample(stage_seed(root, "source"));

    OfdmFrame frame;
    frame.pilots = make_pilots(ofdm.num_pilot_symbols, N, stage_seed(root, "pilots"));
    frame.data = codec.to_grid(codec.encode(x0), N, Ns);
    OfdmReception rx = apply_channel(frame, taps, ofdm, stage_seed(root, "noise"));

    std::vector<int> jammed;
    std::optional<DetectionResult> detection;
    if (cfg.scenario == Scenario::Jamming) {
        JammingConfig jc;
        jc.ratio = cfg.jamming->ratio;
        jc.jr_db = cfg.jamming->jr_db;
        jc.block_start = cfg.jamming->block_start;
        JammingOutcome out = inject_jamming(rx, jc, transmitted_data_power(frame.data), stage_seed(root, "jamming"));
        rx = std::move(out.rx);
        jammed = std::move(out.jammed);
        detection = detect_jammed(rx, cfg.jamming->alpha);
        const DetectionScores scores = score_detection(detection->report.flags, jammed);
        result.det_precision = scores.precision;
        result.det_recall = scores.recall;
    } else if (cfg.scenario == Scenario::Spoofing) {
        const ChannelTaps adversary = sample_taps(context.profile(), stage_seed(root, "adversary"));
        SpoofingConfig sc;
        sc.power_ratio_db = cfg.spoofing->power_ratio_db;
        rx = inject_spoofing(rx, adversary, sc);
    }

    FrequencyResponse csi = cfg.csi == CsiSource::Oracle ? truth : estimate_channel_mmse(rx, noise);
    const ComplexVector y = observe(codec, rx);
    std::optional<Mask> mask;
    if (detection) mask = detection->mask;

    RealVector estimate;
    std::vector<TraceRow> trace;
    std::optional<EmState> em_state;
    try {
        const GuidanceConfig gcfg = cfg.guidance_config(context.schedule());
        const std::uint64_t sampler_seed = stage_seed(root, "sampler");
        if (cfg.method == Method::Mmse) {
            estimate = MeasurementOperator::from_response(context.codec(), csi, noise, Ns).pseudoinverse(y);
        } else if (cfg.method == Method::Guided) {
            const auto op = MeasurementOperator::from_response(context.codec(), csi, noise, Ns, mask);
            GuidedResult g = guided_reconstruct(op, context.prior(), context.schedule(), gcfg, y, sampler_seed);
            estimate = std::move(g.estimate);
            trace = std::move(g.trace);
        } else {
            EmProblem problem;
            problem.model = std::make_shared<const TapForwardModel>(context.codec(), N, cfg.channel.num_taps, Ns);
            problem.observation = y;
            problem.noise_variance = noise;
            problem.true_taps = taps.taps;
            em_state = em_run(problem, csi, context.prior(), context.schedule(), gcfg, cfg.em_config(), sampler_seed);
            estimate = em_state->reconstruction;
            result.contaminated_tap_nmse = taps_nmse({em_state->initial_taps}, taps);
            result.final_tap_nmse = taps_nmse({em_state->tap_estimate}, taps);
            csi = frequency_response({em_state->tap_estimate}, N);
            csi.is_estimate = true;
        }
        result.channel_nmse = response_nmse(csi, truth);
        result.source_mse = (estimate - x0).squaredNorm() / static_cast<double>(x0.size());
        const double peak = x0.cwiseAbs().maxCoeff();
        result.psnr_db = result.source_mse > 0.0 ? 10.0 * std::log10(peak * peak / result.source_mse)
                                                 : std::numeric_limits<double>::infinity();
        result.success = std::isfinite(result.source_mse) && result.source_mse < cfg.success_threshold;
    } catch (const DivergenceError& e) {
        result.diverged = true;
        result.success = false;
        result.diagnostic = e.what();
    }

    if (cfg.record_timing)
        result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (artifacts != nullptr) {
        artifacts->source = x0;
        artifacts->estimate = estimate;
        artifacts->taps = taps;
        artifacts->reception = rx;
        artifacts->csi = csi;
        artifacts->jammed = jammed;
        if (detection) artifacts->detection = detection->report;
        artifacts->trace = trace;
        artifacts->em = em_state;
    }
    return result;
}

TrialResult run_trial(const ExperimentConfig& config, int trial_index) {
    return run_trial(TrialContext(config), trial_index);
}

CellValues cell_values(const ExperimentConfig& c) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {c.jamming ? c.jamming->jr_db : nan,
            c.channel.snr_db,
            c.jamming ? c.jamming->ratio : nan,
            c.guidance.w,
            c.guidance.steps,
            c.em.rounds,
            c.em.lr_start};
}

std::vector<ExperimentConfig> expand_cells(const ExperimentConfig& config) {
    auto sorted = [](auto v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    auto or_base = [&](auto axis, auto base) {
        return axis.empty() ? std::vector<decltype(base)>{base} : sorted(axis);
    };
    ExperimentConfig base = config;
    base.sweep = SweepAxes{};
    const auto jr = or_base(config.sweep.jr_db, config.jamming ? config.jamming->jr_db : 0.0);
    const auto snr = or_base(config.sweep.snr_db, config.channel.snr_db);
    const auto rho = or_base(config.sweep.rho, config.jamming ? config.jamming->ratio : 0.0);
    const auto ws = or_base(config.sweep.w, config.guidance.w);
    const auto steps = or_base(config.sweep.steps, config.guidance.steps);
    const auto rounds = or_base(config.sweep.rounds, config.em.rounds);
    const auto lrs = or_base(config.sweep.lr_start, config.em.lr_start);

    std::vector<ExperimentConfig> cells;
    for (double a : jr)
        for (double b : snr)
            for (double c : rho)
                for (double d : ws)
                    for (int e : steps)
                        for (int f : rounds)
                            for (double g : lrs) {
                                ExperimentConfig cell = base;
                                if (cell.jamming) {
                                    cell.jamming->jr_db = a;
                                    cell.jamming->ratio = c;
                                }
                                cell.channel.snr_db = b;
                                cell.guidance.w = d;
                                cell.guidance.steps = e;
                                cell.em.rounds = f;
                                cell.em.lr_start = g;
                                cells.push_back(std::move(cell));
                            }
    return cells;
}

std::vector<CellResult> sweep(const ExperimentConfig& config) {
    config.validate();
    const std::vector<ExperimentConfig> cells = expand_cells(config);
    std::vector<TrialContext> contexts;
    contexts.reserve(cells.size());
    for (const auto& c : cells) contexts.emplace_back(c);

    std::vector<CellResult> out(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out[i].config = cells[i];
        out[i].values = cell_values(cells[i]);
        out[i].trials.resize(static_cast<std::size_t>(config.trials));
    }

    const std::size_t total = cells.size() * static_cast<std::size_t>(config.trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t task = next++; task < total; task = next++) {
            const std::size_t cell = task / static_cast<std::size_t>(config.trials);
            const int trial = static_cast<int>(task % static_cast<std::size_t>(config.trials));
            try {
                out[cell].trials[static_cast<std::size_t>(trial)] = run_trial(contexts[cell], trial);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = total;
            }
        }
    };
    unsigned n_threads = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return out;
}

SummaryStats summarize(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
    SummaryStats s;
    s.count = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        if (frac == 0.0) return values[lo];
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    s.median = quantile(0.5);
    s.q25 = quantile(0.25);
    s.q75 = quantile(0.75);
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Column {
    const char* name;
    double TrialResult::*field;
};

constexpr Column kMetricColumns[] = {{"source_mse", &TrialResult::source_mse},
                                     {"psnr_db", &TrialResult::psnr_db},
                                     {"channel_nmse", &TrialResult::channel_nmse},
                                     {"det_precision", &TrialResult::det_precision},
                                     {"det_recall", &TrialResult::det_recall},
                                     {"wall_time_s", &TrialResult::wall_time_s}};

std::vector<double> column(const std::vector<TrialResult>& trials, double TrialResult::*field) {
    std::vector<double> v;
    v.reserve(trials.size());
    for (const auto& t : trials) v.push_back(t.*field);
    return v;
}

std::string cell_prefix(const CellResult& cell) {
    const ExperimentConfig& c = cell.config;
    const bool guided = c.method != Method::Mmse;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::string s(to_string(c.scenario));
    s += ',' + fmt(cell.values.jr_db);
    s += ',' + fmt(cell.values.snr_db);
    s += ',' + fmt(cell.values.rho);
    s += ',' + fmt(guided ? cell.values.w : nan);
    s += ',' + (guided ? std::to_string(cell.values.steps) : std::string("nan"));
    s += ',' + (c.method == Method::Em ? std::to_string(cell.values.rounds) : std::string("nan"));
    return s;
}

json stats_json(const SummaryStats& s) {
    return {{"count", s.count}, {"median", s.median}, {"mean", s.mean}, {"q25", s.q25}, {"q75", s.q75},
            {"iqr", s.iqr()}};
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<CellResult>& cells) {
    out << kResultsHeader << '\n';
    for (const auto& cell : cells) {
        const std::string prefix = cell_prefix(cell);
        for (const auto& t : cell.trials) {
            out << prefix << ',' << t.trial << ',' << t.seed << ',' << fmt(t.source_mse) << ',' << fmt(t.psnr_db)
                << ',' << fmt(t.channel_nmse) << ',' << fmt(t.det_precision) << ',' << fmt(t.det_recall) << ','
                << (t.success ? 1 : 0) << ',' << fmt(t.wall_time_s) << '\n';
        }
        double successes = 0;
        for (const auto& t : cell.trials) successes += t.success ? 1.0 : 0.0;
        const double rate = cell.trials.empty() ? 0.0 : successes / static_cast<double>(cell.trials.size());
        auto med = [&](double TrialResult::*field) { return fmt(summarize(column(cell.trials, field)).median); };
        out << prefix << ",aggregate,," << med(&TrialResult::source_mse) << ',' << med(&TrialResult::psnr_db) << ','
            << med(&TrialResult::channel_nmse) << ',' << med(&TrialResult::det_precision) << ','
            << med(&TrialResult::det_recall) << ',' << fmt(rate) << ',' << med(&TrialResult::wall_time_s);
        out << '\n';
    }
}

json summary_json(const std::vector<CellResult>& cells) {
    json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["cells"] = json::array();
    for (const auto& cell : cells) {
        json c;
        c["scenario"] = std::string(to_string(cell.config.scenario));
        c["method"] = std::string(to_string(cell.config.method));
        c["jr_db"] = cell.values.jr_db;
        c["snr_db"] = cell.values.snr_db;
        c["rho"] = cell.values.rho;
        c["w"] = cell.values.w;
        c["S"] = cell.values.steps;
        c["n_m"] = cell.values.rounds;
        c["eta"] = cell.values.lr_start;
        c["trials"] = cell.trials.size();
        std::size_t diverged = 0, successes = 0;
        std::vector<double> mse_ok;
        for (const auto& t : cell.trials) {
            diverged += t.diverged ? 1 : 0;
            successes += t.success ? 1 : 0;
            if (t.success) mse_ok.push_back(t.source_mse);
        }
        c["diverged"] = diverged;
        c["success_rate"] = cell.trials.empty() ? 0.0 : static_cast<double>(successes) / cell.trials.size();
        json metrics;
        for (const auto& col : kMetricColumns) metrics[col.name] = stats_json(summarize(column(cell.trials, col.field)));
        metrics["contaminated_tap_nmse"] =
            stats_json(summarize(column(cell.trials, &TrialResult::contaminated_tap_nmse)));
        metrics["final_tap_nmse"] = stats_json(summarize(column(cell.trials, &TrialResult::final_tap_nmse)));
        metrics["source_mse_successful"] = stats_json(summarize(mse_ok));
        c["metrics"] = metrics;
        j["cells"].push_back(c);
    }
    return j;
}

json resolved_config_json(const ExperimentConfig& config) {
    json j = config_to_json(config);
    json seeds = json::array();
    for (int t = 0; t < config.trials; ++t) {
        const std::uint64_t root = trial_seed(config.master_seed, static_cast<std::uint64_t>(t));
        json stages;
        for (auto tag : kStageTags) stages[std::string(tag)] = stage_seed(root, tag);
        seeds.push_back({{"trial", t}, {"root", root}, {"stages", stages}});
    }
    j["derived_seeds"] = seeds;
    return j;
}

void write_outputs(const std::vector<CellResult>& cells, const ExperimentConfig& config,
                   const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    auto write = [&](const std::string& name, const auto& emit) {
        const auto path = out_dir / name;
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        emit(out);
        out.flush();
        if (!out) throw IoError("write failed: " + path.string());
    };
    write("results.csv", [&](std::ostream& o) { write_results_csv(o, cells); });
    write("config.json", [&](std::ostream& o) { o << resolved_config_json(config).dump(2) << '\n'; });
    write("summary.json", [&](std::ostream& o) { o << summary_json(cells).dump(2) << '\n'; });
}

}  // namespace ajscc
