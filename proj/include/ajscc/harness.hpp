#pragma once

// Experiment configuration, trial pipeline, sweeps and reproducible outputs.
//
// Seeding: trial i of master seed s uses root trial_seed(s, i); each stage draws
// from stage_seed(root, tag) with the tags listed in kStageTags. Sweep cells share
// these streams (common random numbers), so adding a cell never perturbs another.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ajscc/attacks.hpp"
#include "ajscc/diffusion.hpp"
#include "ajscc/em_blind.hpp"
#include "ajscc/guidance.hpp"
#include "ajscc/ofdm_channel.hpp"

namespace ajscc {

inline constexpr int kConfigSchemaVersion = 1;

// Success threshold on source MSE: four times the median MSE of oracle-CSI MMSE
// decoding at 10 dB SNR under the default configuration (0.0720 over 1000
// trials, master seed 20240611; reproduced by tools/calibrate.cpp).
inline constexpr double kDefaultSuccessThreshold = 0.288;

inline constexpr std::array<std::string_view, 7> kStageTags = {"channel", "source",   "pilots",  "noise",
                                                               "jamming", "adversary", "sampler"};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Scenario { Clean, Jamming, Spoofing };
enum class Method { Guided, Mmse, Em };
enum class CsiSource { Estimated, Oracle };
enum class PriorKind { Axis, LowRank };

std::string_view to_string(Scenario s);
std::string_view to_string(Method m);

struct ChannelSettings {
    int num_taps = 8;
    double decay = 4.0;
    int num_subcarriers = 256;
    int cp_length = 10;
    int num_pilot_symbols = 1;
    int num_data_symbols = 1;
    double clipping_ratio = std::numeric_limits<double>::infinity();
    double snr_db = 10.0;
};

struct CodecSettings {
    int source_dim = 64;
    int symbol_dim = 128;
    std::uint64_t seed = 7;
};

struct PriorSettings {
    PriorKind kind = PriorKind::LowRank;
    int num_components = 4;
    int rank = 4;
    double floor_variance = 0.02;
    double mean_variance = 0.5;
    std::uint64_t seed = 11;
};

struct JammingSettings {
    double ratio = 0.2;
    double jr_db = 8.0;
    std::optional<int> block_start;
    double alpha = 2.0;
};

struct SpoofingSettings {
    double power_ratio_db = 0.0;
};

struct GuidanceSettings {
    int steps = 50;
    double eta = 0.0;  // DDIM stochasticity
    double w = 0.3;
    double guidance_scale = 1.0;
    EqualizerWeighting weighting = EqualizerWeighting::NoiseAware;
    StepRule step_rule = StepRule::DdimConsistent;
    std::optional<double> effective_noise;
    int schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct EmSettings {
    int rounds = 5;
    double prior_weight = 12.0;
    double lr_start = 100.0;
    double lr_end = 1.0;
    int inner_steps = 20;
    ReconScaling recon_scaling = ReconScaling::NoiseNormalized;
};

// Sweep axes; an empty list leaves the base value in place.
struct SweepAxes {
    std::vector<double> jr_db;
    std::vector<double> snr_db;
    std::vector<double> rho;
    std::vector<double> w;
    std::vector<int> steps;
    std::vector<int> rounds;
    std::vector<double> lr_start;  // the eta axis: initial EM learning rate

    bool empty() const;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::Jamming;
    Method method = Method::Guided;
    CsiSource csi = CsiSource::Estimated;
    std::uint64_t master_seed = 1;
    int trials = 100;
    int threads = 0;  // 0: hardware concurrency
    bool record_timing = false;
    double success_threshold = kDefaultSuccessThreshold;
    ChannelSettings channel;
    CodecSettings codec;
    PriorSettings prior;
    std::optional<JammingSettings> jamming;
    std::optional<SpoofingSettings> spoofing;
    GuidanceSettings guidance;
    EmSettings em;
    SweepAxes sweep;

    // Throws ConfigError.
    void validate() const;

    OfdmConfig ofdm_config() const;
    GuidanceConfig guidance_config(const NoiseSchedule& schedule) const;
    EmConfig em_config() const;
    NoiseSchedule schedule() const;
    GmmPrior make_prior() const;
};

// Defaults per scenario: jamming uses guided decoding, spoofing uses EM.
ExperimentConfig default_config(Scenario scenario);

// Unknown keys, a wrong schema_version, or an attack block that does not match
// the scenario throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;  // trial root seed
    double source_mse = std::numeric_limits<double>::quiet_NaN();
    double psnr_db = std::numeric_limits<double>::quiet_NaN();
    double channel_nmse = std::numeric_limits<double>::quiet_NaN();
    double det_precision = std::numeric_limits<double>::quiet_NaN();
    double det_recall = std::numeric_limits<double>::quiet_NaN();
    double contaminated_tap_nmse = std::numeric_limits<double>::quiet_NaN();
    double final_tap_nmse = std::numeric_limits<double>::quiet_NaN();
    bool success = false;
    bool diverged = false;
    std::string diagnostic;
    double wall_time_s = 0.0;
};

// Everything a single trial produces, for the verbose CLI paths.
struct TrialArtifacts {
    RealVector source;
    RealVector estimate;
    ChannelTaps taps;
    OfdmReception reception;
    FrequencyResponse csi;
    std::vector<int> jammed;
    std::optional<DetectionReport> detection;
    std::vector<TraceRow> trace;
    std::optional<EmState> em;
};

// Shared, immutable per-config objects (codec, prior, schedule, profile).
class TrialContext {
public:
    explicit TrialContext(const ExperimentConfig& config);

    const ExperimentConfig& config() const { return config_; }
    std::shared_ptr<const LinearCodec> codec() const { return codec_; }
    const GmmPrior& prior() const { return prior_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const ChannelProfile& profile() const { return profile_; }

private:
    ExperimentConfig config_;
    std::shared_ptr<const LinearCodec> codec_;
    GmmPrior prior_;
    NoiseSchedule schedule_;
    ChannelProfile profile_;
};

// Deterministic in (master_seed, trial_index). Divergence yields success = false
// with a diagnostic, never an exception.
TrialResult run_trial(const TrialContext& context, int trial_index, TrialArtifacts* artifacts = nullptr);
TrialResult run_trial(const ExperimentConfig& config, int trial_index);

struct CellValues {
    double jr_db;
    double snr_db;
    double rho;
    double w;
    int steps;
    int rounds;
    double lr_start;
};

struct CellResult {
    ExperimentConfig config;
    CellValues values;
    std::vector<TrialResult> trials;
};

// Cells of the Cartesian product of the axes, each axis ascending, in the order
// (jr_db, snr_db, rho, w, S, n_m, eta).
std::vector<ExperimentConfig> expand_cells(const ExperimentConfig& config);
CellValues cell_values(const ExperimentConfig& config);

std::vector<CellResult> sweep(const ExperimentConfig& config);

struct SummaryStats {
    std::size_t count = 0;
    double median = std::numeric_limits<double>::quiet_NaN();
    double mean = std::numeric_limits<double>::quiet_NaN();
    double q25 = std::numeric_limits<double>::quiet_NaN();
    double q75 = std::numeric_limits<double>::quiet_NaN();
    double iqr() const { return q75 - q25; }
};

// NaN entries are skipped; quantiles interpolate linearly between order statistics.
SummaryStats summarize(std::vector<double> values);

inline constexpr std::string_view kResultsHeader =
    "scenario,jr_db,snr_db,rho,w,S,n_m,trial,seed,source_mse,psnr_db,channel_nmse,det_precision,det_recall,success,"
    "wall_time_s";

void write_results_csv(std::ostream& out, const std::vector<CellResult>& cells);
nlohmann::json summary_json(const std::vector<CellResult>& cells);
nlohmann::json resolved_config_json(const ExperimentConfig& config);

// results.csv, config.json, summary.json. Throws IoError with the failing path.
void write_outputs(const std::vector<CellResult>& cells, const ExperimentConfig& config,
                   const std::filesystem::path& out_dir);

}  // namespace ajscc
