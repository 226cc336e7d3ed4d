#pragma once

#include "coatcast/core.hpp"
#include "coatcast/cpd.hpp"
#include "coatcast/events.hpp"
#include "coatcast/hawkes.hpp"
#include "coatcast/io.hpp"
#include "coatcast/predict.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coatcast {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr const char* kSeedEnvVar = "COATCAST_SEED";

enum class Setting { lab, outdoor };

[[nodiscard]] std::string_view to_string(Setting setting) noexcept;
[[nodiscard]] Setting setting_from_string(std::string_view name);

/// Optimiser settings shipped per event model and experimental setting.
[[nodiscard]] FitHyper default_hyper(EventKind kind, Setting setting = Setting::lab);

struct CpdConfig {
    std::size_t window = kDefaultCpdWindow;
    double threshold = kDefaultCpdThreshold;
};

struct HawkesConfig {
    FitHyper hyper;
    double bandwidth = 2.0;        // hours
    double mark_prior_sigma = 1.0; // uA
    double fit_hours = 336.0;      // leading span of each calibration sequence
};

struct PredictConfig {
    std::size_t n_traj = kDefaultTrajectories;
    double max_horizon = 2000.0;
    QuantileSource quantile_mode = QuantileSource::empirical;
    double gaussian_cv = 0.4;
    double observe_hours = 336.0; // observed prefix handed to the forecaster
};

struct SplitConfig {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

struct PipelineConfig {
    std::filesystem::path data_dir;
    Setting setting = Setting::lab;
    EventDefinition events;
    CpdConfig cpd;
    HawkesConfig hawkes;
    PredictConfig predict;
    SplitConfig split;
    /// Which labels drive targets and evaluation: WLCUSUM output or the
    /// dataset's labels.csv.
    LabelSource label_source = LabelSource::data_driven;
    std::uint64_t seed = 0;

    /// Throws ConfigError on overlapping or empty splits and bad values.
    void validate() const;
};

/// Missing fields take the defaults; hawkes_hyper defaults follow the event
/// kind and setting. Throws ConfigError.
[[nodiscard]] PipelineConfig pipeline_config_from_json(const json& j);
[[nodiscard]] json to_json(const PipelineConfig& config);

/// FNV-1a of the canonical JSON form, as 16 hex digits.
[[nodiscard]] std::string config_hash(const PipelineConfig& config);

struct StageRecord {
    std::string name;
    std::string status; // "ok", "failed" or "skipped"
    double wall_seconds = 0.0;
    std::string error;
};

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string seed_source; // "config" or the environment variable
    std::string version{kVersion};
    std::vector<StageRecord> stages;
    bool ok = false;
};

void to_json(json& j, const StageRecord& v);
void to_json(json& j, const RunManifest& v);

inline constexpr std::array<std::string_view, 7> kStageNames{
    "ingest", "tailfit", "detect", "extract", "fit", "predict", "evaluate"};

/// Runs every stage into `out_dir`, writing each artifact and a manifest.
/// Config and dataset problems throw ConfigError before any stage runs; a
/// stage failure stops the run, leaves earlier artifacts in place and is
/// reported in the manifest. Throws Error if another run holds the directory.
RunManifest run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

} // namespace coatcast
