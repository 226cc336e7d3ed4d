#pragma once

#include "coatcast/core.hpp"
#include "coatcast/cpd.hpp"
#include "coatcast/events.hpp"
#include "coatcast/hawkes.hpp"
#include "coatcast/predict.hpp"
#include "coatcast/synth.hpp"
#include "coatcast/tailfit.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

// JSON forms of every persisted artifact. Field names carry their units.
namespace coatcast {

using json = nlohmann::json;

void to_json(json& j, const TauSeries& v);
void from_json(const json& j, TauSeries& v);

void to_json(json& j, const EventSequence& v);
[[nodiscard]] EventSequence event_sequence_from_json(const json& j);

void to_json(json& j, const FailureLabel& v);
void from_json(const json& j, FailureLabel& v);

void to_json(json& j, const CorrosionEventParams& v);
void from_json(const json& j, CorrosionEventParams& v);
void to_json(json& j, const EnvironmentEventParams& v);
void from_json(const json& j, EnvironmentEventParams& v);
void to_json(json& j, const HybridEventParams& v);
void from_json(const json& j, HybridEventParams& v);
void to_json(json& j, const EventDefinition& v);
void from_json(const json& j, EventDefinition& v);

void to_json(json& j, const HawkesParams& v);
void from_json(const json& j, HawkesParams& v);
void to_json(json& j, const PeriodicKDE& v);
[[nodiscard]] PeriodicKDE periodic_kde_from_json(const json& j);
void to_json(json& j, const MarkModel& v);
void from_json(const json& j, MarkModel& v);
void to_json(json& j, const HawkesModel& v);
[[nodiscard]] HawkesModel hawkes_model_from_json(const json& j);
void to_json(json& j, const FitHyper& v);
void from_json(const json& j, FitHyper& v);
void to_json(json& j, const TraceRecord& v);

void to_json(json& j, const QuantileTargets& v);
void from_json(const json& j, QuantileTargets& v);
void to_json(json& j, const FailureWindow& v);
void from_json(const json& j, FailureWindow& v);
void to_json(json& j, const VarBaselineModel& v);
void from_json(const json& j, VarBaselineModel& v);
void to_json(json& j, const ChargeTargets& v);
void from_json(const json& j, ChargeTargets& v);
void to_json(json& j, const WindowEvaluation& v);
void to_json(json& j, const ThresholdCalibration& v);

namespace synth {
void to_json(json& j, const SynthSpec& v);
void from_json(const json& j, SynthSpec& v);
} // namespace synth

namespace io {

[[nodiscard]] json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; identical input gives identical bytes.
void write_json(const json& j, const std::filesystem::path& path);

/// One entry of a dataset's sensors.json.
struct DatasetEntry {
    SensorMeta meta;
    std::string csv; // relative to the dataset directory
};

[[nodiscard]] std::vector<DatasetEntry> read_dataset_index(const std::filesystem::path& path);
void write_dataset_index(const std::vector<DatasetEntry>& entries, const std::filesystem::path& path);

} // namespace io

} // namespace coatcast
