#pragma once

#include "coatcast/core.hpp"

#include <compare>
#include <span>
#include <utility>
#include <vector>

namespace coatcast {

/// Peak events: local maxima of the corrosion current above a trailing
/// moving-window quantile.
struct CorrosionEventParams {
    double window_len = 24.0;   // hours
    double quantile = 0.55;
    double local_radius = 3.0;  // hours, on each side

    void validate() const;
    auto operator<=>(const CorrosionEventParams&) const = default;
};

/// Joint wet + contaminated episodes.
struct EnvironmentEventParams {
    double rh_thresh = 70.0;            // % RH
    double cond_thresh = 9500.0;        // uS
    double time_of_wetness_min = 2.0;   // hours
    double contaminant_time_min = 0.5;  // hours

    void validate() const;
    auto operator<=>(const EnvironmentEventParams&) const = default;
};

struct HybridEventParams {
    CorrosionEventParams corrosion{};
    EnvironmentEventParams environment{70.0, 7000.0, 4.0, 0.5};

    void validate() const;
    auto operator<=>(const HybridEventParams&) const = default;
};

/// One event kind plus the parameters it uses. For corrosion only the
/// corrosion part matters, for environment only the environment part.
struct EventDefinition {
    EventKind kind = EventKind::corrosion;
    HybridEventParams params{};

    [[nodiscard]] static EventDefinition corrosion(CorrosionEventParams p = {});
    [[nodiscard]] static EventDefinition environment(EnvironmentEventParams p = {});
    [[nodiscard]] static EventDefinition hybrid(HybridEventParams p = {});

    /// Lexicographic order over the parameters relevant to `kind`.
    [[nodiscard]] bool params_less(const EventDefinition& other) const;
    bool operator==(const EventDefinition&) const = default;
};

[[nodiscard]] EventSequence extract_corrosion_events(const TimeSeries& current,
                                                     const CorrosionEventParams& p = {},
                                                     std::string sensor_id = {});

[[nodiscard]] EventSequence extract_environment_events(const TimeSeries& rh,
                                                       const TimeSeries& cond,
                                                       const EnvironmentEventParams& p = {},
                                                       std::string sensor_id = {});

[[nodiscard]] EventSequence extract_hybrid_events(const TimeSeries& current,
                                                  const TimeSeries& rh,
                                                  const TimeSeries& cond,
                                                  const HybridEventParams& p = {},
                                                  std::string sensor_id = {});

/// Dispatches on the definition's kind using the record's channels.
[[nodiscard]] EventSequence extract_events(const SensorRecord& record, const EventDefinition& def);

/// Sample indices of corrosion events (before any gating).
[[nodiscard]] std::vector<std::size_t> corrosion_event_indices(const TimeSeries& current,
                                                               const CorrosionEventParams& p);

/// Per-sample flag: a joint exposure episode has satisfied both persistence
/// minima and not yet been broken.
[[nodiscard]] std::vector<bool> environment_active_mask(const TimeSeries& rh,
                                                        const TimeSeries& cond,
                                                        const EnvironmentEventParams& p);

// ---------------------------------------------------------------------------
// Metrics at failure

[[nodiscard]] std::vector<std::size_t> counts_at_failure(std::span<const EventSequence> seqs,
                                                         std::span<const FailureLabel> labels);

struct EventStats {
    double mean_count_at_failure = 0.0;
    double cv = 0.0;
    double pearson_ttf = 0.0;
    double spearman_ttf = 0.0;
};

/// CV (sample std / mean) of events at failure, and correlations between the
/// running event count and the time remaining to failure, pooled over every
/// event at or before its sensor's failure time.
[[nodiscard]] EventStats event_stats(std::span<const EventSequence> seqs,
                                     std::span<const FailureLabel> labels);

/// Same statistics for accumulated charge, evaluated at every sample time.
[[nodiscard]] EventStats charge_stats(std::span<const SensorRecord> records,
                                      std::span<const FailureLabel> labels);

[[nodiscard]] std::vector<double> charge_at_failure(std::span<const SensorRecord> records,
                                                    std::span<const FailureLabel> labels);

// ---------------------------------------------------------------------------
// Parameter calibration

struct GridPoint {
    EventDefinition definition;
    double cv = 0.0;           // +inf when every sensor has zero events
    double mean_count = 0.0;
};

struct GridSearchResult {
    EventDefinition best;
    std::vector<GridPoint> surface; // same order as the input grid
};

using CalibrationSensor = std::pair<SensorRecord, FailureLabel>;

/// Minimises the CV of events at failure over the grid. Ties go to fewer
/// mean events, then to the lexicographically smaller parameters. Hybrid
/// grids must hold the corrosion parameters fixed.
[[nodiscard]] GridSearchResult grid_search_params(std::span<const EventDefinition> grid,
                                                  std::span<const CalibrationSensor> calibration,
                                                  EventKind kind);

} // namespace coatcast
