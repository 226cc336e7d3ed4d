#pragma once

#include "coatcast/core.hpp"
#include "coatcast/hawkes.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace coatcast::synth {

struct PlantedPeak {
    double time = 0.0;      // hours, snapped to the sampling grid
    double amplitude = 1.0; // uA above baseline
    bool operator==(const PlantedPeak&) const = default;
};

struct Episode {
    double start = 0.0;
    double end = 0.0;
    bool operator==(const Episode&) const = default;
};

/// Chamber-style sensor: each day the current rises linearly to each planted
/// peak and then decays as exp(-(t - peak) / tau_day) towards the baseline,
/// with every contribution cut off at the end of its day. Peaks on the same
/// day share tau, so the decay after the last peak of a day is a single
/// exponential.
struct SynthSpec {
    std::string sensor_id = "synth-0";
    std::string platform_id = "synth";
    CoatingClass coating = CoatingClass::chromate;
    int n_days = 10;
    double sample_period = 5.0 / 60.0;
    /// tau per day; a single value means constant tau.
    std::vector<double> tau_by_day{4.0};
    std::optional<int> change_day;
    std::vector<PlantedPeak> peaks;
    double baseline = 0.1;
    double rise_hours = 1.0;
    std::vector<Episode> rh_episodes;
    std::vector<Episode> cond_episodes;
    double rh_high = 90.0;
    double rh_low = 40.0;
    double cond_high = 12000.0;
    double cond_low = 1000.0;
    double temperature_mean = 25.0;
    double temperature_amplitude = 5.0;
    double noise_sigma = 0.0; // uA, current only
    std::uint64_t seed = 0;

    /// Throws DomainError.
    void validate() const;
    [[nodiscard]] double tau_on_day(int day) const;
    bool operator==(const SynthSpec&) const = default;
};

struct GroundTruth {
    std::vector<PlantedPeak> peaks; // snapped, in time order
    std::vector<double> tau_by_day; // one entry per day
    std::optional<int> change_day;
    std::vector<Episode> rh_episodes;
    std::vector<Episode> cond_episodes;
};

struct SynthSensor {
    SensorRecord record;
    GroundTruth truth;
};

[[nodiscard]] SynthSensor generate_sensor(const SynthSpec& spec);

/// tau_before up to change_day - 1, tau_after from change_day on.
[[nodiscard]] std::vector<double> step_tau_profile(int n_days, double tau_before, double tau_after, int change_day);

/// One peak per day at `hour_of_day` with the given amplitude.
[[nodiscard]] std::vector<PlantedPeak> daily_peaks(int n_days, double hour_of_day, double amplitude);

/// Exact thinning simulation of the ground process on [0, T] with iid marks
/// drawn from a Gaussian truncated to positive values (environment kind: all
/// marks 1). The intensity is summed directly over the history, a separate
/// code path from sample_trajectory.
[[nodiscard]] EventSequence generate_hawkes_stream(const HawkesParams& params,
                                                   const PeriodicKDE& background,
                                                   double mark_mean,
                                                   double mark_sigma,
                                                   double horizon,
                                                   std::uint64_t seed,
                                                   EventKind kind = EventKind::corrosion,
                                                   std::string sensor_id = "synth");

// ---------------------------------------------------------------------------
// Cohorts

/// A set of sensors with planted failure days. Each day has a fixed diurnal
/// peak plus randomly filled earlier event slots; tau steps up on the
/// failure day, and the planted failure time is the start of that day.
struct CohortSpec {
    std::vector<int> failure_days{18, 20, 22, 24, 26, 30};
    int n_days = 40;
    double slot_probability = 0.5;
    std::vector<double> slot_hours{1.0, 7.0};
    double main_peak_hour = 13.0;
    double main_amplitude = 8.0;
    double slot_amplitude_min = 1.5;
    double slot_amplitude_max = 3.0;
    double tau_before = 3.0;
    double tau_after = 5.0;
    double tau_jitter = 0.0; // sd of iid per-day tau noise
    double sample_period = 5.0 / 60.0;
    std::uint64_t seed = 11;
};

struct Cohort {
    std::vector<SynthSpec> specs;
    std::vector<FailureLabel> planted_labels; // source visual
};

[[nodiscard]] Cohort make_cohort(const CohortSpec& spec);

/// Writes sensors.json, one CSV per sensor and labels.csv into `dir`.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

} // namespace coatcast::synth
