#pragma once

#include "coatcast/core.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coatcast {

inline constexpr double kDiurnalPeriodHours = 24.0;
inline constexpr std::size_t kMinTailSamples = 5;

/// One fixed-length window of the corrosion current and its decaying tail,
/// taken from the window maximum to the window end.
struct CycleSegment {
    std::size_t cycle_index = 0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::vector<double> times;  // tail samples only
    std::vector<double> values;
    bool enough_samples = false;

    [[nodiscard]] double midpoint() const noexcept {
        return times.empty() ? 0.5 * (window_start + window_end)
                             : 0.5 * (times.front() + times.back());
    }
};

/// y(t) = amplitude * exp(-(t - t0) / tau) + offset, with t0 pinned to the
/// first tail sample.
struct TailFit {
    double amplitude = 0.0;
    double offset = 0.0;
    double t0 = 0.0;
    double tau = 0.0;
    double rmse = 0.0;
    std::size_t cycle_index = 0;
    /// False when tau ran into the search boundary or the amplitude is not positive.
    bool ok = false;

    [[nodiscard]] double operator()(double t) const;
};

struct TauCycle {
    double time = 0.0;            // midpoint of the tail segment
    std::optional<double> tau;    // present iff ok
    std::optional<double> rmse;
    bool ok = false;
};

struct TauSeries {
    std::string sensor_id;
    std::vector<TauCycle> cycles;

    [[nodiscard]] std::size_t valid_count() const noexcept;
};

/// Partitions [0, end] into consecutive whole windows of length `period`
/// and extracts each window's tail. Throws DomainError when fewer than two
/// whole windows fit.
[[nodiscard]] std::vector<CycleSegment> segment_cycles(const TimeSeries& current,
                                                       double period = kDiurnalPeriodHours);

/// Least-squares exponential tail fit. Grid search over tau (32 log-spaced
/// points on [span/20, 5*span]) with (amplitude, offset) solved exactly per
/// tau, then golden-section refinement around the best grid point.
/// Throws DomainError for fewer than five samples and FitError for a
/// constant segment.
[[nodiscard]] TailFit fit_tail(std::span<const double> times,
                               std::span<const double> values,
                               std::size_t cycle_index = 0);
[[nodiscard]] TailFit fit_tail(const CycleSegment& segment);

/// Residual sum of squares of the best (amplitude, offset) for a fixed tau.
[[nodiscard]] double tail_sse_at(std::span<const double> times,
                                 std::span<const double> values,
                                 double tau);

[[nodiscard]] TauSeries tau_series(const SensorRecord& sensor, double period = kDiurnalPeriodHours);

} // namespace coatcast
