#include "coatcast/tailfit.hpp"

#include "coatcast/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace coatcast {

namespace {

constexpr std::size_t kTauGridPoints = 32;
constexpr double kGridLowFraction = 1.0 / 20.0;
constexpr double kGridHighFactor = 5.0;
constexpr double kGoldenRelTol = 1e-4;
constexpr double kBoundaryRelTol = 1e-3;

struct LinearSolve {
    double amplitude = 0.0;
    double offset = 0.0;
    double sse = 0.0;
};

// Best (amplitude, offset) for the basis exp(-(t - t0)/tau), solved in
// centred form for stability.
LinearSolve solve_linear(std::span<const double> t, std::span<const double> y, double tau) {
    const double t0 = t.front();
    const auto n = static_cast<double>(t.size());
    std::vector<double> x(t.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        x[i] = std::exp(-(t[i] - t0) / tau);
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearSolve r;
    r.amplitude = sxx > 0.0 ? sxy / sxx : 0.0;
    r.offset = my - r.amplitude * mx;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double e = y[i] - (r.amplitude * x[i] + r.offset);
        r.sse += e * e;
    }
    return r;
}

} // namespace

double TailFit::operator()(double t) const {
    return amplitude * std::exp(-(t - t0) / tau) + offset;
}

std::size_t TauSeries::valid_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(cycles.begin(), cycles.end(), [](const TauCycle& c) { return c.ok; }));
}

std::vector<CycleSegment> segment_cycles(const TimeSeries& current, double period) {
    if (!(period > 0.0)) {
        throw DomainError("cycle period must be positive");
    }
    const auto t = current.timestamps();
    const auto y = current.values();
    double spacing = period;
    if (t.size() >= 2) {
        std::vector<double> gaps;
        for (std::size_t i = 1; i < t.size(); ++i) {
            gaps.push_back(t[i] - t[i - 1]);
        }
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<long>(gaps.size() / 2),
                         gaps.end());
        spacing = gaps[gaps.size() / 2];
    }
    // A window counts when the grid reaches its end to within one sample.
    const auto n_windows = static_cast<std::size_t>(std::floor((t.back() + spacing) / period + 1e-9));
    if (t.size() < 2 || n_windows < 2) {
        throw DomainError("series must span at least two cycle periods");
    }

    std::vector<CycleSegment> segments;
    segments.reserve(n_windows);
    std::size_t i = 0;
    for (std::size_t k = 0; k < n_windows; ++k) {
        CycleSegment seg;
        seg.cycle_index = k;
        seg.window_start = static_cast<double>(k) * period;
        seg.window_end = static_cast<double>(k + 1) * period;
        while (i < t.size() && t[i] < seg.window_start) {
            ++i;
        }
        std::size_t j = i;
        while (j < t.size() && t[j] < seg.window_end) {
            ++j;
        }
        if (j > i) {
            // First occurrence of the maximum starts the tail.
            const auto max_it = std::max_element(y.begin() + static_cast<long>(i),
                                                 y.begin() + static_cast<long>(j));
            const auto start = static_cast<std::size_t>(max_it - y.begin());
            seg.times.assign(t.begin() + static_cast<long>(start), t.begin() + static_cast<long>(j));
            seg.values.assign(y.begin() + static_cast<long>(start), y.begin() + static_cast<long>(j));
        }
        seg.enough_samples = seg.times.size() >= kMinTailSamples;
        segments.push_back(std::move(seg));
        i = j;
    }
    return segments;
}

double tail_sse_at(std::span<const double> times, std::span<const double> values, double tau) {
    return solve_linear(times, values, tau).sse;
}

TailFit fit_tail(std::span<const double> times, std::span<const double> values,
                 std::size_t cycle_index) {
    if (times.size() != values.size() || times.size() < kMinTailSamples) {
        throw DomainError("tail fit needs at least five samples");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (*lo_it == *hi_it) {
        throw FitError("degenerate tail segment: constant values");
    }
    const double span = times.back() - times.front();
    const double tau_lo = span * kGridLowFraction;
    const double tau_hi = span * kGridHighFactor;
    const double log_lo = std::log(tau_lo);
    const double log_step = (std::log(tau_hi) - log_lo) / static_cast<double>(kTauGridPoints - 1);

    std::vector<double> grid(kTauGridPoints);
    std::size_t best = 0;
    double best_sse = INFINITY;
    for (std::size_t k = 0; k < kTauGridPoints; ++k) {
        grid[k] = std::exp(log_lo + log_step * static_cast<double>(k));
        const double sse = tail_sse_at(times, values, grid[k]);
        if (sse < best_sse) {
            best_sse = sse;
            best = k;
        }
    }

    // Golden-section on log(tau) over the neighbouring grid cells.
    double a = std::log(grid[best == 0 ? 0 : best - 1]);
    double b = std::log(grid[std::min(best + 1, kTauGridPoints - 1)]);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = tail_sse_at(times, values, std::exp(c));
    double fd = tail_sse_at(times, values, std::exp(d));
    double tau = grid[best];
    double sse = best_sse;
    while (b - a > kGoldenRelTol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = tail_sse_at(times, values, std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = tail_sse_at(times, values, std::exp(d));
        }
        if (fc < sse) {
            sse = fc;
            tau = std::exp(c);
        }
        if (fd < sse) {
            sse = fd;
            tau = std::exp(d);
        }
    }
    const double mid = std::exp(0.5 * (a + b));
    if (const double fm = tail_sse_at(times, values, mid); fm < sse) {
        sse = fm;
        tau = mid;
    }

    const auto lin = solve_linear(times, values, tau);
    TailFit fit;
    fit.amplitude = lin.amplitude;
    fit.offset = lin.offset;
    fit.t0 = times.front();
    fit.tau = tau;
    fit.rmse = std::sqrt(lin.sse / static_cast<double>(times.size()));
    fit.cycle_index = cycle_index;
    const bool at_boundary =
        tau <= tau_lo * (1.0 + kBoundaryRelTol) || tau >= tau_hi * (1.0 - kBoundaryRelTol);
    fit.ok = !at_boundary && fit.amplitude > 0.0;
    return fit;
}

TailFit fit_tail(const CycleSegment& segment) {
    return fit_tail(segment.times, segment.values, segment.cycle_index);
}

TauSeries tau_series(const SensorRecord& sensor, double period) {
    const auto segments = segment_cycles(sensor.channel(Channel::corrosion_current_uA), period);
    TauSeries out;
    out.sensor_id = sensor.sensor_id();
    out.cycles = parallel_map(segments.size(), [&](std::size_t k) {
        const auto& seg = segments[k];
        TauCycle cycle;
        cycle.time = seg.midpoint();
        if (!seg.enough_samples) {
            return cycle;
        }
        try {
            const TailFit fit = fit_tail(seg);
            cycle.rmse = fit.rmse;
            if (fit.ok) {
                cycle.ok = true;
                cycle.tau = fit.tau;
            }
        } catch (const FitError&) {
        }
        return cycle;
    });
    return out;
}

} // namespace coatcast
