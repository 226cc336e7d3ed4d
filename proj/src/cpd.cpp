#include "coatcast/cpd.hpp"

#include "coatcast/parallel.hpp"
#include "coatcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coatcast {

CusumState cusum_step(CusumState state, double llr, double at_time) {
    state.statistic = std::max(state.statistic, 0.0) + llr;
    if (!state.detected_at && state.statistic > state.threshold) {
        state.detected_at = at_time;
        state.detected_index = state.index;
    }
    ++state.index;
    return state;
}

std::vector<double> standardize_baseline(std::span<const double> x, std::size_t w) {
    if (w < 2 || x.size() < w) {
        throw DomainError("baseline standardization needs w >= 2 values");
    }
    const auto baseline = x.first(w);
    const double centre = stats::mean(baseline);
    double scale = stats::sample_std(baseline);
    if (!(scale > 0.0)) {
        scale = 1.0;
    }
    std::vector<double> z(x.size());
    std::transform(x.begin(), x.end(), z.begin(), [&](double v) { return (v - centre) / scale; });
    return z;
}

std::vector<double> wlcusum_increments(std::span<const double> z, std::size_t w) {
    if (w < 2) {
        throw DomainError("window length must be at least 2");
    }
    std::vector<double> llr;
    if (z.size() <= w) {
        return llr;
    }
    llr.reserve(z.size() - w);
    for (std::size_t i = w; i < z.size(); ++i) {
        const double m = std::accumulate(z.begin() + static_cast<long>(i - w),
                                         z.begin() + static_cast<long>(i), 0.0) /
                         static_cast<double>(w);
        llr.push_back(m * (z[i] - 0.5 * m));
    }
    return llr;
}

WlcusumPath wlcusum_path(const TauSeries& taus, std::size_t w) {
    if (w < 2) {
        throw DomainError("window length must be at least 2");
    }
    std::vector<double> values;
    std::vector<double> times;
    for (const auto& c : taus.cycles) {
        if (c.ok && c.tau) {
            values.push_back(*c.tau);
            times.push_back(c.time);
        }
    }
    if (values.size() < w) {
        throw DomainError("sensor " + taus.sensor_id + " has fewer than w valid tau fits");
    }
    const auto z = standardize_baseline(values, w);

    CusumState state;
    state.threshold = INFINITY;
    state.window.assign(z.begin(), z.begin() + static_cast<long>(w));
    WlcusumPath path;
    for (std::size_t i = w; i < z.size(); ++i) {
        const double m = std::accumulate(state.window.begin(), state.window.end(), 0.0) /
                         static_cast<double>(w);
        state = cusum_step(std::move(state), m * (z[i] - 0.5 * m), times[i]);
        state.window.push_back(z[i]);
        state.window.pop_front();
        path.times.push_back(times[i]);
        path.statistic.push_back(state.statistic);
    }
    return path;
}

std::optional<double> first_exceedance(const WlcusumPath& path, double b) {
    for (std::size_t i = 0; i < path.statistic.size(); ++i) {
        if (path.statistic[i] > b) {
            return path.times[i];
        }
    }
    return std::nullopt;
}

std::optional<FailureLabel> wlcusum_tau(const TauSeries& taus, std::size_t w, double b) {
    const auto path = wlcusum_path(taus, w);
    const auto t = first_exceedance(path, b);
    if (!t) {
        return std::nullopt;
    }
    return FailureLabel{taus.sensor_id, *t, LabelSource::data_driven};
}

ThresholdCalibration calibrate_threshold(
    const std::map<std::string, std::vector<TauSeries>>& groups,
    std::span<const FailureLabel> visual_labels,
    std::span<const double> b_grid,
    std::size_t w) {
    if (groups.size() != 2) {
        throw CalibrationError("threshold calibration needs exactly two groups");
    }
    if (b_grid.empty()) {
        throw CalibrationError("empty threshold grid");
    }

    struct Candidate {
        WlcusumPath path;
        double visual_time;
    };
    std::vector<std::vector<Candidate>> per_group;
    for (const auto& [name, series] : groups) {
        std::vector<Candidate> candidates;
        for (const auto& taus : series) {
            const auto* label = find_label(visual_labels, taus.sensor_id);
            if (label == nullptr) {
                continue;
            }
            try {
                candidates.push_back({wlcusum_path(taus, w), label->time});
            } catch (const DomainError&) {
                // too few valid fits: never detects at any b
            }
        }
        per_group.push_back(std::move(candidates));
    }

    ThresholdCalibration out;
    out.b_grid.assign(b_grid.begin(), b_grid.end());
    out.p_values = parallel_map(b_grid.size(), [&](std::size_t k) -> std::optional<double> {
        std::vector<std::vector<double>> diffs(per_group.size());
        for (std::size_t g = 0; g < per_group.size(); ++g) {
            for (const auto& c : per_group[g]) {
                if (const auto t = first_exceedance(c.path, b_grid[k])) {
                    diffs[g].push_back(c.visual_time - *t);
                }
            }
            if (diffs[g].size() < 2) {
                return std::nullopt;
            }
        }
        return stats::welch_t_test(diffs[0], diffs[1]).p_value;
    });

    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < out.b_grid.size(); ++k) {
        const auto& p = out.p_values[k];
        if (!p) {
            continue;
        }
        if (!best || *p > *out.p_values[*best] ||
            (*p == *out.p_values[*best] && out.b_grid[k] < out.b_grid[*best])) {
            best = k;
        }
    }
    if (!best) {
        throw CalibrationError("every threshold was skipped: too few detected sensors per group");
    }
    out.b_hat = out.b_grid[*best];
    return out;
}

} // namespace coatcast
