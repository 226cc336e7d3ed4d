#include "coatcast/events.hpp"

#include "coatcast/parallel.hpp"
#include "coatcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

namespace coatcast {

namespace {

// Persistence comparisons tolerate grid round-off (5-minute steps are not
// exact in binary).
constexpr double kTimeSlack = 1e-9;

void require_same_grid(const TimeSeries& a, const TimeSeries& b) {
    if (!std::ranges::equal(a.timestamps(), b.timestamps())) {
        throw DomainError("event extraction channels must share a timestamp grid");
    }
}

// Type-7 quantile of the values in [first, last) without a full sort.
double window_quantile(std::span<const double> values, double q, std::vector<double>& scratch) {
    scratch.assign(values.begin(), values.end());
    const double pos = q * static_cast<double>(scratch.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<long>(lo), scratch.end());
    const double lo_value = scratch[lo];
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || lo + 1 >= scratch.size()) {
        return lo_value;
    }
    const double hi_value =
        *std::min_element(scratch.begin() + static_cast<long>(lo) + 1, scratch.end());
    return lo_value + frac * (hi_value - lo_value);
}

auto definition_key(const EventDefinition& d) {
    const auto& c = d.params.corrosion;
    const auto& e = d.params.environment;
    switch (d.kind) {
    case EventKind::corrosion:
        return std::make_tuple(c.window_len, c.quantile, c.local_radius, 0.0, 0.0, 0.0, 0.0);
    case EventKind::environment:
        return std::make_tuple(e.rh_thresh, e.cond_thresh, e.time_of_wetness_min,
                               e.contaminant_time_min, 0.0, 0.0, 0.0);
    case EventKind::hybrid:
        break;
    }
    return std::make_tuple(c.window_len, c.quantile, c.local_radius, e.rh_thresh, e.cond_thresh,
                           e.time_of_wetness_min, e.contaminant_time_min);
}

} // namespace

void CorrosionEventParams::validate() const {
    if (!(window_len > 0.0) || !(local_radius > 0.0)) {
        throw DomainError("corrosion event window and radius must be positive");
    }
    if (!(quantile > 0.0 && quantile < 1.0)) {
        throw DomainError("corrosion event quantile must lie in (0, 1)");
    }
}

void EnvironmentEventParams::validate() const {
    if (!(rh_thresh > 0.0 && rh_thresh < 100.0)) {
        throw DomainError("RH threshold must lie in (0, 100)");
    }
    if (!(time_of_wetness_min > 0.0) || !(contaminant_time_min > 0.0)) {
        throw DomainError("persistence durations must be positive");
    }
}

void HybridEventParams::validate() const {
    corrosion.validate();
    environment.validate();
}

EventDefinition EventDefinition::corrosion(CorrosionEventParams p) {
    EventDefinition d;
    d.kind = EventKind::corrosion;
    d.params.corrosion = p;
    return d;
}

EventDefinition EventDefinition::environment(EnvironmentEventParams p) {
    EventDefinition d;
    d.kind = EventKind::environment;
    d.params.environment = p;
    return d;
}

EventDefinition EventDefinition::hybrid(HybridEventParams p) {
    return EventDefinition{EventKind::hybrid, p};
}

bool EventDefinition::params_less(const EventDefinition& other) const {
    return definition_key(*this) < definition_key(other);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> corrosion_event_indices(const TimeSeries& current,
                                                 const CorrosionEventParams& p) {
    p.validate();
    const auto t = current.timestamps();
    const auto x = current.values();
    if (current.end() - current.start() < p.window_len) {
        throw DomainError("series shorter than the corrosion quantile window");
    }
    std::vector<std::size_t> events;
    std::vector<double> scratch;
    std::size_t window_first = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        // Local maximum over +/- radius. A plateau counts once, at its first
        // sample, and only if something in the neighbourhood is lower.
        bool is_max = true;
        bool has_lower = false;
        for (std::size_t j = i; j-- > 0 && t[i] - t[j] <= p.local_radius;) {
            if (x[j] >= x[i]) {
                is_max = false;
                break;
            }
            has_lower = true;
        }
        if (!is_max) {
            continue;
        }
        for (std::size_t j = i + 1; j < n && t[j] - t[i] <= p.local_radius; ++j) {
            if (x[j] > x[i]) {
                is_max = false;
                break;
            }
            has_lower = has_lower || x[j] < x[i];
        }
        if (!is_max || !has_lower) {
            continue;
        }
        while (t[i] - t[window_first] > p.window_len) {
            ++window_first;
        }
        const double threshold =
            window_quantile(x.subspan(window_first, i - window_first + 1), p.quantile, scratch);
        if (x[i] > threshold) {
            events.push_back(i);
        }
    }
    return events;
}

EventSequence extract_corrosion_events(const TimeSeries& current,
                                       const CorrosionEventParams& p,
                                       std::string sensor_id) {
    const auto idx = corrosion_event_indices(current, p);
    std::vector<DegradationEvent> events;
    events.reserve(idx.size());
    for (auto i : idx) {
        events.push_back({current.timestamps()[i], current.values()[i]});
    }
    return EventSequence(std::move(sensor_id), EventKind::corrosion, std::move(events),
                         current.end());
}

namespace {

struct EnvironmentScan {
    std::vector<std::size_t> fire_indices;
    std::vector<bool> active;
};

EnvironmentScan scan_environment(const TimeSeries& rh,
                                 const TimeSeries& cond,
                                 const EnvironmentEventParams& p) {
    p.validate();
    require_same_grid(rh, cond);
    const auto t = rh.timestamps();
    const auto h = rh.values();
    const auto c = cond.values();
    EnvironmentScan scan;
    scan.active.assign(t.size(), false);
    std::optional<double> wet_since;
    std::optional<double> contaminated_since;
    bool latched = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const bool wet = h[i] >= p.rh_thresh;
        const bool contaminated = c[i] >= p.cond_thresh;
        if (latched) {
            if (wet && contaminated) {
                scan.active[i] = true;
                continue;
            }
            latched = false;
            wet_since.reset();
            contaminated_since.reset();
        }
        if (wet) {
            if (!wet_since) {
                wet_since = t[i];
            }
        } else {
            wet_since.reset();
        }
        if (contaminated) {
            if (!contaminated_since) {
                contaminated_since = t[i];
            }
        } else {
            contaminated_since.reset();
        }
        if (wet_since && contaminated_since &&
            t[i] - *wet_since >= p.time_of_wetness_min - kTimeSlack &&
            t[i] - *contaminated_since >= p.contaminant_time_min - kTimeSlack) {
            scan.fire_indices.push_back(i);
            scan.active[i] = true;
            latched = true;
        }
    }
    return scan;
}

} // namespace

std::vector<bool> environment_active_mask(const TimeSeries& rh,
                                          const TimeSeries& cond,
                                          const EnvironmentEventParams& p) {
    return scan_environment(rh, cond, p).active;
}

EventSequence extract_environment_events(const TimeSeries& rh,
                                         const TimeSeries& cond,
                                         const EnvironmentEventParams& p,
                                         std::string sensor_id) {
    const auto scan = scan_environment(rh, cond, p);
    std::vector<DegradationEvent> events;
    for (auto i : scan.fire_indices) {
        events.push_back({rh.timestamps()[i], 1.0});
    }
    return EventSequence(std::move(sensor_id), EventKind::environment, std::move(events), rh.end());
}

EventSequence extract_hybrid_events(const TimeSeries& current,
                                    const TimeSeries& rh,
                                    const TimeSeries& cond,
                                    const HybridEventParams& p,
                                    std::string sensor_id) {
    require_same_grid(current, rh);
    const auto active = environment_active_mask(rh, cond, p.environment);
    std::vector<DegradationEvent> events;
    for (auto i : corrosion_event_indices(current, p.corrosion)) {
        if (active[i]) {
            events.push_back({current.timestamps()[i], current.values()[i]});
        }
    }
    return EventSequence(std::move(sensor_id), EventKind::hybrid, std::move(events), current.end());
}

EventSequence extract_events(const SensorRecord& record, const EventDefinition& def) {
    switch (def.kind) {
    case EventKind::corrosion:
        return extract_corrosion_events(record.channel(Channel::corrosion_current_uA),
                                        def.params.corrosion, record.sensor_id());
    case EventKind::environment:
        return extract_environment_events(record.channel(Channel::relative_humidity_pct),
                                          record.channel(Channel::conductance_uS),
                                          def.params.environment, record.sensor_id());
    case EventKind::hybrid:
        break;
    }
    return extract_hybrid_events(record.channel(Channel::corrosion_current_uA),
                                 record.channel(Channel::relative_humidity_pct),
                                 record.channel(Channel::conductance_uS), def.params,
                                 record.sensor_id());
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> counts_at_failure(std::span<const EventSequence> seqs,
                                           std::span<const FailureLabel> labels) {
    std::vector<std::size_t> counts;
    counts.reserve(seqs.size());
    for (const auto& seq : seqs) {
        const auto* label = find_label(labels, seq.sensor_id());
        if (label == nullptr) {
            throw DomainError("no failure label for sensor " + seq.sensor_id());
        }
        const auto events = seq.events();
        counts.push_back(static_cast<std::size_t>(
            std::count_if(events.begin(), events.end(),
                          [&](const DegradationEvent& e) { return e.time <= label->time; })));
    }
    return counts;
}

namespace {

EventStats finish_stats(std::span<const double> at_failure,
                        std::span<const double> metric,
                        std::span<const double> ttf) {
    EventStats s;
    s.mean_count_at_failure = stats::mean(at_failure);
    if (!(s.mean_count_at_failure > 0.0)) {
        throw StatsError("coefficient of variation undefined: mean at failure is zero");
    }
    s.cv = stats::sample_std(at_failure) / s.mean_count_at_failure;
    s.pearson_ttf = stats::pearson(metric, ttf);
    s.spearman_ttf = stats::spearman(metric, ttf);
    return s;
}

} // namespace

EventStats event_stats(std::span<const EventSequence> seqs, std::span<const FailureLabel> labels) {
    if (seqs.size() < 3) {
        throw StatsError("event statistics need at least three sensors");
    }
    const auto counts = counts_at_failure(seqs, labels);
    std::vector<double> at_failure(counts.begin(), counts.end());
    std::vector<double> metric;
    std::vector<double> ttf;
    for (const auto& seq : seqs) {
        const double failure = find_label(labels, seq.sensor_id())->time;
        std::size_t k = 0;
        for (const auto& e : seq.events()) {
            if (e.time > failure) {
                break;
            }
            ++k;
            metric.push_back(static_cast<double>(k));
            ttf.push_back(failure - e.time);
        }
    }
    return finish_stats(at_failure, metric, ttf);
}

std::vector<double> charge_at_failure(std::span<const SensorRecord> records,
                                      std::span<const FailureLabel> labels) {
    std::vector<double> out;
    for (const auto& r : records) {
        const auto* label = find_label(labels, r.sensor_id());
        if (label == nullptr) {
            throw DomainError("no failure label for sensor " + r.sensor_id());
        }
        const auto& current = r.channel(Channel::corrosion_current_uA);
        out.push_back(accumulated_charge(current, std::min(label->time, current.end())));
    }
    return out;
}

EventStats charge_stats(std::span<const SensorRecord> records, std::span<const FailureLabel> labels) {
    if (records.size() < 3) {
        throw StatsError("charge statistics need at least three sensors");
    }
    const auto at_failure = charge_at_failure(records, labels);
    std::vector<double> metric;
    std::vector<double> ttf;
    for (const auto& r : records) {
        const double failure = find_label(labels, r.sensor_id())->time;
        const auto& current = r.channel(Channel::corrosion_current_uA);
        const auto t = current.timestamps();
        const auto v = current.values();
        double q = 0.0;
        for (std::size_t i = 0; i < t.size() && t[i] <= failure; ++i) {
            if (i > 0) {
                q += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
            }
            metric.push_back(q);
            ttf.push_back(failure - t[i]);
        }
    }
    return finish_stats(at_failure, metric, ttf);
}

// ---------------------------------------------------------------------------

GridSearchResult grid_search_params(std::span<const EventDefinition> grid,
                                    std::span<const CalibrationSensor> calibration,
                                    EventKind kind) {
    if (grid.empty()) {
        throw DomainError("empty parameter grid");
    }
    if (calibration.size() < 3) {
        throw DomainError("grid search needs at least three calibration sensors");
    }
    for (const auto& d : grid) {
        if (d.kind != kind) {
            throw DomainError("grid point kind does not match the searched kind");
        }
        if (kind == EventKind::hybrid && d.params.corrosion != grid.front().params.corrosion) {
            throw DomainError("hybrid grid search holds the corrosion parameters fixed");
        }
    }

    std::vector<FailureLabel> labels;
    for (const auto& [record, label] : calibration) {
        labels.push_back(label);
    }

    // grid x sensor map, reduced per grid point in input order
    const std::size_t n_sensors = calibration.size();
    const auto counts = parallel_map(grid.size() * n_sensors, [&](std::size_t k) {
        const auto& def = grid[k / n_sensors];
        const auto& [record, label] = calibration[k % n_sensors];
        const auto seq = extract_events(record, def);
        return static_cast<double>(counts_at_failure(std::span(&seq, 1), std::span(&label, 1))[0]);
    });

    GridSearchResult result;
    result.surface.reserve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const std::span<const double> c(counts.data() + g * n_sensors, n_sensors);
        GridPoint point{grid[g], std::numeric_limits<double>::infinity(), stats::mean(c)};
        if (point.mean_count > 0.0) {
            point.cv = stats::sample_std(c) / point.mean_count;
        }
        result.surface.push_back(point);
    }
    const auto best = std::min_element(
        result.surface.begin(), result.surface.end(), [](const GridPoint& a, const GridPoint& b) {
            if (a.cv != b.cv) {
                return a.cv < b.cv;
            }
            if (a.mean_count != b.mean_count) {
                return a.mean_count < b.mean_count;
            }
            return a.definition.params_less(b.definition);
        });
    result.best = best->definition;
    return result;
}

} // namespace coatcast
