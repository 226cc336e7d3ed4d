#include "coatcast/synth.hpp"

#include "coatcast/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace coatcast::synth {

namespace {

bool inside_any(double t, const std::vector<Episode>& episodes) {
    return std::ranges::any_of(episodes, [t](const Episode& e) { return t >= e.start && t < e.end; });
}

std::size_t sample_count(const SynthSpec& spec) {
    return static_cast<std::size_t>(std::llround(spec.n_days * 24.0 / spec.sample_period));
}

double snap(double t, double dt) {
    return static_cast<double>(std::llround(t / dt)) * dt;
}

double truncated_normal(std::mt19937_64& rng, double mean, double sigma) {
    if (!(sigma > 0.0)) {
        return mean;
    }
    std::normal_distribution<double> normal(mean, sigma);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const double x = normal(rng);
        if (x > 0.0) {
            return x;
        }
    }
    throw SampleError("mark distribution has almost no positive mass");
}

} // namespace

void SynthSpec::validate() const {
    if (n_days < 2) {
        throw DomainError("synthetic sensors need at least two days");
    }
    if (!(sample_period > 0.0) || sample_period > 1.0) {
        throw DomainError("sample period must lie in (0, 1] hours");
    }
    if (tau_by_day.size() != 1 && tau_by_day.size() != static_cast<std::size_t>(n_days)) {
        throw DomainError("tau profile needs one value or one per day");
    }
    if (!std::ranges::all_of(tau_by_day, [](double t) { return t > 0.0; })) {
        throw DomainError("planted tau must be positive");
    }
    if (change_day && (*change_day < 0 || *change_day >= n_days)) {
        throw DomainError("change day must fall inside the experiment");
    }
    const double end = n_days * 24.0;
    for (const auto& p : peaks) {
        if (!(p.time >= 0.0 && p.time < end) || !(p.amplitude > 0.0)) {
            throw DomainError("peaks need positive amplitude inside the experiment");
        }
    }
    if (!(baseline >= 0.0) || !(rise_hours > 0.0) || !(noise_sigma >= 0.0)) {
        throw DomainError("baseline, rise time and noise must be non-negative");
    }
    for (const auto* list : {&rh_episodes, &cond_episodes}) {
        for (const auto& e : *list) {
            if (!(e.end > e.start)) {
                throw DomainError("episodes need end > start");
            }
        }
    }
    if (!(rh_low >= 0.0 && rh_high <= 100.0) || !(cond_low >= 0.0 && cond_high >= 0.0)) {
        throw DomainError("environment levels out of range");
    }
}

double SynthSpec::tau_on_day(int day) const {
    return tau_by_day.size() == 1 ? tau_by_day.front() : tau_by_day.at(static_cast<std::size_t>(day));
}

SynthSensor generate_sensor(const SynthSpec& spec) {
    spec.validate();
    const double dt = spec.sample_period;
    const std::size_t n = sample_count(spec);

    GroundTruth truth;
    truth.change_day = spec.change_day;
    truth.rh_episodes = spec.rh_episodes;
    truth.cond_episodes = spec.cond_episodes;
    for (int d = 0; d < spec.n_days; ++d) {
        truth.tau_by_day.push_back(spec.tau_on_day(d));
    }
    for (const auto& p : spec.peaks) {
        double t = snap(p.time, dt);
        if (t >= spec.n_days * 24.0) {
            t -= dt;
        }
        truth.peaks.push_back({t, p.amplitude});
    }
    std::ranges::sort(truth.peaks, {}, &PlantedPeak::time);

    // Peaks grouped by day.
    std::vector<std::vector<PlantedPeak>> by_day(static_cast<std::size_t>(spec.n_days));
    for (const auto& p : truth.peaks) {
        const auto day = std::min(static_cast<std::size_t>(p.time / 24.0), by_day.size() - 1);
        by_day[day].push_back(p);
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);

    std::vector<double> t(n);
    std::vector<double> current(n);
    std::vector<double> rh(n);
    std::vector<double> cond(n);
    std::vector<double> temp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(k) * dt;
        t[k] = tk;
        const auto day = std::min(static_cast<std::size_t>(tk / 24.0), by_day.size() - 1);
        const double tau = truth.tau_by_day[day];
        double value = spec.baseline;
        for (const auto& p : by_day[day]) {
            if (tk >= p.time) {
                value += p.amplitude * std::exp(-(tk - p.time) / tau);
            } else if (tk > p.time - spec.rise_hours) {
                value += p.amplitude * (tk - (p.time - spec.rise_hours)) / spec.rise_hours;
            }
        }
        if (spec.noise_sigma > 0.0) {
            value = std::max(0.0, value + noise(rng));
        }
        current[k] = value;
        rh[k] = inside_any(tk, spec.rh_episodes) ? spec.rh_high : spec.rh_low;
        cond[k] = inside_any(tk, spec.cond_episodes) ? spec.cond_high : spec.cond_low;
        temp[k] = spec.temperature_mean +
                  spec.temperature_amplitude * std::sin(2.0 * std::numbers::pi * tk / 24.0);
    }

    std::vector<TimeSeries> channels;
    channels.emplace_back(Channel::corrosion_current_uA, t, std::move(current));
    channels.emplace_back(Channel::relative_humidity_pct, t, std::move(rh));
    channels.emplace_back(Channel::conductance_uS, t, std::move(cond));
    channels.emplace_back(Channel::temperature_C, t, std::move(temp));
    return {SensorRecord(spec.sensor_id, spec.platform_id, spec.coating, std::move(channels)),
            std::move(truth)};
}

std::vector<double> step_tau_profile(int n_days, double tau_before, double tau_after, int change_day) {
    std::vector<double> taus(static_cast<std::size_t>(std::max(n_days, 0)));
    for (int d = 0; d < n_days; ++d) {
        taus[static_cast<std::size_t>(d)] = d < change_day ? tau_before : tau_after;
    }
    return taus;
}

std::vector<PlantedPeak> daily_peaks(int n_days, double hour_of_day, double amplitude) {
    std::vector<PlantedPeak> peaks;
    for (int d = 0; d < n_days; ++d) {
        peaks.push_back({24.0 * d + hour_of_day, amplitude});
    }
    return peaks;
}

EventSequence generate_hawkes_stream(const HawkesParams& params,
                                     const PeriodicKDE& background,
                                     double mark_mean,
                                     double mark_sigma,
                                     double horizon,
                                     std::uint64_t seed,
                                     EventKind kind,
                                     std::string sensor_id) {
    params.validate();
    if (!(horizon > 0.0)) {
        throw DomainError("stream horizon must be positive");
    }
    if (kind != EventKind::environment && !(mark_mean > 0.0 || mark_sigma > 0.0)) {
        throw DomainError("marks need a positive mean or spread");
    }
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> unit_exp(1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<DegradationEvent> events;
    auto excitation = [&](double at) {
        double sum = 0.0;
        for (const auto& e : events) {
            sum += e.mark * params.beta * std::exp(-params.beta * (at - e.time));
        }
        return params.omega * sum;
    };

    double t = 0.0;
    const double mu_max = background.upper_bound();
    while (true) {
        // The excitation only decays between events, so its value now bounds it until the next one.
        const double bound = params.alpha * mu_max + excitation(t);
        if (!(bound > 0.0)) {
            break;
        }
        t += unit_exp(rng) / bound;
        if (t > horizon) {
            break;
        }
        const double lambda = params.alpha * background(t) + excitation(t);
        if (unit(rng) * bound <= lambda) {
            if (!events.empty() && !(t > events.back().time)) {
                continue;
            }
            const double mark =
                kind == EventKind::environment ? 1.0 : truncated_normal(rng, mark_mean, mark_sigma);
            events.push_back({t, mark});
        }
    }
    return EventSequence(std::move(sensor_id), kind, std::move(events), horizon);
}

Cohort make_cohort(const CohortSpec& spec) {
    if (spec.failure_days.empty()) {
        throw DomainError("cohort needs at least one sensor");
    }
    if (!(spec.slot_probability >= 0.0 && spec.slot_probability <= 1.0)) {
        throw DomainError("slot probability must lie in [0, 1]");
    }
    for (double h : spec.slot_hours) {
        if (!(h >= 0.0 && h + 1.0 < spec.main_peak_hour)) {
            throw DomainError("event slots must come before the main peak");
        }
    }
    Cohort cohort;
    for (std::size_t i = 0; i < spec.failure_days.size(); ++i) {
        const int failure_day = spec.failure_days[i];
        if (failure_day <= 0 || failure_day >= spec.n_days) {
            throw DomainError("failure day must fall inside the experiment");
        }
        std::mt19937_64 rng(spec.seed * 1000003ULL + i);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> jitter(0.0, spec.tau_jitter > 0.0 ? spec.tau_jitter : 1.0);

        SynthSpec s;
        s.sensor_id = "S" + std::to_string(i + 1);
        s.platform_id = "cohort";
        s.n_days = spec.n_days;
        s.sample_period = spec.sample_period;
        s.change_day = failure_day;
        s.tau_by_day = step_tau_profile(spec.n_days, spec.tau_before, spec.tau_after, failure_day);
        if (spec.tau_jitter > 0.0) {
            for (auto& tau : s.tau_by_day) {
                tau = std::max(0.1 * spec.tau_before, tau + jitter(rng));
            }
        }
        for (int d = 0; d < spec.n_days; ++d) {
            for (double h : spec.slot_hours) {
                if (unit(rng) < spec.slot_probability) {
                    const double a = spec.slot_amplitude_min +
                                     (spec.slot_amplitude_max - spec.slot_amplitude_min) * unit(rng);
                    s.peaks.push_back({24.0 * d + h, a});
                }
            }
            s.peaks.push_back({24.0 * d + spec.main_peak_hour, spec.main_amplitude * (0.9 + 0.2 * unit(rng))});
            // Wet and contaminated through the early part of each day.
            s.rh_episodes.push_back({24.0 * d + 2.0, 24.0 * d + 8.0});
            s.cond_episodes.push_back({24.0 * d + 2.5, 24.0 * d + 7.5});
        }
        s.seed = spec.seed + i;
        cohort.specs.push_back(std::move(s));
        cohort.planted_labels.push_back(
            {cohort.specs.back().sensor_id, 24.0 * failure_day, LabelSource::visual});
    }
    return cohort;
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<io::DatasetEntry> entries;
    for (const auto& spec : cohort.specs) {
        const auto sensor = generate_sensor(spec);
        const std::string file = spec.sensor_id + ".csv";
        write_csv(sensor.record, dir / file);
        entries.push_back({{spec.sensor_id, spec.platform_id, spec.coating}, file});
    }
    io::write_dataset_index(entries, dir / "sensors.json");
    write_labels_csv(cohort.planted_labels, dir / "labels.csv");
}

} // namespace coatcast::synth
