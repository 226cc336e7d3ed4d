#include "coatcast/io.hpp"

#include <fstream>

namespace coatcast {

namespace {

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return j.at(key).get<T>();
}

json optional_value(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

} // namespace

void to_json(json& j, const TauSeries& v) {
    j = json{{"sensor_id", v.sensor_id}, {"cycles", json::array()}};
    for (const auto& c : v.cycles) {
        j["cycles"].push_back({{"time_hours", c.time},
                               {"tau_hours", optional_value(c.tau)},
                               {"rmse_uA", optional_value(c.rmse)},
                               {"fit_ok", c.ok}});
    }
}

void from_json(const json& j, TauSeries& v) {
    v.sensor_id = j.at("sensor_id").get<std::string>();
    v.cycles.clear();
    for (const auto& c : j.at("cycles")) {
        v.cycles.push_back({c.at("time_hours").get<double>(), optional_field<double>(c, "tau_hours"),
                            optional_field<double>(c, "rmse_uA"), c.at("fit_ok").get<bool>()});
    }
}

void to_json(json& j, const EventSequence& v) {
    j = json{{"sensor_id", v.sensor_id()},
             {"event_type", to_string(v.kind())},
             {"horizon_hours", v.horizon()},
             {"events", json::array()}};
    for (const auto& e : v.events()) {
        j["events"].push_back({{"time_hours", e.time}, {"mark", e.mark}});
    }
}

EventSequence event_sequence_from_json(const json& j) {
    std::vector<DegradationEvent> events;
    for (const auto& e : j.at("events")) {
        events.push_back({e.at("time_hours").get<double>(), e.at("mark").get<double>()});
    }
    return EventSequence(j.at("sensor_id").get<std::string>(),
                         event_kind_from_string(j.at("event_type").get<std::string>()),
                         std::move(events), j.at("horizon_hours").get<double>());
}

void to_json(json& j, const FailureLabel& v) {
    j = json{{"sensor_id", v.sensor_id}, {"time_hours", v.time}, {"source", to_string(v.source)}};
}

void from_json(const json& j, FailureLabel& v) {
    v.sensor_id = j.at("sensor_id").get<std::string>();
    v.time = j.at("time_hours").get<double>();
    v.source = label_source_from_string(j.value("source", std::string("visual")));
}

void to_json(json& j, const CorrosionEventParams& v) {
    j = json{{"window_len_hours", v.window_len},
             {"quantile", v.quantile},
             {"local_radius_hours", v.local_radius}};
}

void from_json(const json& j, CorrosionEventParams& v) {
    const CorrosionEventParams d;
    v.window_len = j.value("window_len_hours", d.window_len);
    v.quantile = j.value("quantile", d.quantile);
    v.local_radius = j.value("local_radius_hours", d.local_radius);
}

void to_json(json& j, const EnvironmentEventParams& v) {
    j = json{{"rh_thresh_pct", v.rh_thresh},
             {"cond_thresh_uS", v.cond_thresh},
             {"time_of_wetness_min_hours", v.time_of_wetness_min},
             {"contaminant_time_min_hours", v.contaminant_time_min}};
}

void from_json(const json& j, EnvironmentEventParams& v) {
    const EnvironmentEventParams d;
    v.rh_thresh = j.value("rh_thresh_pct", d.rh_thresh);
    v.cond_thresh = j.value("cond_thresh_uS", d.cond_thresh);
    v.time_of_wetness_min = j.value("time_of_wetness_min_hours", d.time_of_wetness_min);
    v.contaminant_time_min = j.value("contaminant_time_min_hours", d.contaminant_time_min);
}

void to_json(json& j, const HybridEventParams& v) {
    j = json{{"corrosion", v.corrosion}, {"environment", v.environment}};
}

void from_json(const json& j, HybridEventParams& v) {
    const HybridEventParams d;
    v.corrosion = j.contains("corrosion") ? j.at("corrosion").get<CorrosionEventParams>() : d.corrosion;
    v.environment =
        j.contains("environment") ? j.at("environment").get<EnvironmentEventParams>() : d.environment;
}

void to_json(json& j, const EventDefinition& v) {
    j = json{{"kind", to_string(v.kind)}};
    switch (v.kind) {
    case EventKind::corrosion:
        j["params"] = v.params.corrosion;
        break;
    case EventKind::environment:
        j["params"] = v.params.environment;
        break;
    case EventKind::hybrid:
        j["params"] = v.params;
        break;
    }
}

void from_json(const json& j, EventDefinition& v) {
    const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    const json params = j.value("params", json::object());
    switch (kind) {
    case EventKind::corrosion:
        v = EventDefinition::corrosion(params.get<CorrosionEventParams>());
        break;
    case EventKind::environment:
        v = EventDefinition::environment(params.get<EnvironmentEventParams>());
        break;
    case EventKind::hybrid:
        v = EventDefinition::hybrid(params.get<HybridEventParams>());
        break;
    }
}

void to_json(json& j, const HawkesParams& v) {
    j = json{{"alpha", v.alpha}, {"omega", v.omega}, {"beta", v.beta}};
}

void from_json(const json& j, HawkesParams& v) {
    v.alpha = j.at("alpha").get<double>();
    v.omega = j.at("omega").get<double>();
    v.beta = j.at("beta").get<double>();
}

void to_json(json& j, const PeriodicKDE& v) {
    j = json{{"period", v.period()}, {"bandwidth", v.bandwidth()}, {"points", v.points()}};
}

PeriodicKDE periodic_kde_from_json(const json& j) {
    const double period = j.value("period", 24.0);
    const auto points = j.value("points", std::vector<double>{});
    if (points.empty()) {
        return PeriodicKDE::uniform(period);
    }
    return PeriodicKDE::fit(points, j.at("bandwidth").get<double>(), period);
}

void to_json(json& j, const MarkModel& v) {
    j = json{{"prior_sigma", v.prior_sigma}, {"prior_mean", optional_value(v.prior_mean)}};
}

void from_json(const json& j, MarkModel& v) {
    v.prior_sigma = j.value("prior_sigma", 1.0);
    v.prior_mean = optional_field<double>(j, "prior_mean");
}

// Flat layout: {event_type, alpha, omega, beta, kde, mark_prior_sigma[, mark_prior_mean]}.
void to_json(json& j, const HawkesModel& v) {
    j = v.params;
    j["event_type"] = to_string(v.event_type);
    j["kde"] = v.background;
    j["mark_prior_sigma"] = v.marks.prior_sigma;
    if (v.marks.prior_mean) {
        j["mark_prior_mean"] = *v.marks.prior_mean;
    }
}

HawkesModel hawkes_model_from_json(const json& j) {
    HawkesModel m;
    m.event_type = event_kind_from_string(j.at("event_type").get<std::string>());
    m.params = j.get<HawkesParams>();
    m.background = j.contains("kde") ? periodic_kde_from_json(j.at("kde")) : PeriodicKDE::uniform();
    m.marks.prior_sigma = j.value("mark_prior_sigma", 1.0);
    m.marks.prior_mean = optional_field<double>(j, "mark_prior_mean");
    m.params.validate();
    return m;
}

void to_json(json& j, const FitHyper& v) {
    j = json{{"lr", v.learning_rate},
             {"grad_clip", v.grad_clip},
             {"beta_radius", v.beta_radius},
             {"beta_points", v.beta_points},
             {"tol", v.tol},
             {"eval_every", v.eval_every},
             {"max_iterations", v.max_iterations},
             {"max_rounds", v.max_rounds},
             {"seed", v.seed}};
}

void from_json(const json& j, FitHyper& v) {
    const FitHyper d;
    v.learning_rate = j.value("lr", d.learning_rate);
    v.grad_clip = j.value("grad_clip", d.grad_clip);
    v.beta_radius = j.value("beta_radius", d.beta_radius);
    v.beta_points = j.value("beta_points", d.beta_points);
    v.tol = j.value("tol", d.tol);
    v.eval_every = j.value("eval_every", d.eval_every);
    v.max_iterations = j.value("max_iterations", d.max_iterations);
    v.max_rounds = j.value("max_rounds", d.max_rounds);
    v.seed = j.value("seed", d.seed);
}

void to_json(json& j, const TraceRecord& v) {
    j = json{{"iteration", v.iteration}, {"phase", v.phase}, {"params", v.params}, {"value", v.value}};
}

void to_json(json& j, const QuantileTargets& v) {
    j = json{{"coating_class", to_string(v.coating_class)},
             {"n_25", v.n_25},
             {"n_75", v.n_75},
             {"source", to_string(v.source)}};
}

void from_json(const json& j, QuantileTargets& v) {
    v.coating_class = coating_from_string(j.at("coating_class").get<std::string>());
    v.n_25 = j.at("n_25").get<double>();
    v.n_75 = j.at("n_75").get<double>();
    v.source = quantile_source_from_string(j.value("source", std::string("empirical")));
    v.validate();
}

void to_json(json& j, const FailureWindow& v) {
    j = json{{"sensor_id", v.sensor_id},
             {"t_lo", v.t_lo},
             {"t_hi", v.t_hi},
             {"censored", {v.censored[0], v.censored[1]}},
             {"method", v.method},
             {"degenerate", v.degenerate}};
}

void from_json(const json& j, FailureWindow& v) {
    v.sensor_id = j.at("sensor_id").get<std::string>();
    v.t_lo = j.at("t_lo").get<double>();
    v.t_hi = j.at("t_hi").get<double>();
    const auto c = j.value("censored", std::vector<bool>{false, false});
    if (c.size() != 2) {
        throw DomainError("window censored flags must have two entries");
    }
    v.censored = {c[0], c[1]};
    v.method = j.value("method", std::string());
    v.degenerate = j.value("degenerate", false);
}

void to_json(json& j, const VarBaselineModel& v) {
    j = json{{"lag_p", v.lag_p},
             {"regularization", to_string(v.regularization)},
             {"reg_strength", v.reg_strength},
             {"intercept_uA", v.intercept},
             {"ar", v.ar},
             {"exogenous", json::object()},
             {"validation_mse", v.validation_mse}};
    for (std::size_t c = 0; c < kExogenousChannels.size(); ++c) {
        j["exogenous"][std::string(to_string(kExogenousChannels[c]))] = v.exogenous.at(c);
    }
}

void from_json(const json& j, VarBaselineModel& v) {
    v.lag_p = j.at("lag_p").get<std::size_t>();
    v.regularization = regularization_from_string(j.at("regularization").get<std::string>());
    v.reg_strength = j.value("reg_strength", 0.0);
    v.intercept = j.at("intercept_uA").get<double>();
    v.ar = j.at("ar").get<std::vector<double>>();
    v.exogenous.clear();
    for (const auto channel : kExogenousChannels) {
        v.exogenous.push_back(j.at("exogenous").at(std::string(to_string(channel))).get<std::vector<double>>());
    }
    v.validation_mse = j.value("validation_mse", 0.0);
    if (v.lag_p < 1 || v.ar.size() != v.lag_p ||
        std::ranges::any_of(v.exogenous, [&](const auto& c) { return c.size() != v.lag_p + 1; })) {
        throw DomainError("VAR model coefficients do not match its lag");
    }
}

void to_json(json& j, const ChargeTargets& v) {
    j = json{{"coating_class", to_string(v.coating_class)}, {"q25_uAh", v.q25}, {"q75_uAh", v.q75}};
}

void from_json(const json& j, ChargeTargets& v) {
    v.coating_class = coating_from_string(j.at("coating_class").get<std::string>());
    v.q25 = j.at("q25_uAh").get<double>();
    v.q75 = j.at("q75_uAh").get<double>();
}

void to_json(json& j, const WindowEvaluation& v) {
    j = json{{"mean_width_hours", optional_value(v.mean_width)},
             {"mean_error_hours", v.mean_error},
             {"n_inside", v.n_inside},
             {"n_outside", v.n_outside}};
}

void to_json(json& j, const ThresholdCalibration& v) {
    j = json{{"b_grid", v.b_grid}, {"p_values", json::array()}, {"b_hat", v.b_hat}};
    for (const auto& p : v.p_values) {
        j["p_values"].push_back(optional_value(p));
    }
}

namespace synth {

void to_json(json& j, const SynthSpec& v) {
    j = json{{"sensor_id", v.sensor_id},
             {"platform_id", v.platform_id},
             {"coating_class", to_string(v.coating)},
             {"n_days", v.n_days},
             {"sample_period_hours", v.sample_period},
             {"tau_by_day_hours", v.tau_by_day},
             {"change_day", v.change_day ? json(*v.change_day) : json(nullptr)},
             {"peaks", json::array()},
             {"baseline_uA", v.baseline},
             {"rise_hours", v.rise_hours},
             {"rh_episodes", json::array()},
             {"cond_episodes", json::array()},
             {"rh_high_pct", v.rh_high},
             {"rh_low_pct", v.rh_low},
             {"cond_high_uS", v.cond_high},
             {"cond_low_uS", v.cond_low},
             {"temperature_mean_C", v.temperature_mean},
             {"temperature_amplitude_C", v.temperature_amplitude},
             {"noise_sigma_uA", v.noise_sigma},
             {"seed", v.seed}};
    for (const auto& p : v.peaks) {
        j["peaks"].push_back({{"time_hours", p.time}, {"amplitude_uA", p.amplitude}});
    }
    for (const auto& e : v.rh_episodes) {
        j["rh_episodes"].push_back({{"start_hours", e.start}, {"end_hours", e.end}});
    }
    for (const auto& e : v.cond_episodes) {
        j["cond_episodes"].push_back({{"start_hours", e.start}, {"end_hours", e.end}});
    }
}

void from_json(const json& j, SynthSpec& v) {
    const SynthSpec d;
    v.sensor_id = j.value("sensor_id", d.sensor_id);
    v.platform_id = j.value("platform_id", d.platform_id);
    v.coating = coating_from_string(j.value("coating_class", std::string(to_string(d.coating))));
    v.n_days = j.value("n_days", d.n_days);
    v.sample_period = j.value("sample_period_hours", d.sample_period);
    v.tau_by_day = j.value("tau_by_day_hours", d.tau_by_day);
    v.change_day = optional_field<int>(j, "change_day");
    v.peaks.clear();
    for (const auto& p : j.value("peaks", json::array())) {
        v.peaks.push_back({p.at("time_hours").get<double>(), p.at("amplitude_uA").get<double>()});
    }
    v.baseline = j.value("baseline_uA", d.baseline);
    v.rise_hours = j.value("rise_hours", d.rise_hours);
    auto episodes = [&](const char* key) {
        std::vector<Episode> out;
        for (const auto& e : j.value(key, json::array())) {
            out.push_back({e.at("start_hours").get<double>(), e.at("end_hours").get<double>()});
        }
        return out;
    };
    v.rh_episodes = episodes("rh_episodes");
    v.cond_episodes = episodes("cond_episodes");
    v.rh_high = j.value("rh_high_pct", d.rh_high);
    v.rh_low = j.value("rh_low_pct", d.rh_low);
    v.cond_high = j.value("cond_high_uS", d.cond_high);
    v.cond_low = j.value("cond_low_uS", d.cond_low);
    v.temperature_mean = j.value("temperature_mean_C", d.temperature_mean);
    v.temperature_amplitude = j.value("temperature_amplitude_C", d.temperature_amplitude);
    v.noise_sigma = j.value("noise_sigma_uA", d.noise_sigma);
    v.seed = j.value("seed", d.seed);
    v.validate();
}

} // namespace synth

namespace io {

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IngestError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

std::vector<DatasetEntry> read_dataset_index(const std::filesystem::path& path) {
    const auto j = read_json(path);
    std::vector<DatasetEntry> entries;
    for (const auto& s : j.at("sensors")) {
        DatasetEntry e;
        e.meta.sensor_id = s.at("sensor_id").get<std::string>();
        e.meta.platform_id = s.value("platform_id", std::string());
        e.meta.coating = coating_from_string(s.value("coating_class", std::string("chromate")));
        e.csv = s.at("csv").get<std::string>();
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_dataset_index(const std::vector<DatasetEntry>& entries, const std::filesystem::path& path) {
    json j{{"sensors", json::array()}};
    for (const auto& e : entries) {
        j["sensors"].push_back({{"sensor_id", e.meta.sensor_id},
                                {"platform_id", e.meta.platform_id},
                                {"coating_class", to_string(e.meta.coating)},
                                {"csv", e.csv}});
    }
    write_json(j, path);
}

} // namespace io

} // namespace coatcast
