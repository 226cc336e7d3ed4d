#include "coatcast/pipeline.hpp"

#include "coatcast/stats.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace coatcast {

namespace fs = std::filesystem;

std::string_view to_string(Setting setting) noexcept {
    return setting == Setting::lab ? "lab" : "outdoor";
}

Setting setting_from_string(std::string_view name) {
    if (name == "lab") {
        return Setting::lab;
    }
    if (name == "outdoor") {
        return Setting::outdoor;
    }
    throw ConfigError("unknown setting '" + std::string(name) + "'");
}

FitHyper default_hyper(EventKind kind, Setting setting) {
    FitHyper h;
    h.grad_clip = 1e3;
    h.beta_points = 20;
    switch (kind) {
    case EventKind::corrosion:
        h.learning_rate = 5e-4;
        h.beta_radius = 1e-2;
        h.tol = 1e-4;
        break;
    case EventKind::environment:
        h.learning_rate = 1e-3;
        h.beta_radius = 1e-3;
        h.tol = 9e-5;
        break;
    case EventKind::hybrid:
        h.learning_rate = 1e-3;
        h.beta_radius = setting == Setting::lab ? 5e-4 : 5e-3;
        h.tol = 1e-4;
        break;
    }
    return h;
}

void PipelineConfig::validate() const {
    std::set<std::string> seen;
    for (const auto* list : {&split.train, &split.val, &split.test}) {
        for (const auto& id : *list) {
            if (!seen.insert(id).second) {
                throw ConfigError("sensor '" + id + "' appears more than once in the split");
            }
        }
    }
    if (split.train.empty() || split.val.empty()) {
        throw ConfigError("split needs at least one train and one validation sensor");
    }
    if (cpd.window < 2 || !(cpd.threshold > 0.0)) {
        throw ConfigError("cpd needs window >= 2 and a positive threshold");
    }
    if (predict.n_traj == 0 || !(predict.max_horizon > predict.observe_hours) ||
        !(predict.observe_hours > 0.0) || !(predict.gaussian_cv > 0.0)) {
        throw ConfigError("invalid predict settings");
    }
    if (!(hawkes.bandwidth > 0.0) || !(hawkes.mark_prior_sigma > 0.0) || !(hawkes.fit_hours > 0.0) ||
        !(hawkes.hyper.learning_rate > 0.0) || !(hawkes.hyper.tol > 0.0) ||
        hawkes.hyper.beta_points == 0) {
        throw ConfigError("invalid hawkes settings");
    }
    try {
        switch (events.kind) {
        case EventKind::corrosion:
            events.params.corrosion.validate();
            break;
        case EventKind::environment:
            events.params.environment.validate();
            break;
        case EventKind::hybrid:
            events.params.validate();
            break;
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("event parameters: ") + e.what());
    }
}

PipelineConfig pipeline_config_from_json(const json& j) {
    try {
        PipelineConfig c;
        c.data_dir = j.at("data_dir").get<std::string>();
        c.setting = setting_from_string(j.value("setting", std::string("lab")));
        const auto kind = event_kind_from_string(j.value("event_kind", std::string("corrosion")));
        json def = {{"kind", to_string(kind)}, {"params", j.value("event_params", json::object())}};
        c.events = def.get<EventDefinition>();

        const auto cpd = j.value("cpd", json::object());
        c.cpd.window = cpd.value("window", c.cpd.window);
        c.cpd.threshold = cpd.value("threshold", c.cpd.threshold);

        const auto hh = j.value("hawkes_hyper", json::object());
        json hyper = default_hyper(kind, c.setting);
        hyper.update(hh);
        c.hawkes.hyper = hyper.get<FitHyper>();
        c.hawkes.bandwidth = hh.value("bandwidth", c.hawkes.bandwidth);
        c.hawkes.mark_prior_sigma = hh.value("mark_prior_sigma", c.hawkes.mark_prior_sigma);
        c.hawkes.fit_hours = hh.value("fit_hours", c.hawkes.fit_hours);

        const auto pr = j.value("predict", json::object());
        c.predict.n_traj = pr.value("n_traj", c.predict.n_traj);
        c.predict.max_horizon = pr.value("max_horizon", c.predict.max_horizon);
        c.predict.quantile_mode =
            quantile_source_from_string(pr.value("quantile_mode", std::string("empirical")));
        c.predict.gaussian_cv = pr.value("gaussian_cv", c.predict.gaussian_cv);
        c.predict.observe_hours = pr.value("observe_hours", c.predict.observe_hours);

        const auto sp = j.at("split");
        c.split.train = sp.value("train", std::vector<std::string>{});
        c.split.val = sp.value("val", std::vector<std::string>{});
        c.split.test = sp.value("test", std::vector<std::string>{});

        c.label_source = label_source_from_string(j.value("label_source", std::string("data_driven")));
        c.seed = j.value("seed", std::uint64_t{0});
        c.validate();
        return c;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid pipeline config: ") + e.what());
    }
}

json to_json(const PipelineConfig& c) {
    json hyper = c.hawkes.hyper;
    hyper["bandwidth"] = c.hawkes.bandwidth;
    hyper["mark_prior_sigma"] = c.hawkes.mark_prior_sigma;
    hyper["fit_hours"] = c.hawkes.fit_hours;
    const json def = c.events;
    return json{{"data_dir", c.data_dir.string()},
                {"setting", to_string(c.setting)},
                {"event_kind", to_string(c.events.kind)},
                {"event_params", def.at("params")},
                {"cpd", {{"window", c.cpd.window}, {"threshold", c.cpd.threshold}}},
                {"hawkes_hyper", hyper},
                {"predict",
                 {{"n_traj", c.predict.n_traj},
                  {"max_horizon", c.predict.max_horizon},
                  {"quantile_mode", to_string(c.predict.quantile_mode)},
                  {"gaussian_cv", c.predict.gaussian_cv},
                  {"observe_hours", c.predict.observe_hours}}},
                {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
                {"label_source", to_string(c.label_source)},
                {"seed", c.seed}};
}

std::string config_hash(const PipelineConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : to_json(config).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void to_json(json& j, const StageRecord& v) {
    j = json{{"name", v.name}, {"status", v.status}, {"wall_seconds", v.wall_seconds}};
    if (!v.error.empty()) {
        j["error"] = v.error;
    }
}

void to_json(json& j, const RunManifest& v) {
    j = json{{"config_hash", v.config_hash},
             {"seed", v.seed},
             {"seed_source", v.seed_source},
             {"version", v.version},
             {"stages", v.stages},
             {"ok", v.ok}};
}

namespace {

class RunLock {
public:
    explicit RunLock(fs::path path) : path_(std::move(path)) {
        file_ = std::fopen(path_.c_str(), "wx");
        if (file_ == nullptr) {
            throw Error("run directory is locked by another pipeline (" + path_.string() + ")");
        }
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() {
        std::fclose(file_);
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
    std::FILE* file_ = nullptr;
};

struct Layout {
    fs::path root;
    fs::path ingest() const { return root / "ingest"; }
    fs::path tailfit() const { return root / "tailfit"; }
    fs::path detect() const { return root / "detect"; }
    fs::path events() const { return root / "events"; }
    fs::path fit() const { return root / "fit"; }
    fs::path predict() const { return root / "predict"; }
    fs::path evaluate() const { return root / "evaluate"; }
};

std::vector<std::string> all_sensors(const SplitConfig& s) {
    std::vector<std::string> ids = s.train;
    ids.insert(ids.end(), s.val.begin(), s.val.end());
    ids.insert(ids.end(), s.test.begin(), s.test.end());
    return ids;
}

std::vector<io::DatasetEntry> load_entries(const PipelineConfig& config) {
    const auto index = config.data_dir / "sensors.json";
    if (!fs::exists(index)) {
        throw ConfigError("data directory has no sensors.json: " + config.data_dir.string());
    }
    std::vector<io::DatasetEntry> entries;
    try {
        entries = io::read_dataset_index(index);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("unreadable sensors.json: ") + e.what());
    }
    std::vector<io::DatasetEntry> used;
    for (const auto& id : all_sensors(config.split)) {
        const auto it = std::ranges::find_if(entries, [&](const auto& e) { return e.meta.sensor_id == id; });
        if (it == entries.end()) {
            throw ConfigError("sensor '" + id + "' is not in " + index.string());
        }
        used.push_back(*it);
    }
    if (config.label_source == LabelSource::visual && !fs::exists(config.data_dir / "labels.csv")) {
        throw ConfigError("visual labels requested but the data directory has no labels.csv");
    }
    return used;
}

SensorRecord load_ingested(const Layout& layout, const io::DatasetEntry& e) {
    return ingest_csv(layout.ingest() / (e.meta.sensor_id + ".csv"), {}, e.meta);
}

EventSequence load_events(const Layout& layout, const std::string& id) {
    return event_sequence_from_json(io::read_json(layout.events() / (id + ".json")));
}

} // namespace

RunManifest run_pipeline(const PipelineConfig& config, const fs::path& out_dir) {
    config.validate();
    const auto entries = load_entries(config);

    RunManifest manifest;
    manifest.config_hash = config_hash(config);
    manifest.seed = config.seed;
    manifest.seed_source = "config";
    if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env != '\0') {
        try {
            manifest.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string(kSeedEnvVar) + " is not an unsigned integer");
        }
        manifest.seed_source = kSeedEnvVar;
    }
    const std::uint64_t seed = manifest.seed;

    fs::create_directories(out_dir);
    RunLock lock(out_dir / ".lock");
    const Layout layout{out_dir};
    io::write_json(to_json(config), out_dir / "config.json");

    std::map<std::string, CoatingClass> coating;
    for (const auto& e : entries) {
        coating[e.meta.sensor_id] = e.meta.coating;
    }
    const auto ids = all_sensors(config.split);
    const std::vector<std::string> calibration = [&] {
        std::vector<std::string> v = config.split.train;
        v.insert(v.end(), config.split.val.begin(), config.split.val.end());
        return v;
    }();

    const std::vector<std::function<void()>> stages{
        // ingest
        [&] {
            fs::create_directories(layout.ingest());
            std::vector<io::DatasetEntry> out;
            for (const auto& e : entries) {
                const auto record = ingest_csv(config.data_dir / e.csv, {}, e.meta);
                write_csv(record, layout.ingest() / (e.meta.sensor_id + ".csv"));
                out.push_back({e.meta, e.meta.sensor_id + ".csv"});
            }
            io::write_dataset_index(out, layout.ingest() / "sensors.json");
        },
        // tailfit
        [&] {
            for (const auto& e : entries) {
                const json j = tau_series(load_ingested(layout, e));
                io::write_json(j, layout.tailfit() / (e.meta.sensor_id + ".json"));
            }
        },
        // detect
        [&] {
            std::vector<FailureLabel> detected;
            for (const auto& id : ids) {
                const auto taus = io::read_json(layout.tailfit() / (id + ".json")).get<TauSeries>();
                try {
                    if (auto label = wlcusum_tau(taus, config.cpd.window, config.cpd.threshold)) {
                        detected.push_back(std::move(*label));
                    }
                } catch (const DomainError&) {
                    // too few valid tau fits: no label for this sensor
                }
            }
            fs::create_directories(layout.detect());
            write_labels_csv(detected, layout.detect() / "labels_data_driven.csv");
            if (config.label_source == LabelSource::visual) {
                const auto visual = read_labels_csv(config.data_dir / "labels.csv");
                write_labels_csv(visual, layout.detect() / "labels.csv");
            } else {
                write_labels_csv(detected, layout.detect() / "labels.csv");
            }
        },
        // extract
        [&] {
            for (const auto& e : entries) {
                const json j = extract_events(load_ingested(layout, e), config.events);
                io::write_json(j, layout.events() / (e.meta.sensor_id + ".json"));
            }
        },
        // fit
        [&] {
            auto leading = [&](const std::vector<std::string>& list) {
                std::vector<EventSequence> seqs;
                for (const auto& id : list) {
                    const auto seq = load_events(layout, id);
                    seqs.push_back(seq.truncated(std::min(config.hawkes.fit_hours, seq.horizon())));
                }
                return seqs;
            };
            const auto train = leading(config.split.train);
            const auto val = leading(config.split.val);

            HawkesModel model;
            model.event_type = config.events.kind;
            model.background = fit_background(train, config.hawkes.bandwidth);
            model.marks.prior_sigma = config.hawkes.mark_prior_sigma;
            auto hyper = config.hawkes.hyper;
            hyper.seed = seed;
            const auto result = fit_mle(train, val, model.background, init_params(train), hyper);
            model.params = result.params;

            io::write_json(model, layout.fit() / "model.json");
            io::write_json(json{{"iterations", result.iterations},
                                {"rounds", result.rounds},
                                {"converged", result.converged},
                                {"trace", result.trace}},
                           layout.fit() / "trace.json");

            const auto labels = read_labels_csv(layout.detect() / "labels.csv");
            std::map<CoatingClass, std::vector<double>> counts;
            for (const auto& id : calibration) {
                if (find_label(labels, id) == nullptr) {
                    continue;
                }
                const std::vector<EventSequence> one{load_events(layout, id)};
                counts[coating.at(id)].push_back(static_cast<double>(counts_at_failure(one, labels).front()));
            }
            if (counts.empty()) {
                throw FitError("no calibration sensor has a failure label");
            }
            json targets = json::array();
            for (const auto& [cls, values] : counts) {
                if (config.predict.quantile_mode == QuantileSource::empirical) {
                    targets.push_back(empirical_targets(values, cls));
                } else {
                    targets.push_back(gaussian_targets(stats::mean(values), config.predict.gaussian_cv, cls));
                }
            }
            io::write_json(targets, layout.fit() / "targets.json");
        },
        // predict
        [&] {
            const auto model = hawkes_model_from_json(io::read_json(layout.fit() / "model.json"));
            std::vector<QuantileTargets> targets;
            for (const auto& t : io::read_json(layout.fit() / "targets.json")) {
                targets.push_back(t.get<QuantileTargets>());
            }
            json windows = json::array();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const auto cls = coating.at(ids[i]);
                const auto it = std::ranges::find(targets, cls, &QuantileTargets::coating_class);
                if (it == targets.end()) {
                    throw DomainError("no quantile targets for coating class " + std::string(to_string(cls)));
                }
                const auto seq = load_events(layout, ids[i]);
                if (!(config.predict.observe_hours < seq.horizon())) {
                    throw DomainError("sensor " + ids[i] + " ends before the observation span");
                }
                WindowOptions options;
                options.n_traj = config.predict.n_traj;
                options.max_horizon = config.predict.max_horizon;
                options.seed = seed + 1000 * static_cast<std::uint64_t>(i);
                windows.push_back(
                    predict_failure_window(seq.truncated(config.predict.observe_hours), model, *it, options));
            }
            io::write_json(windows, layout.predict() / "windows.json");
        },
        // evaluate
        [&] {
            const auto labels = read_labels_csv(layout.detect() / "labels.csv");
            std::vector<FailureWindow> windows;
            for (const auto& w : io::read_json(layout.predict() / "windows.json")) {
                windows.push_back(w.get<FailureWindow>());
            }
            json out = json::object();
            auto score = [&](const std::string& name, const std::vector<std::string>& members) {
                std::vector<FailureWindow> subset;
                for (const auto& w : windows) {
                    if (std::ranges::find(members, w.sensor_id) != members.end() &&
                        find_label(labels, w.sensor_id) != nullptr) {
                        subset.push_back(w);
                    }
                }
                out[name] = subset.empty() ? json(nullptr) : json(evaluate_windows(subset, labels));
            };
            score("train", config.split.train);
            score("val", config.split.val);
            score("test", config.split.test);
            score("all", ids);
            json per_sensor = json::array();
            for (const auto& w : windows) {
                const auto* label = find_label(labels, w.sensor_id);
                per_sensor.push_back({{"sensor_id", w.sensor_id},
                                      {"label_hours", label ? json(label->time) : json(nullptr)},
                                      {"inside", label ? json(label->time >= w.t_lo && label->time <= w.t_hi)
                                                       : json(nullptr)}});
            }
            out["per_sensor"] = per_sensor;
            io::write_json(out, layout.evaluate() / "evaluation.json");
        },
    };

    bool failed = false;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        StageRecord record{std::string(kStageNames[s]), "skipped", 0.0, {}};
        if (!failed) {
            const auto start = std::chrono::steady_clock::now();
            try {
                stages[s]();
                record.status = "ok";
            } catch (const std::exception& e) {
                record.status = "failed";
                record.error = e.what();
                failed = true;
            }
            record.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        manifest.stages.push_back(std::move(record));
    }
    manifest.ok = !failed;
    io::write_json(manifest, out_dir / "manifest.json");
    return manifest;
}

} // namespace coatcast
