#include "coatcast/cpd.hpp"
#include "coatcast/errors.hpp"
#include "coatcast/events.hpp"
#include "coatcast/hawkes.hpp"
#include "coatcast/io.hpp"
#include "coatcast/pipeline.hpp"
#include "coatcast/predict.hpp"
#include "coatcast/synth.hpp"
#include "coatcast/tailfit.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace coatcast;

namespace {

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool json_output = false;
};

Globals g;

std::uint64_t seed_or(std::uint64_t fallback) { return g.seed.value_or(fallback); }

/// Writes `result` to --out when given; stdout gets the JSON under --json
/// and a one-line summary otherwise.
void emit(const json& result, const std::string& summary) {
    if (!g.out.empty()) {
        const fs::path out(g.out);
        if (out.has_parent_path()) {
            fs::create_directories(out.parent_path());
        }
        io::write_json(result, out);
    }
    if (g.json_output) {
        std::cout << result.dump(2) << '\n';
    } else if (g.out.empty()) {
        std::cout << result.dump(2) << '\n';
    } else {
        std::cout << summary << " -> " << g.out << '\n';
    }
}

json config_json() { return g.config.empty() ? json::object() : io::read_json(g.config); }

/// Every *.json under `dir` in name order, read as event sequences.
std::vector<EventSequence> load_sequences(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw IngestError("not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::ranges::sort(files);
    std::vector<EventSequence> seqs;
    for (const auto& f : files) {
        seqs.push_back(event_sequence_from_json(io::read_json(f)));
    }
    return seqs;
}

std::vector<SensorRecord> load_dataset(const fs::path& dir) {
    std::vector<SensorRecord> records;
    for (const auto& e : io::read_dataset_index(dir / "sensors.json")) {
        records.push_back(ingest_csv(dir / e.csv, {}, e.meta));
    }
    return records;
}

SensorRecord load_csv(const std::string& path, const std::string& sensor_id, const std::string& coating) {
    SensorMeta meta;
    meta.sensor_id = sensor_id.empty() ? fs::path(path).stem().string() : sensor_id;
    meta.coating = coating_from_string(coating);
    return ingest_csv(path, {}, meta);
}

/// "0..9" or "3" or "1,4,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const auto lo = std::stoull(text.substr(0, dots));
        const auto hi = std::stoull(text.substr(dots + 2));
        if (hi < lo) {
            throw DomainError("empty seed range " + text);
        }
        for (auto s = lo; s <= hi; ++s) {
            seeds.push_back(s);
        }
        return seeds;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        seeds.push_back(std::stoull(item));
    }
    return seeds;
}

/// "ols", "ridge:1.0", "lasso:0.01".
RegCandidate parse_reg(const std::string& text) {
    const auto colon = text.find(':');
    RegCandidate c;
    c.regularization = regularization_from_string(text.substr(0, colon));
    c.strength = colon == std::string::npos ? 0.0 : std::stod(text.substr(colon + 1));
    return c;
}

FitHyper hyper_for(EventKind kind, Setting setting) {
    json hyper = default_hyper(kind, setting);
    const auto cfg = config_json();
    if (cfg.contains("hawkes_hyper")) {
        for (const auto& [k, v] : cfg.at("hawkes_hyper").items()) {
            if (hyper.contains(k)) {
                hyper[k] = v;
            }
        }
    }
    auto h = hyper.get<FitHyper>();
    h.seed = seed_or(cfg.value("seed", std::uint64_t{0}));
    return h;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corrosion sensor failure forecasting"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kVersion));
    app.add_option("--config", g.config, "Pipeline config JSON");
    app.add_option("--out", g.out, "Output file (or directory for run and synth)");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_flag("--json", g.json_output, "Print the result JSON on stdout");

    std::function<void()> action;
    auto on = [&](CLI::App* sub, std::function<void()> fn) {
        sub->callback([&action, fn = std::move(fn)] { action = fn; });
    };

    // ingest
    std::string csv, sensor_id, coating = "chromate", schema_path;
    auto* ingest = app.add_subcommand("ingest", "Read a sensor CSV and write it normalized");
    ingest->add_option("--csv", csv, "Input CSV")->required()->check(CLI::ExistingFile);
    ingest->add_option("--sensor-id", sensor_id, "Sensor id (default: file stem)");
    ingest->add_option("--coating", coating, "chromate or non_chromate");
    ingest->add_option("--schema", schema_path, "JSON {timestamp_column, channel_columns}");
    on(ingest, [&] {
        CsvSchema schema;
        if (!schema_path.empty()) {
            const auto s = io::read_json(schema_path);
            schema.timestamp_column = s.value("timestamp_column", schema.timestamp_column);
            schema.channel_columns = s.value("channel_columns", schema.channel_columns);
        }
        SensorMeta meta;
        meta.sensor_id = sensor_id.empty() ? fs::path(csv).stem().string() : sensor_id;
        meta.coating = coating_from_string(coating);
        const auto record = ingest_csv(csv, schema, meta);
        json channels = json::array();
        for (const auto& [c, _] : record.channels()) {
            channels.push_back(to_string(c));
        }
        const json summary{{"sensor_id", record.sensor_id()},
                           {"rows", record.size()},
                           {"channels", channels},
                           {"end_hours", record.size() ? record.timestamps().back() : 0.0}};
        if (!g.out.empty()) {
            write_csv(record, g.out);
        }
        if (g.json_output || g.out.empty()) {
            std::cout << summary.dump(2) << '\n';
        } else {
            std::cout << record.size() << " rows -> " << g.out << '\n';
        }
    });

    // tailfit
    double period = kDiurnalPeriodHours;
    auto* tailfit = app.add_subcommand("tailfit", "Fit the daily exponential tails of the corrosion current");
    tailfit->add_option("--csv", csv, "Sensor CSV")->required()->check(CLI::ExistingFile);
    tailfit->add_option("--sensor-id", sensor_id, "Sensor id (default: file stem)");
    tailfit->add_option("--period", period, "Cycle length, hours");
    on(tailfit, [&] {
        const auto taus = tau_series(load_csv(csv, sensor_id, coating), period);
        emit(taus, std::to_string(taus.valid_count()) + "/" + std::to_string(taus.cycles.size()) + " cycles fit");
    });

    // detect-failure
    std::string tau_path;
    std::size_t window = kDefaultCpdWindow;
    double threshold = kDefaultCpdThreshold;
    auto* detect = app.add_subcommand("detect-failure", "WLCUSUM change detection on a tau series");
    detect->add_option("--tau", tau_path, "Tau series JSON")->required()->check(CLI::ExistingFile);
    detect->add_option("--window", window, "Trailing window, cycles");
    detect->add_option("--threshold", threshold, "Detection threshold b");
    on(detect, [&] {
        const auto taus = io::read_json(tau_path).get<TauSeries>();
        const auto label = wlcusum_tau(taus, window, threshold);
        const auto path = wlcusum_path(taus, window);
        const json result{{"label", label ? json(*label) : json(nullptr)},
                          {"times_hours", path.times},
                          {"statistic", path.statistic}};
        emit(result, label ? "failure at " + std::to_string(label->time) + " h" : "no failure detected");
    });

    // calibrate-threshold
    std::string groups_path, labels_path, b_grid_text = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0,1.5,2.0";
    auto* calib = app.add_subcommand("calibrate-threshold", "Pick b by matching visual labels across groups");
    calib->add_option("--groups", groups_path, "JSON {group: [tau series paths]}")->required()->check(CLI::ExistingFile);
    calib->add_option("--labels", labels_path, "Visual labels CSV")->required()->check(CLI::ExistingFile);
    calib->add_option("--grid", b_grid_text, "Comma-separated thresholds");
    calib->add_option("--window", window, "Trailing window, cycles");
    on(calib, [&] {
        const auto spec = io::read_json(groups_path);
        const auto base = fs::path(groups_path).parent_path();
        std::map<std::string, std::vector<TauSeries>> groups;
        for (const auto& [name, files] : spec.items()) {
            for (const auto& f : files) {
                groups[name].push_back(io::read_json(base / f.get<std::string>()).get<TauSeries>());
            }
        }
        std::vector<double> grid;
        std::stringstream ss(b_grid_text);
        for (std::string item; std::getline(ss, item, ',');) {
            grid.push_back(std::stod(item));
        }
        const auto cal = calibrate_threshold(groups, read_labels_csv(labels_path), grid, window);
        emit(cal, "b_hat = " + std::to_string(cal.b_hat));
    });

    // extract-events
    std::string kind_name = "corrosion", params_path;
    auto* extract = app.add_subcommand("extract-events", "Turn a sensor CSV into an event sequence");
    extract->add_option("--csv", csv, "Sensor CSV")->required()->check(CLI::ExistingFile);
    extract->add_option("--sensor-id", sensor_id, "Sensor id (default: file stem)");
    extract->add_option("--kind", kind_name, "corrosion, environment or hybrid");
    extract->add_option("--params", params_path, "Event parameter JSON")->check(CLI::ExistingFile);
    on(extract, [&] {
        const json def{{"kind", kind_name},
                       {"params", params_path.empty() ? json::object() : io::read_json(params_path)}};
        const auto seq = extract_events(load_csv(csv, sensor_id, coating), def.get<EventDefinition>());
        emit(seq, std::to_string(seq.size()) + " events");
    });

    // calibrate-events
    std::string grid_path, data_dir;
    auto* cal_events = app.add_subcommand("calibrate-events", "Grid search event parameters for the lowest CV");
    cal_events->add_option("--grid", grid_path, "JSON array of event parameter objects")
        ->required()
        ->check(CLI::ExistingFile);
    cal_events->add_option("--data", data_dir, "Dataset directory with sensors.json and labels.csv")
        ->required()
        ->check(CLI::ExistingDirectory);
    cal_events->add_option("--kind", kind_name, "corrosion, environment or hybrid");
    on(cal_events, [&] {
        const auto kind = event_kind_from_string(kind_name);
        std::vector<EventDefinition> grid;
        for (const auto& p : io::read_json(grid_path)) {
            grid.push_back(json{{"kind", kind_name}, {"params", p}}.get<EventDefinition>());
        }
        const auto labels = read_labels_csv(fs::path(data_dir) / "labels.csv");
        std::vector<CalibrationSensor> calibration;
        for (auto& r : load_dataset(data_dir)) {
            if (const auto* l = find_label(labels, r.sensor_id())) {
                calibration.emplace_back(std::move(r), *l);
            }
        }
        const auto result = grid_search_params(grid, calibration, kind);
        json surface = json::array();
        for (const auto& p : result.surface) {
            surface.push_back({{"definition", p.definition}, {"cv", p.cv}, {"mean_count", p.mean_count}});
        }
        emit(json{{"best", result.best}, {"surface", surface}}, "best of " + std::to_string(grid.size()));
    });

    // fit-hawkes
    std::string train_dir, val_dir, setting_name = "lab";
    double bandwidth = 2.0, mark_sigma = 1.0;
    auto* fit = app.add_subcommand("fit-hawkes", "Maximum likelihood fit of the marked Hawkes model");
    fit->add_option("--train", train_dir, "Directory of training event sequences")->required();
    fit->add_option("--val", val_dir, "Directory of validation event sequences")->required();
    fit->add_option("--setting", setting_name, "lab or outdoor (selects default hyperparameters)");
    fit->add_option("--bandwidth", bandwidth, "Background KDE bandwidth, hours");
    fit->add_option("--mark-sigma", mark_sigma, "Prior mark sigma");
    on(fit, [&] {
        const auto train = load_sequences(train_dir);
        const auto val = load_sequences(val_dir);
        if (train.empty()) {
            throw InitError("no training sequences in " + train_dir);
        }
        HawkesModel model;
        model.event_type = train.front().kind();
        model.background = fit_background(train, bandwidth);
        model.marks.prior_sigma = mark_sigma;
        const auto result =
            fit_mle(train, val, model.background, init_params(train), hyper_for(model.event_type, setting_from_string(setting_name)));
        model.params = result.params;
        std::ostringstream s;
        s << "alpha=" << model.params.alpha << " omega=" << model.params.omega << " beta=" << model.params.beta;
        emit(model, s.str());
    });

    // sample
    std::string model_path, history_path, seeds_text = "0..9";
    double horizon = 0.0;
    auto* sample = app.add_subcommand("sample", "Draw trajectories that continue an event history");
    sample->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    sample->add_option("--history", history_path, "Event sequence JSON")->required()->check(CLI::ExistingFile);
    sample->add_option("--horizon", horizon, "Absolute end time, hours")->required();
    sample->add_option("--seeds", seeds_text, "Seed list: 0..9 or 1,2,3");
    on(sample, [&] {
        const auto model = hawkes_model_from_json(io::read_json(model_path));
        const auto history = event_sequence_from_json(io::read_json(history_path));
        json out = json::array();
        for (const auto s : parse_seeds(seeds_text)) {
            out.push_back(sample_trajectory(history, model, horizon, s));
        }
        emit(out, std::to_string(out.size()) + " trajectories");
    });

    // predict
    std::string targets_path;
    WindowOptions window_options;
    auto* predict = app.add_subcommand("predict", "Failure window from sampled event counts");
    predict->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    predict->add_option("--targets", targets_path, "Quantile targets JSON (object or array)")
        ->required()
        ->check(CLI::ExistingFile);
    predict->add_option("--history", history_path, "Observed event sequence JSON")->required()->check(CLI::ExistingFile);
    predict->add_option("--coating", coating, "Coating class picked from a targets array");
    predict->add_option("--ntraj", window_options.n_traj, "Trajectories");
    predict->add_option("--max-horizon", window_options.max_horizon, "Censoring horizon, hours");
    on(predict, [&] {
        const auto model = hawkes_model_from_json(io::read_json(model_path));
        const auto history = event_sequence_from_json(io::read_json(history_path));
        const auto tj = io::read_json(targets_path);
        QuantileTargets targets;
        if (tj.is_array()) {
            const auto cls = coating_from_string(coating);
            const auto it = std::ranges::find_if(tj, [&](const json& t) {
                return t.get<QuantileTargets>().coating_class == cls;
            });
            if (it == tj.end()) {
                throw DomainError("no targets for coating class " + coating);
            }
            targets = it->get<QuantileTargets>();
        } else {
            targets = tj.get<QuantileTargets>();
        }
        window_options.seed = seed_or(0);
        const auto w = predict_failure_window(history, model, targets, window_options);
        emit(w, "[" + std::to_string(w.t_lo) + ", " + std::to_string(w.t_hi) + "] h");
    });

    // fit-baseline
    std::string lags_text = "1,2,3,4,5", regs_text = "ols,ridge:0.1,ridge:1,ridge:10,lasso:0.001,lasso:0.01,lasso:0.1";
    double train_hours = kBaselineTrainHours;
    auto* baseline = app.add_subcommand("fit-baseline", "VAR baseline with lag and regularization chosen on validation");
    baseline->add_option("--train", train_dir, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
    baseline->add_option("--val", val_dir, "Validation dataset directory")->required()->check(CLI::ExistingDirectory);
    baseline->add_option("--lags", lags_text, "Candidate lags");
    baseline->add_option("--regs", regs_text, "Candidates: ols, ridge:<lambda>, lasso:<lambda>");
    baseline->add_option("--train-hours", train_hours, "Leading hours used for fitting");
    on(baseline, [&] {
        std::vector<std::size_t> lags;
        for (const auto l : parse_seeds(lags_text)) {
            lags.push_back(static_cast<std::size_t>(l));
        }
        std::vector<RegCandidate> regs;
        std::stringstream ss(regs_text);
        for (std::string item; std::getline(ss, item, ',');) {
            regs.push_back(parse_reg(item));
        }
        const auto m = fit_var_baseline(load_dataset(train_dir), load_dataset(val_dir), lags, regs, train_hours);
        emit(m, "lag " + std::to_string(m.lag_p) + ", " + std::string(to_string(m.regularization)));
    });

    // evaluate
    std::string windows_path;
    auto* evaluate = app.add_subcommand("evaluate", "Score failure windows against labels");
    evaluate->add_option("--windows", windows_path, "Windows JSON (object or array)")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--labels", labels_path, "Labels CSV")->required()->check(CLI::ExistingFile);
    on(evaluate, [&] {
        const auto wj = io::read_json(windows_path);
        std::vector<FailureWindow> windows;
        if (wj.is_array()) {
            for (const auto& w : wj) {
                windows.push_back(w.get<FailureWindow>());
            }
        } else {
            windows.push_back(wj.get<FailureWindow>());
        }
        const auto e = evaluate_windows(windows, read_labels_csv(labels_path));
        emit(e, std::to_string(e.n_inside) + "/" + std::to_string(windows.size()) + " inside");
    });

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Synthetic sensors, event streams and cohorts");
    synth_cmd->require_subcommand(1);
    synth_cmd->fallthrough();
    std::string spec_path;
    auto* synth_sensor = synth_cmd->add_subcommand("sensor", "One synthetic sensor CSV plus ground truth");
    synth_sensor->add_option("--spec", spec_path, "SynthSpec JSON")->required()->check(CLI::ExistingFile);
    on(synth_sensor, [&] {
        auto spec = io::read_json(spec_path).get<synth::SynthSpec>();
        spec.seed = seed_or(spec.seed);
        const auto s = synth::generate_sensor(spec);
        if (g.out.empty()) {
            throw ConfigError("synth sensor needs --out <dir>");
        }
        const fs::path dir(g.out);
        fs::create_directories(dir);
        write_csv(s.record, dir / (spec.sensor_id + ".csv"));
        io::write_dataset_index({{{spec.sensor_id, spec.platform_id, spec.coating}, spec.sensor_id + ".csv"}},
                                dir / "sensors.json");
        json peaks = json::array();
        for (const auto& p : s.truth.peaks) {
            peaks.push_back({{"time_hours", p.time}, {"amplitude_uA", p.amplitude}});
        }
        io::write_json(json{{"spec", spec},
                            {"peaks", peaks},
                            {"tau_by_day_hours", s.truth.tau_by_day},
                            {"change_day", s.truth.change_day ? json(*s.truth.change_day) : json(nullptr)}},
                       dir / (spec.sensor_id + ".truth.json"));
        std::cout << s.record.size() << " rows -> " << dir.string() << '\n';
    });

    std::string hawkes_params_path, kde_path;
    double big_t = 336.0, mark_mean = 1.0, mark_sd = 0.0;
    auto* synth_hawkes = synth_cmd->add_subcommand("hawkes", "Simulate one marked Hawkes event stream");
    synth_hawkes->add_option("--params", hawkes_params_path, "JSON {alpha, omega, beta}")
        ->required()
        ->check(CLI::ExistingFile);
    synth_hawkes->add_option("--T", big_t, "Horizon, hours");
    synth_hawkes->add_option("--kde", kde_path, "Background KDE JSON (default uniform)")->check(CLI::ExistingFile);
    synth_hawkes->add_option("--mark-mean", mark_mean, "Mark mean");
    synth_hawkes->add_option("--mark-sigma", mark_sd, "Mark sd");
    synth_hawkes->add_option("--kind", kind_name, "Event kind tag");
    synth_hawkes->add_option("--sensor-id", sensor_id, "Sequence id");
    on(synth_hawkes, [&] {
        const auto params = io::read_json(hawkes_params_path).get<HawkesParams>();
        const auto kde = kde_path.empty() ? PeriodicKDE::uniform() : periodic_kde_from_json(io::read_json(kde_path));
        const auto seq = synth::generate_hawkes_stream(params, kde, mark_mean, mark_sd, big_t, seed_or(0),
                                                       event_kind_from_string(kind_name),
                                                       sensor_id.empty() ? "synth" : sensor_id);
        emit(seq, std::to_string(seq.size()) + " events");
    });

    int cohort_days = synth::CohortSpec{}.n_days;
    auto* synth_cohort = synth_cmd->add_subcommand("cohort", "Six-sensor cohort with planted failures");
    synth_cohort->add_option("--days", cohort_days, "Days per sensor");
    on(synth_cohort, [&] {
        if (g.out.empty()) {
            throw ConfigError("synth cohort needs --out <dir>");
        }
        synth::CohortSpec cs;
        cs.n_days = cohort_days;
        cs.seed = seed_or(cs.seed);
        const auto cohort = synth::make_cohort(cs);
        synth::write_cohort(cohort, g.out);
        std::cout << cohort.specs.size() << " sensors -> " << g.out << '\n';
    });

    // run
    auto* run = app.add_subcommand("run", "Full pipeline from a config file");
    on(run, [&] {
        if (g.config.empty() || g.out.empty()) {
            throw ConfigError("run needs --config <json> and --out <dir>");
        }
        auto cj = io::read_json(g.config);
        if (g.seed) {
            cj["seed"] = *g.seed;
        }
        const auto manifest = run_pipeline(pipeline_config_from_json(cj), g.out);
        if (g.json_output) {
            std::cout << json(manifest).dump(2) << '\n';
        } else {
            for (const auto& s : manifest.stages) {
                std::printf("%-9s %-8s %8.3fs %s\n", s.name.c_str(), s.status.c_str(), s.wall_seconds,
                            s.error.c_str());
            }
        }
        if (!manifest.ok) {
            throw Error("pipeline failed; see " + (fs::path(g.out) / "manifest.json").string());
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        action();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
