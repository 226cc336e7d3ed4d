#include "coatcast/predict.hpp"

#include "coatcast/events.hpp"
#include "coatcast/parallel.hpp"
#include "coatcast/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

namespace coatcast {

std::string_view to_string(QuantileSource source) noexcept {
    return source == QuantileSource::empirical ? "empirical" : "gaussian";
}

QuantileSource quantile_source_from_string(std::string_view name) {
    if (name == "empirical") {
        return QuantileSource::empirical;
    }
    if (name == "gaussian") {
        return QuantileSource::gaussian;
    }
    throw DomainError("unknown quantile source '" + std::string(name) + "'");
}

void QuantileTargets::validate() const {
    if (!(n_25 > 0.0) || !(n_25 <= n_75) || !std::isfinite(n_75)) {
        throw DomainError("quantile targets need 0 < n_25 <= n_75");
    }
}

std::pair<double, double> quartiles(std::span<const double> values) {
    if (values.empty()) {
        throw DomainError("quartiles of an empty sample");
    }
    return {stats::quantile(values, kLowerQuantile), stats::quantile(values, kUpperQuantile)};
}

QuantileTargets empirical_targets(std::span<const double> counts, CoatingClass coating) {
    if (counts.size() < 4) {
        throw DomainError("empirical quantile targets need at least four counts");
    }
    const auto [lo, hi] = quartiles(counts);
    QuantileTargets t{coating, lo, hi, QuantileSource::empirical};
    t.validate();
    return t;
}

QuantileTargets gaussian_targets(double mean, double cv, CoatingClass coating) {
    if (!(mean > 0.0) || !(cv > 0.0)) {
        throw DomainError("gaussian targets need mean > 0 and cv > 0");
    }
    const double z = stats::normal_quantile(kUpperQuantile);
    QuantileTargets t{coating, std::max(1.0, mean * (1.0 - cv * z)), std::max(1.0, mean * (1.0 + cv * z)),
                      QuantileSource::gaussian};
    t.validate();
    return t;
}

FailureWindow predict_failure_window(const EventSequence& observed,
                                     const HawkesModel& model,
                                     const QuantileTargets& targets,
                                     const WindowOptions& options) {
    targets.validate();
    if (options.n_traj == 0) {
        throw DomainError("need at least one trajectory");
    }
    if (!(options.max_horizon > observed.horizon())) {
        throw DomainError("max horizon must exceed the observed horizon");
    }
    const std::array<std::size_t, 2> k{static_cast<std::size_t>(std::ceil(targets.n_25)),
                                       static_cast<std::size_t>(std::ceil(targets.n_75))};
    const auto events = observed.events();

    FailureWindow window;
    window.sensor_id = observed.sensor_id();
    window.method = std::string("hawkes_") + std::string(to_string(model.event_type));
    window.degenerate = events.size() >= k[1];

    std::array<double, 2> bounds{};
    std::array<bool, 2> need_sampling{};
    for (std::size_t b = 0; b < 2; ++b) {
        need_sampling[b] = events.size() < k[b];
        if (!need_sampling[b]) {
            bounds[b] = events[k[b] - 1].time;
        }
    }

    if (need_sampling[0] || need_sampling[1]) {
        using Hits = std::array<std::optional<double>, 2>;
        const auto hits = parallel_map(options.n_traj, [&](std::size_t i) -> Hits {
            const auto traj = sample_trajectory(observed, model, options.max_horizon,
                                                options.seed + i, k[1]);
            const auto all = traj.events();
            Hits h;
            for (std::size_t b = 0; b < 2; ++b) {
                if (all.size() >= k[b]) {
                    h[b] = all[k[b] - 1].time;
                }
            }
            return h;
        });
        for (std::size_t b = 0; b < 2; ++b) {
            if (!need_sampling[b]) {
                continue;
            }
            double sum = 0.0;
            std::size_t reached = 0;
            for (const auto& h : hits) {
                if (h[b]) {
                    sum += *h[b];
                    ++reached;
                }
            }
            if (2 * reached < options.n_traj) {
                bounds[b] = options.max_horizon;
                window.censored[b] = true;
            } else {
                bounds[b] = sum / static_cast<double>(reached);
            }
        }
    }
    window.t_lo = bounds[0];
    window.t_hi = bounds[1];
    return window;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Regularization reg) noexcept {
    switch (reg) {
    case Regularization::ols:
        return "ols";
    case Regularization::ridge:
        return "ridge";
    case Regularization::lasso:
        return "lasso";
    }
    return "ols";
}

Regularization regularization_from_string(std::string_view name) {
    if (name == "ols") {
        return Regularization::ols;
    }
    if (name == "ridge") {
        return Regularization::ridge;
    }
    if (name == "lasso") {
        return Regularization::lasso;
    }
    throw DomainError("unknown regularization '" + std::string(name) + "'");
}

double VarBaselineModel::predict_one(std::span<const double> current_history,
                                     const std::array<std::span<const double>, 3>& exog,
                                     std::size_t t) const {
    double y = intercept;
    for (std::size_t k = 1; k <= lag_p; ++k) {
        y += ar[k - 1] * current_history[t - k];
    }
    for (std::size_t c = 0; c < exog.size(); ++c) {
        for (std::size_t k = 0; k <= lag_p; ++k) {
            y += exogenous[c][k] * exog[c][t - k];
        }
    }
    return y;
}

namespace {

struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

std::size_t feature_count(std::size_t p) {
    return p + kExogenousChannels.size() * (p + 1);
}

std::size_t samples_upto(const SensorRecord& r, double upto) {
    const auto t = r.timestamps();
    return static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), upto) - t.begin());
}

std::array<std::span<const double>, 3> exogenous_of(const SensorRecord& r) {
    std::array<std::span<const double>, 3> out;
    for (std::size_t c = 0; c < kExogenousChannels.size(); ++c) {
        out[c] = r.channel(kExogenousChannels[c]).values();
    }
    return out;
}

Design build_design(std::span<const SensorRecord> records, std::size_t p, double upto) {
    std::size_t rows = 0;
    for (const auto& r : records) {
        const auto n = samples_upto(r, upto);
        rows += n > p ? n - p : 0;
    }
    Design d{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(feature_count(p))),
             Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
    Eigen::Index row = 0;
    for (const auto& r : records) {
        const auto current = r.channel(Channel::corrosion_current_uA).values();
        const auto exog = exogenous_of(r);
        const auto n = samples_upto(r, upto);
        for (std::size_t t = p; t < n; ++t, ++row) {
            Eigen::Index col = 0;
            for (std::size_t k = 1; k <= p; ++k) {
                d.x(row, col++) = current[t - k];
            }
            for (const auto& channel : exog) {
                for (std::size_t k = 0; k <= p; ++k) {
                    d.x(row, col++) = channel[t - k];
                }
            }
            d.y(row) = current[t];
        }
    }
    return d;
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) {
        return z - gamma;
    }
    if (z < -gamma) {
        return z + gamma;
    }
    return 0.0;
}

// Coordinate descent for (1/2n)||y - X b||^2 + lambda ||b||_1 on centred data.
Eigen::VectorXd lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    const auto n = static_cast<double>(x.rows());
    const Eigen::Index m = x.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd residual = y;
    Eigen::VectorXd col_sq(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        col_sq(j) = x.col(j).squaredNorm() / n;
    }
    constexpr int kMaxSweeps = 100000;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (col_sq(j) == 0.0) {
                continue;
            }
            const double old = beta(j);
            const double rho = x.col(j).dot(residual) / n + col_sq(j) * old;
            const double updated = soft_threshold(rho, lambda) / col_sq(j);
            if (updated != old) {
                residual -= (updated - old) * x.col(j);
                beta(j) = updated;
                max_change = std::max(max_change, std::fabs(updated - old));
            }
        }
        if (max_change < 1e-8) {
            return beta;
        }
    }
    throw FitError("lasso coordinate descent did not converge");
}

} // namespace

VarBaselineModel fit_var_fixed(std::span<const SensorRecord> train,
                               std::size_t lag,
                               RegCandidate reg,
                               double train_hours) {
    if (lag < 1) {
        throw DomainError("VAR lag must be at least 1");
    }
    if (!(reg.strength >= 0.0)) {
        throw DomainError("regularization strength must be non-negative");
    }
    if (train.empty()) {
        throw FitError("VAR baseline needs training records");
    }
    const auto d = build_design(train, lag, train_hours);
    if (d.x.rows() <= d.x.cols()) {
        throw FitError("VAR design has fewer rows than coefficients");
    }
    const Eigen::RowVectorXd x_mean = d.x.colwise().mean();
    const double y_mean = d.y.mean();
    const Eigen::MatrixXd xc = d.x.rowwise() - x_mean;
    const Eigen::VectorXd yc = d.y.array() - y_mean;

    Eigen::VectorXd beta;
    switch (reg.regularization) {
    case Regularization::ols: {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        if (qr.rank() < xc.cols()) {
            throw FitError("singular VAR design under OLS; try ridge regularization");
        }
        beta = qr.solve(yc);
        break;
    }
    case Regularization::ridge: {
        Eigen::MatrixXd gram = xc.transpose() * xc;
        gram.diagonal().array() += reg.strength;
        beta = gram.ldlt().solve(xc.transpose() * yc);
        break;
    }
    case Regularization::lasso:
        beta = lasso_cd(xc, yc, reg.strength);
        break;
    }

    VarBaselineModel model;
    model.lag_p = lag;
    model.regularization = reg.regularization;
    model.reg_strength = reg.strength;
    model.intercept = y_mean - x_mean.dot(beta);
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < lag; ++k) {
        model.ar.push_back(beta(col++));
    }
    model.exogenous.assign(kExogenousChannels.size(), {});
    for (auto& coeffs : model.exogenous) {
        for (std::size_t k = 0; k <= lag; ++k) {
            coeffs.push_back(beta(col++));
        }
    }
    return model;
}

double one_step_mse(const VarBaselineModel& model, std::span<const SensorRecord> records, double upto) {
    double sse = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        const auto current = r.channel(Channel::corrosion_current_uA).values();
        const auto exog = exogenous_of(r);
        const auto end = samples_upto(r, upto);
        for (std::size_t t = model.lag_p; t < end; ++t) {
            const double e = current[t] - model.predict_one(current, exog, t);
            sse += e * e;
            ++n;
        }
    }
    if (n == 0) {
        throw DomainError("no samples to score the VAR baseline on");
    }
    return sse / static_cast<double>(n);
}

VarBaselineModel fit_var_baseline(std::span<const SensorRecord> train,
                                  std::span<const SensorRecord> val,
                                  std::span<const std::size_t> lags,
                                  std::span<const RegCandidate> regs,
                                  double train_hours) {
    if (lags.empty() || regs.empty()) {
        throw DomainError("VAR selection needs candidate lags and regularizations");
    }
    std::vector<std::size_t> sorted_lags(lags.begin(), lags.end());
    std::ranges::sort(sorted_lags);

    std::optional<VarBaselineModel> best;
    std::string last_failure;
    for (std::size_t lag : sorted_lags) {
        for (const auto& reg : regs) {
            // A singular design only rules out this candidate. Lags above the
            // true order of an exactly linear system are always singular.
            VarBaselineModel model;
            try {
                model = fit_var_fixed(train, lag, reg, train_hours);
            } catch (const FitError& e) {
                last_failure = e.what();
                continue;
            }
            model.validation_mse = one_step_mse(model, val, train_hours);
            // Round-off sized differences count as ties, which the smaller lag keeps.
            if (!best || model.validation_mse <
                             best->validation_mse - (1e-9 * best->validation_mse + 1e-12)) {
                best = std::move(model);
            }
        }
    }
    if (!best) {
        throw FitError("no VAR candidate could be fitted: " + last_failure);
    }
    return *best;
}

std::vector<ChargeTargets> charge_targets(std::span<const SensorRecord> records,
                                          std::span<const FailureLabel> labels) {
    std::map<CoatingClass, std::vector<double>> by_class;
    const auto charges = charge_at_failure(records, labels);
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_class[records[i].coating_class()].push_back(charges[i]);
    }
    std::vector<ChargeTargets> out;
    for (const auto& [coating, values] : by_class) {
        const auto [lo, hi] = quartiles(values);
        out.push_back({coating, lo, hi});
    }
    return out;
}

FailureWindow forecast_charge_window(const SensorRecord& full,
                                     double observed_end,
                                     const VarBaselineModel& model,
                                     const ChargeTargets& targets) {
    if (!(targets.q25 <= targets.q75)) {
        throw DomainError("charge targets need q25 <= q75");
    }
    const auto t = full.timestamps();
    const auto observed = samples_upto(full, observed_end);
    if (observed <= model.lag_p) {
        throw DomainError("observed prefix is shorter than the VAR lag");
    }
    if (observed >= t.size()) {
        throw DomainError("future exogenous inputs must extend past the observed prefix");
    }
    const auto truth = full.channel(Channel::corrosion_current_uA).values();
    const auto exog = exogenous_of(full);
    std::vector<double> current(truth.begin(), truth.begin() + static_cast<long>(observed));
    current.resize(t.size());
    for (std::size_t j = observed; j < t.size(); ++j) {
        current[j] = std::max(0.0, model.predict_one(current, exog, j));
    }

    FailureWindow window;
    window.sensor_id = full.sensor_id();
    window.method = "var_" + std::string(to_string(model.regularization));
    const std::array<double, 2> goal{targets.q25, targets.q75};
    std::array<std::optional<double>, 2> hit;
    for (std::size_t b = 0; b < 2; ++b) {
        if (goal[b] <= 0.0) {
            hit[b] = t.front();
        }
    }
    double charge = 0.0;
    for (std::size_t j = 1; j < t.size() && !(hit[0] && hit[1]); ++j) {
        const double h = t[j] - t[j - 1];
        const double c0 = current[j - 1];
        const double c1 = current[j];
        const double next = charge + 0.5 * h * (c0 + c1);
        for (std::size_t b = 0; b < 2; ++b) {
            if (hit[b] || !(next >= goal[b])) {
                continue;
            }
            // Charge inside the step is charge + c0 s + (c1 - c0) s^2 / (2h).
            const double need = goal[b] - charge;
            const double slope = (c1 - c0) / h;
            double s = 0.0;
            if (std::fabs(slope) < 1e-15) {
                s = c0 > 0.0 ? need / c0 : h;
            } else {
                const double disc = std::max(0.0, c0 * c0 + 2.0 * slope * need);
                s = (-c0 + std::sqrt(disc)) / slope;
            }
            hit[b] = t[j - 1] + std::clamp(s, 0.0, h);
        }
        charge = next;
    }
    for (std::size_t b = 0; b < 2; ++b) {
        const double value = hit[b] ? *hit[b] : t.back();
        window.censored[b] = !hit[b];
        (b == 0 ? window.t_lo : window.t_hi) = value;
    }
    return window;
}

WindowEvaluation evaluate_windows(std::span<const FailureWindow> windows,
                                  std::span<const FailureLabel> labels) {
    if (windows.empty()) {
        throw DomainError("no windows to evaluate");
    }
    WindowEvaluation out;
    double width_sum = 0.0;
    std::size_t width_n = 0;
    double error_sum = 0.0;
    for (const auto& w : windows) {
        const auto* label = find_label(labels, w.sensor_id);
        if (label == nullptr) {
            throw DomainError("no failure label for sensor " + w.sensor_id);
        }
        if (!w.censored[0] && !w.censored[1]) {
            width_sum += w.t_hi - w.t_lo;
            ++width_n;
        }
        if (label->time < w.t_lo) {
            error_sum += w.t_lo - label->time;
            ++out.n_outside;
        } else if (label->time > w.t_hi) {
            error_sum += label->time - w.t_hi;
            ++out.n_outside;
        } else {
            ++out.n_inside;
        }
    }
    if (width_n > 0) {
        out.mean_width = width_sum / static_cast<double>(width_n);
    }
    if (out.n_outside > 0) {
        out.mean_error = error_sum / static_cast<double>(out.n_outside);
    }
    return out;
}

} // namespace coatcast
