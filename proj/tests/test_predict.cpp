#include "fixtures.hpp"

#include "coatcast/predict.hpp"
#include "coatcast/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace coatcast;

namespace {

HawkesModel poisson_model(double rate) {
    HawkesModel m;
    m.params = {rate, 0.0, 1.0};
    m.event_type = EventKind::environment;
    return m;
}

} // namespace

TEST(Targets, Empirical) {
    const std::vector<double> counts{10.0, 20.0, 30.0, 40.0, 50.0};
    const auto t = empirical_targets(counts);
    EXPECT_DOUBLE_EQ(t.n_25, 20.0);
    EXPECT_DOUBLE_EQ(t.n_75, 40.0);
    EXPECT_THROW((void)empirical_targets(std::vector<double>{1.0, 2.0, 3.0}), DomainError);
}

TEST(Targets, Gaussian) {
    const auto t = gaussian_targets(100.0, 0.2);
    EXPECT_NEAR(t.n_25, 100.0 * (1.0 - 0.2 * 0.6744897501960817), 1e-10);
    EXPECT_NEAR(t.n_75, 100.0 * (1.0 + 0.2 * 0.6744897501960817), 1e-10);
    EXPECT_EQ(t.source, QuantileSource::gaussian);
    EXPECT_DOUBLE_EQ(gaussian_targets(2.0, 3.0).n_25, 1.0);
    EXPECT_THROW((QuantileTargets{CoatingClass::chromate, 5.0, 4.0}.validate()), DomainError);
}

TEST(Window, DegenerateUsesObservedTimes) {
    const EventSequence seen("s", EventKind::environment,
                             {{1.0, 1.0}, {2.0, 1.0}, {4.0, 1.0}, {7.0, 1.0}, {9.0, 1.0}}, 10.0);
    const QuantileTargets t{CoatingClass::chromate, 1.5, 4.0};
    const auto w = predict_failure_window(seen, poisson_model(1.0), t);
    EXPECT_TRUE(w.degenerate);
    EXPECT_DOUBLE_EQ(w.t_lo, 2.0);
    EXPECT_DOUBLE_EQ(w.t_hi, 7.0);
    EXPECT_EQ(w.method, "hawkes_environment");
}

TEST(Window, PoissonHittingTimes) {
    const EventSequence empty("s", EventKind::environment, {}, 0.0);
    const QuantileTargets t{CoatingClass::chromate, 500.0, 1000.0};
    WindowOptions o;
    o.seed = 3;
    const auto w = predict_failure_window(empty, poisson_model(50.0), t, o);
    EXPECT_NEAR(w.t_lo, 10.0, 0.5);
    EXPECT_NEAR(w.t_hi, 20.0, 1.0);
    EXPECT_FALSE(w.censored[0] || w.censored[1]);
}

TEST(Window, CensoredWhenUnreachable) {
    const EventSequence empty("s", EventKind::environment, {}, 0.0);
    const QuantileTargets t{CoatingClass::chromate, 5.0, 1000.0};
    WindowOptions o;
    o.max_horizon = 50.0;
    const auto w = predict_failure_window(empty, poisson_model(1.0), t, o);
    EXPECT_FALSE(w.censored[0]);
    EXPECT_TRUE(w.censored[1]);
    EXPECT_DOUBLE_EQ(w.t_hi, 50.0);
}

TEST(Window, MonotoneInTargetsAndReproducible) {
    HawkesModel m;
    m.params = {0.3, 0.4, 0.2};
    m.background = PeriodicKDE::fit(std::vector<double>{6.0, 12.0}, 2.0);
    const auto history = synth::generate_hawkes_stream(m.params, m.background, 1.0, 0.3, 48.0, 2);
    WindowOptions o;
    o.seed = 11;
    const double base = static_cast<double>(history.size());
    double previous_hi = 0.0;
    for (double extra : {5.0, 10.0, 20.0, 40.0}) {
        const QuantileTargets t{CoatingClass::chromate, base + 2.0, base + extra};
        const auto w = predict_failure_window(history, m, t, o);
        EXPECT_GE(w.t_hi, previous_hi);
        EXPECT_LE(w.t_lo, w.t_hi);
        previous_hi = w.t_hi;
        EXPECT_EQ(w, predict_failure_window(history, m, t, o));
    }
}

TEST(Evaluate, Fixture) {
    const std::vector<FailureWindow> windows{
        {"a", 10.0, 20.0, "m", {false, false}, false},
        {"b", 10.0, 20.0, "m", {false, false}, false},
        {"c", 10.0, 40.0, "m", {false, true}, false},
    };
    const std::vector<FailureLabel> labels{{"a", 15.0}, {"b", 25.0}, {"c", 5.0}};
    const auto e = evaluate_windows(windows, labels);
    ASSERT_TRUE(e.mean_width);
    EXPECT_DOUBLE_EQ(*e.mean_width, 10.0);
    EXPECT_DOUBLE_EQ(e.mean_error, 5.0);
    EXPECT_EQ(e.n_inside, 1u);
    EXPECT_EQ(e.n_outside, 2u);
    EXPECT_THROW((void)evaluate_windows({}, labels), DomainError);
    EXPECT_THROW((void)evaluate_windows(windows, std::vector<FailureLabel>{{"a", 1.0}}), DomainError);
}

TEST(Evaluate, AllInsideAndTranslation) {
    std::vector<FailureWindow> windows{{"a", 1.0, 4.0, "m"}, {"b", 2.0, 9.0, "m"}};
    std::vector<FailureLabel> labels{{"a", 2.0}, {"b", 9.0}};
    const auto e = evaluate_windows(windows, labels);
    EXPECT_DOUBLE_EQ(e.mean_error, 0.0);
    for (auto& w : windows) {
        w.t_lo += 100.0;
        w.t_hi += 100.0;
    }
    for (auto& l : labels) {
        l.time += 100.0;
    }
    EXPECT_DOUBLE_EQ(*evaluate_windows(windows, labels).mean_width, *e.mean_width);
}

TEST(VarBaseline, RecoversPlantedSystem) {
    const auto sys = fixture::planted_var(3, 77);
    const auto m = fit_var_fixed(std::vector<SensorRecord>{sys.data}, 3, {Regularization::ols, 0.0}, 1e6);
    EXPECT_NEAR(m.intercept, sys.intercept, 1e-6);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(m.ar[k], sys.ar[k], 1e-6);
    }
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k <= 3; ++k) {
            EXPECT_NEAR(m.exogenous[c][k], sys.exog[c][k], 1e-6 * std::max(1.0, std::fabs(sys.exog[c][k])));
        }
    }
    EXPECT_LT(one_step_mse(m, std::vector<SensorRecord>{sys.data}, 1e6), 1e-20);
}

TEST(VarBaseline, OlsBeatsRidgeInSample) {
    auto sys = fixture::planted_var(2, 5);
    // Add noise so the fit is not exact.
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 0.05);
    const auto& r = sys.data;
    std::vector<double> cur(r.channel(Channel::corrosion_current_uA).values().begin(),
                            r.channel(Channel::corrosion_current_uA).values().end());
    for (auto& v : cur) {
        v = std::max(0.0, v + noise(rng));
    }
    auto vec = [&](Channel c) {
        return std::vector<double>(r.channel(c).values().begin(), r.channel(c).values().end());
    };
    const std::vector<double> t(r.timestamps().begin(), r.timestamps().end());
    const std::vector<SensorRecord> recs{fixture::record("n", t, cur, vec(Channel::temperature_C),
                                                         vec(Channel::relative_humidity_pct),
                                                         vec(Channel::conductance_uS))};
    const double ols = one_step_mse(fit_var_fixed(recs, 2, {Regularization::ols, 0.0}, 1e6), recs, 1e6);
    for (double lambda : {0.1, 10.0, 1000.0}) {
        const double ridge = one_step_mse(fit_var_fixed(recs, 2, {Regularization::ridge, lambda}, 1e6), recs, 1e6);
        EXPECT_LE(ols, ridge * (1.0 + 1e-12));
    }
}

TEST(VarBaseline, LassoZeroesIrrelevantChannel) {
    const auto sys = fixture::planted_var(1, 31, 400, true);
    const auto m = fit_var_fixed(std::vector<SensorRecord>{sys.data}, 1, {Regularization::lasso, 1e-2}, 1e6);
    for (double v : m.exogenous[0]) {
        EXPECT_EQ(v, 0.0);
    }
    for (double v : m.exogenous[1]) {
        EXPECT_NE(v, 0.0);
    }
}

TEST(VarBaseline, SelectsPlantedLag) {
    const std::vector<std::size_t> lags{3, 1, 2};
    const std::vector<RegCandidate> regs{{Regularization::ols, 0.0}, {Regularization::ridge, 1.0}};
    const auto train = fixture::planted_var(2, 55, 300, false, "t", 1);
    const auto val = fixture::planted_var(2, 55, 300, false, "v", 2);
    const auto m = fit_var_baseline(std::vector<SensorRecord>{train.data}, std::vector<SensorRecord>{val.data}, lags,
                                    regs, 1e6);
    EXPECT_EQ(m.lag_p, 2u);
    EXPECT_EQ(m.regularization, Regularization::ols);
}

TEST(VarBaseline, SingularDesignThrows) {
    const auto t = fixture::grid(50, 1.0);
    const std::vector<double> flat(50, 1.0);
    const std::vector<SensorRecord> recs{fixture::record("f", t, flat, flat, flat, flat)};
    EXPECT_THROW((void)fit_var_fixed(recs, 1, {Regularization::ols, 0.0}, 1e6), FitError);
    const std::vector<std::size_t> lags{1};
    const std::vector<RegCandidate> regs{{Regularization::ols, 0.0}};
    EXPECT_THROW((void)fit_var_baseline(recs, recs, lags, regs, 1e6), FitError);
}

TEST(ChargeWindow, TargetsBelowObservedUseObservedCrossings) {
    const auto t = fixture::grid(101, 1.0);
    const std::vector<double> two(101, 2.0);
    const auto rec = fixture::record("c", t, two, two, two, two);
    VarBaselineModel m;
    m.lag_p = 1;
    m.intercept = 2.0;
    m.ar = {0.0};
    m.exogenous.assign(3, {0.0, 0.0});
    const auto w = forecast_charge_window(rec, 50.0, m, {CoatingClass::chromate, 20.0, 60.0});
    EXPECT_DOUBLE_EQ(w.t_lo, 10.0);
    EXPECT_DOUBLE_EQ(w.t_hi, 30.0);
    EXPECT_EQ(w.method, "var_ols");
}

TEST(ChargeWindow, RolloutMatchesClosedForm) {
    // current_t = 1 + 0.5 current_{t-1}: from c_0 the rollout approaches 2,
    // and the charge crossing follows from the trapezoid sums.
    const auto t = fixture::grid(201, 1.0);
    std::vector<double> cur(201, 2.0);
    cur[0] = 0.0;
    for (std::size_t i = 1; i < 11; ++i) {
        cur[i] = 1.0 + 0.5 * cur[i - 1];
    }
    const std::vector<double> flat(201, 3.0);
    const auto rec = fixture::record("r", t, cur, flat, flat, flat);
    VarBaselineModel m;
    m.lag_p = 1;
    m.intercept = 1.0;
    m.ar = {0.5};
    m.exogenous.assign(3, {0.0, 0.0});

    std::vector<double> roll(cur.begin(), cur.begin() + 11);
    for (std::size_t i = 11; i < 201; ++i) {
        roll.push_back(1.0 + 0.5 * roll.back());
    }
    auto crossing = [&](double target) {
        double q = 0.0;
        for (std::size_t i = 1; i < roll.size(); ++i) {
            const double seg = 0.5 * (roll[i - 1] + roll[i]);
            if (q + seg >= target) {
                // Quadratic within the segment for a linear interpolant.
                const double a = 0.5 * (roll[i] - roll[i - 1]);
                const double b = roll[i - 1];
                const double c = q - target;
                const double s = a == 0.0 ? -c / b : (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);
                return t[i - 1] + s;
            }
            q += seg;
        }
        return -1.0;
    };
    const ChargeTargets targets{CoatingClass::chromate, 100.0, 250.0};
    const auto w = forecast_charge_window(rec, 10.0, m, targets);
    EXPECT_NEAR(w.t_lo, crossing(100.0), 1e-6);
    EXPECT_NEAR(w.t_hi, crossing(250.0), 1e-6);
    EXPECT_FALSE(w.censored[1]);

    const auto never = forecast_charge_window(rec, 10.0, m, {CoatingClass::chromate, 100.0, 1e6});
    EXPECT_TRUE(never.censored[1]);
    EXPECT_DOUBLE_EQ(never.t_hi, 200.0);
}

TEST(ChargeTargets, QuartilesPerClass) {
    const auto t = fixture::grid(11, 1.0);
    std::vector<SensorRecord> recs;
    std::vector<FailureLabel> labels;
    for (int i = 0; i < 4; ++i) {
        const std::vector<double> c(11, 1.0 + i);
        recs.push_back(fixture::record("s" + std::to_string(i), t, c, c, c, c,
                                       i < 2 ? CoatingClass::chromate : CoatingClass::non_chromate));
        labels.push_back({"s" + std::to_string(i), 10.0});
    }
    const auto targets = charge_targets(recs, labels);
    ASSERT_EQ(targets.size(), 2u);
    EXPECT_DOUBLE_EQ(targets[0].q25, 12.5);
    EXPECT_DOUBLE_EQ(targets[0].q75, 17.5);
    EXPECT_EQ(targets[1].coating_class, CoatingClass::non_chromate);
}
