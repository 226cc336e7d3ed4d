#pragma once

#include "coatcast/core.hpp"
#include "coatcast/hawkes.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coatcast {

inline constexpr std::size_t kDefaultTrajectories = 10;
inline constexpr double kLowerQuantile = 0.25;
inline constexpr double kUpperQuantile = 0.75;
inline constexpr double kBaselineTrainHours = 336.0; // first two weeks

struct FailureWindow {
    std::string sensor_id;
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::string method;
    std::array<bool, 2> censored{false, false};
    /// Set when the observed prefix already holds the upper target count.
    bool degenerate = false;

    bool operator==(const FailureWindow&) const = default;
};

enum class QuantileSource { empirical, gaussian };

[[nodiscard]] std::string_view to_string(QuantileSource source) noexcept;
[[nodiscard]] QuantileSource quantile_source_from_string(std::string_view name);

struct QuantileTargets {
    CoatingClass coating_class = CoatingClass::chromate;
    double n_25 = 1.0;
    double n_75 = 1.0;
    QuantileSource source = QuantileSource::empirical;

    /// Throws DomainError unless 0 < n_25 <= n_75.
    void validate() const;
    bool operator==(const QuantileTargets&) const = default;
};

/// Interpolated sample quartiles; needs at least four counts.
[[nodiscard]] QuantileTargets empirical_targets(std::span<const double> counts,
                                                CoatingClass coating = CoatingClass::chromate);

/// mean * (1 -/+ cv * z_0.75), floored at 1.
[[nodiscard]] QuantileTargets gaussian_targets(double mean,
                                               double cv,
                                               CoatingClass coating = CoatingClass::chromate);

/// Same quartiles over any real-valued metric at failure (used for charge).
[[nodiscard]] std::pair<double, double> quartiles(std::span<const double> values);

struct WindowOptions {
    std::size_t n_traj = kDefaultTrajectories;
    double max_horizon = 2000.0;
    std::uint64_t seed = 0; // trajectory i uses seed + i
};

/// Samples n_traj continuations of the observed prefix and averages the
/// first times the cumulative count reaches ceil(n_25) and ceil(n_75).
/// Bounds already met by the prefix are the exact observed event times.
[[nodiscard]] FailureWindow predict_failure_window(const EventSequence& observed,
                                                   const HawkesModel& model,
                                                   const QuantileTargets& targets,
                                                   const WindowOptions& options = {});

// ---------------------------------------------------------------------------
// Linear autoregressive baseline on the corrosion current

enum class Regularization { ols, ridge, lasso };

[[nodiscard]] std::string_view to_string(Regularization reg) noexcept;
[[nodiscard]] Regularization regularization_from_string(std::string_view name);

inline constexpr std::array<Channel, 3> kExogenousChannels{
    Channel::temperature_C, Channel::relative_humidity_pct, Channel::conductance_uS};

/// current_t = intercept + sum_{k=1..p} a_k current_{t-k}
///                       + sum_{c} sum_{k=0..p} b_{c,k} x_{c,t-k}
struct VarBaselineModel {
    std::size_t lag_p = 1;
    Regularization regularization = Regularization::ols;
    double reg_strength = 0.0;
    double intercept = 0.0;
    std::vector<double> ar;                       // size p
    std::vector<std::vector<double>> exogenous;   // [channel][lag 0..p]
    double validation_mse = 0.0;

    [[nodiscard]] double predict_one(std::span<const double> current_history,
                                     const std::array<std::span<const double>, 3>& exog,
                                     std::size_t t) const;
    bool operator==(const VarBaselineModel&) const = default;
};

struct RegCandidate {
    Regularization regularization = Regularization::ols;
    double strength = 0.0;
};

/// Fits on the first `train_hours` of every training record and keeps the
/// (lag, regularization) pair with the lowest one-step validation MSE over
/// the same span of the validation records; ties go to the smaller lag.
/// Candidates whose fit fails (a rank-deficient OLS design) are skipped;
/// throws FitError when none can be fitted.
[[nodiscard]] VarBaselineModel fit_var_baseline(std::span<const SensorRecord> train,
                                                std::span<const SensorRecord> val,
                                                std::span<const std::size_t> lags,
                                                std::span<const RegCandidate> regs,
                                                double train_hours = kBaselineTrainHours);

/// Fits one fixed (lag, regularization) pair.
[[nodiscard]] VarBaselineModel fit_var_fixed(std::span<const SensorRecord> train,
                                             std::size_t lag,
                                             RegCandidate reg,
                                             double train_hours = kBaselineTrainHours);

/// Mean squared one-step prediction error over records truncated at `upto`.
[[nodiscard]] double one_step_mse(const VarBaselineModel& model,
                                  std::span<const SensorRecord> records,
                                  double upto = kBaselineTrainHours);

struct ChargeTargets {
    CoatingClass coating_class = CoatingClass::chromate;
    double q25 = 0.0;
    double q75 = 0.0;
};

/// Quartiles of accumulated charge at failure, per coating class present.
[[nodiscard]] std::vector<ChargeTargets> charge_targets(std::span<const SensorRecord> records,
                                                        std::span<const FailureLabel> labels);

/// Rolls the model forward from the end of the observed prefix with the true
/// exogenous inputs taken from `full` (which must extend past the prefix),
/// feeding back its own current forecasts clamped at zero, and reports the
/// first times the accumulated charge crosses each target. A bound never
/// reached inside the horizon is censored at the last forecast time.
[[nodiscard]] FailureWindow forecast_charge_window(const SensorRecord& full,
                                                   double observed_end,
                                                   const VarBaselineModel& model,
                                                   const ChargeTargets& targets);

// ---------------------------------------------------------------------------
// Evaluation

struct WindowEvaluation {
    std::optional<double> mean_width; // over windows with no censored bound
    double mean_error = 0.0;          // over labels outside their windows
    std::size_t n_inside = 0;
    std::size_t n_outside = 0;
};

/// Throws DomainError without windows or when a window has no label.
[[nodiscard]] WindowEvaluation evaluate_windows(std::span<const FailureWindow> windows,
                                                std::span<const FailureLabel> labels);

} // namespace coatcast
