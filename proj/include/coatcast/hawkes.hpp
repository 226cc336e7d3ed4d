#pragma once

#include "coatcast/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coatcast {

/// Ground intensity weights of
///   lambda_g(t) = alpha * mu(t) + omega * sum_i m_i * beta * exp(-beta (t - t_i)).
struct HawkesParams {
    double alpha = 0.0; // background rate scale, events/hour (mu has mean one)
    double omega = 0.0; // excitation weight
    double beta = 1.0;  // decay rate, 1/hour

    void validate() const;
    bool operator==(const HawkesParams&) const = default;
};

/// Daily-periodic background shape: wrapped-Gaussian kernel density of event
/// clock times, scaled to have mean one over a period.
class PeriodicKDE {
public:
    /// Constant mu = 1.
    [[nodiscard]] static PeriodicKDE uniform(double period = 24.0);
    /// Throws FitError without events, DomainError on a bad bandwidth.
    [[nodiscard]] static PeriodicKDE fit(std::span<const double> event_times,
                                         double bandwidth,
                                         double period = 24.0);

    [[nodiscard]] double operator()(double t) const;
    /// An upper bound on mu over the whole period.
    [[nodiscard]] double upper_bound() const noexcept { return upper_bound_; }
    [[nodiscard]] double period() const noexcept { return period_; }
    [[nodiscard]] double bandwidth() const noexcept { return bandwidth_; }
    /// Support points folded into [0, period).
    [[nodiscard]] const std::vector<double>& points() const noexcept { return points_; }
    [[nodiscard]] bool is_uniform() const noexcept { return points_.empty(); }

    bool operator==(const PeriodicKDE&) const = default;

private:
    PeriodicKDE() = default;

    double period_ = 24.0;
    double bandwidth_ = 0.0;
    std::vector<double> points_;
    double scale_ = 1.0;
    double upper_bound_ = 1.0;
};

/// Pools every event time of the training sequences.
[[nodiscard]] PeriodicKDE fit_background(std::span<const EventSequence> train_seqs,
                                         double bandwidth = 2.0,
                                         double period = 24.0);

struct MarkStats {
    double mean = 1.0;
    double sigma = 1.0;
    std::size_t count = 0;
};

/// Gaussian conditional mark density with running mean and sample variance
/// of the marks strictly before t.
struct MarkModel {
    double prior_sigma = 1.0;
    std::optional<double> prior_mean;

    /// With fewer than two earlier marks the mean is prior_mean (or the first
    /// mark, or 1) and sigma is prior_sigma.
    [[nodiscard]] MarkStats stats_before(std::span<const DegradationEvent> history, double t) const;
    bool operator==(const MarkModel&) const = default;
};

struct HawkesModel {
    HawkesParams params;
    PeriodicKDE background = PeriodicKDE::uniform();
    MarkModel marks;
    EventKind event_type = EventKind::corrosion;

    bool operator==(const HawkesModel&) const = default;
};

/// Throws DomainError if any history event is at or after t.
[[nodiscard]] double ground_intensity(double t,
                                      std::span<const DegradationEvent> history,
                                      const HawkesModel& model);

[[nodiscard]] double mark_log_density(double m,
                                      double t,
                                      std::span<const DegradationEvent> history,
                                      const HawkesModel& model);

inline constexpr double kLikelihoodStepHours = 1.0;

/// Everything the log-likelihood needs at a fixed beta. With these the
/// objective and its (alpha, omega) gradient are cheap closed forms.
struct LikelihoodTerms {
    std::vector<double> mu_at_events;
    std::vector<double> excitation_at_events; // beta * sum m_j exp(-beta (t_i - t_j))
    double mu_integral = 0.0;                 // midpoint rule
    double excitation_integral = 0.0;         // midpoint rule, cells split at events
};

[[nodiscard]] LikelihoodTerms likelihood_terms(const EventSequence& seq,
                                               const PeriodicKDE& background,
                                               double beta,
                                               double step = kLikelihoodStepHours);

/// Negative log-likelihood; +inf when the intensity vanishes at an event.
[[nodiscard]] double negative_log_likelihood(const LikelihoodTerms& terms, double alpha, double omega);

struct LikelihoodGradient {
    double d_alpha = 0.0;
    double d_omega = 0.0;
};

/// Gradient of the log-likelihood with respect to (alpha, omega).
[[nodiscard]] LikelihoodGradient log_likelihood_gradient(const LikelihoodTerms& terms,
                                                         double alpha,
                                                         double omega);

/// Sum of log-intensities at events minus the midpoint-rule integral over
/// [0, horizon] on a `step` grid (excitation cells also break at events). Throws LikelihoodError when the intensity is zero at an event.
[[nodiscard]] double log_likelihood(const EventSequence& seq,
                                    const HawkesModel& model,
                                    double step = kLikelihoodStepHours);

// ---------------------------------------------------------------------------
// Initialisation

/// Cluster id per time (sorted input), -1 for noise. One-dimensional DBSCAN
/// with inclusive eps neighbourhoods.
[[nodiscard]] std::vector<int> dbscan_1d(std::span<const double> sorted_times,
                                         double eps,
                                         std::size_t min_pts = 2);

/// DBSCAN-derived starting point: alpha = events / hours, omega = clusters /
/// events, beta = 1 / mean cluster duration. Throws InitError with fewer
/// than two events or no sequence holding two events.
[[nodiscard]] HawkesParams init_params(std::span<const EventSequence> train_seqs);

// ---------------------------------------------------------------------------
// Maximum likelihood

struct FitHyper {
    double learning_rate = 5e-4;
    double grad_clip = 1e3;        // elementwise magnitude limit
    double beta_radius = 1e-2;
    std::size_t beta_points = 20;
    double tol = 1e-4;
    std::size_t eval_every = 10;
    std::size_t max_iterations = 200000;
    std::size_t max_rounds = 2000;
    std::uint64_t seed = 0;
};

struct TraceRecord {
    std::size_t iteration = 0;
    std::string phase; // "train_nll", "line_search_before", "line_search_after", "val_nll", "skip"
    HawkesParams params;
    double value = 0.0;
};

struct FitResult {
    HawkesParams params;
    std::vector<TraceRecord> trace;
    std::size_t iterations = 0;
    std::size_t rounds = 0;
    bool converged = false;
};

/// Coordinate descent: SGD on (alpha, omega) with one random training
/// sequence per step, then a grid line search on beta over one random
/// training sequence, repeated until the validation NLL settles.
[[nodiscard]] FitResult fit_mle(std::span<const EventSequence> train_seqs,
                                std::span<const EventSequence> val_seqs,
                                const PeriodicKDE& background,
                                HawkesParams init,
                                const FitHyper& hyper = {});

// ---------------------------------------------------------------------------
// Sampling

/// Continues the history from its horizon to `horizon` by thinning. The
/// result holds the history followed by the sampled events. Sampling stops
/// early once the total event count reaches stop_at_count, if given.
[[nodiscard]] EventSequence sample_trajectory(const EventSequence& history,
                                              const HawkesModel& model,
                                              double horizon,
                                              std::uint64_t seed,
                                              std::optional<std::size_t> stop_at_count = std::nullopt);

} // namespace coatcast
