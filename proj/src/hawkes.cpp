#include "coatcast/hawkes.hpp"

#include "coatcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace coatcast {

namespace {

constexpr int kWraps = 3;             // kernels wrapped over +/- 3 neighbouring periods
constexpr double kNegligibleZ = 40.0; // exp(-z^2/2) underflows to zero beyond this
constexpr std::size_t kBoundGrid = 4096;
constexpr double kMinBeta = 1e-8;

double std_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double wrapped_kernel_sum(double phase,
                          std::span<const double> points,
                          double bandwidth,
                          double period) {
    double sum = 0.0;
    for (double p : points) {
        for (int k = -kWraps; k <= kWraps; ++k) {
            const double z = (phase - p + k * period) / bandwidth;
            if (std::fabs(z) < kNegligibleZ) {
                sum += std::exp(-0.5 * z * z);
            }
        }
    }
    return sum / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
}

double fold(double t, double period) {
    double phase = std::fmod(t, period);
    if (phase < 0.0) {
        phase += period;
    }
    return phase;
}

void check_history(double t, std::span<const DegradationEvent> history) {
    if (!history.empty() && !(history.back().time < t)) {
        throw DomainError("history must lie strictly before the evaluation time");
    }
}

} // namespace

void HawkesParams::validate() const {
    if (!(alpha >= 0.0) || !(omega >= 0.0) || !(beta > 0.0) || !std::isfinite(alpha) ||
        !std::isfinite(omega) || !std::isfinite(beta)) {
        throw DomainError("Hawkes parameters need alpha >= 0, omega >= 0, beta > 0");
    }
}

// ---------------------------------------------------------------------------

PeriodicKDE PeriodicKDE::uniform(double period) {
    if (!(period > 0.0)) {
        throw DomainError("KDE period must be positive");
    }
    PeriodicKDE kde;
    kde.period_ = period;
    return kde;
}

PeriodicKDE PeriodicKDE::fit(std::span<const double> event_times, double bandwidth, double period) {
    if (event_times.empty()) {
        throw FitError("background KDE needs at least one event");
    }
    if (!(bandwidth > 0.0) || !(period > 0.0)) {
        throw DomainError("KDE bandwidth and period must be positive");
    }
    PeriodicKDE kde;
    kde.period_ = period;
    kde.bandwidth_ = bandwidth;
    kde.points_.reserve(event_times.size());
    for (double t : event_times) {
        kde.points_.push_back(fold(t, period));
    }
    // Exact integral of the truncated wrapped sum over one period, so the
    // mean over the period is one.
    double mass = 0.0;
    for (double p : kde.points_) {
        for (int k = -kWraps; k <= kWraps; ++k) {
            mass += std_normal_cdf((period - p + k * period) / bandwidth) -
                    std_normal_cdf((-p + k * period) / bandwidth);
        }
    }
    kde.scale_ = period / mass;

    // Grid maximum plus a derivative bound over half a grid cell.
    const double dx = period / static_cast<double>(kBoundGrid);
    double grid_max = 0.0;
    for (std::size_t i = 0; i < kBoundGrid; ++i) {
        grid_max = std::max(grid_max, kde(static_cast<double>(i) * dx));
    }
    const double max_kernel_slope = std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
    const double slope_bound = kde.scale_ * static_cast<double>(kde.points_.size()) * 2.0 *
                               max_kernel_slope / (bandwidth * bandwidth);
    kde.upper_bound_ = grid_max + 0.5 * dx * slope_bound;
    return kde;
}

double PeriodicKDE::operator()(double t) const {
    if (points_.empty()) {
        return 1.0;
    }
    return scale_ * wrapped_kernel_sum(fold(t, period_), points_, bandwidth_, period_);
}

PeriodicKDE fit_background(std::span<const EventSequence> train_seqs, double bandwidth, double period) {
    std::vector<double> times;
    for (const auto& seq : train_seqs) {
        for (const auto& e : seq.events()) {
            times.push_back(e.time);
        }
    }
    return PeriodicKDE::fit(times, bandwidth, period);
}

// ---------------------------------------------------------------------------

MarkStats MarkModel::stats_before(std::span<const DegradationEvent> history, double t) const {
    MarkStats s;
    double m = 0.0;
    double m2 = 0.0;
    for (const auto& e : history) {
        if (!(e.time < t)) {
            break;
        }
        ++s.count;
        const double delta = e.mark - m;
        m += delta / static_cast<double>(s.count);
        m2 += delta * (e.mark - m);
    }
    if (s.count >= 2) {
        s.mean = m;
        s.sigma = std::sqrt(m2 / static_cast<double>(s.count - 1));
        return s;
    }
    s.sigma = prior_sigma;
    if (prior_mean) {
        s.mean = *prior_mean;
    } else if (s.count == 1) {
        s.mean = history.front().mark;
    } else {
        s.mean = 1.0;
    }
    return s;
}

double ground_intensity(double t, std::span<const DegradationEvent> history, const HawkesModel& model) {
    check_history(t, history);
    const auto& p = model.params;
    double excitation = 0.0;
    if (p.omega != 0.0) {
        for (const auto& e : history) {
            excitation += e.mark * std::exp(-p.beta * (t - e.time));
        }
    }
    return p.alpha * model.background(t) + p.omega * p.beta * excitation;
}

double mark_log_density(double m, double t, std::span<const DegradationEvent> history,
                        const HawkesModel& model) {
    const auto s = model.marks.stats_before(history, t);
    if (!(s.sigma > 0.0)) {
        return m == s.mean ? INFINITY : -INFINITY;
    }
    const double z = (m - s.mean) / s.sigma;
    return -0.5 * std::log(2.0 * std::numbers::pi * s.sigma * s.sigma) - 0.5 * z * z;
}

// ---------------------------------------------------------------------------

namespace {

// The background half of the terms does not depend on beta.
void fill_background_terms(const EventSequence& seq,
                           const PeriodicKDE& background,
                           double step,
                           LikelihoodTerms& terms) {
    const auto events = seq.events();
    terms.mu_at_events.clear();
    terms.mu_at_events.reserve(events.size());
    for (const auto& e : events) {
        terms.mu_at_events.push_back(background(e.time));
    }
    terms.mu_integral = 0.0;
    const double horizon = seq.horizon();
    for (std::size_t k = 0; static_cast<double>(k) * step < horizon; ++k) {
        const double left = static_cast<double>(k) * step;
        const double right = std::min(left + step, horizon);
        terms.mu_integral += background(0.5 * (left + right)) * (right - left);
    }
}

void fill_excitation_terms(const EventSequence& seq, double beta, double step, LikelihoodTerms& terms) {
    const auto events = seq.events();
    terms.excitation_at_events.clear();
    terms.excitation_at_events.reserve(events.size());

    // decayed = sum_{t_j < t} m_j exp(-beta (t - t_j)), carried forward in time
    double decayed = 0.0;
    double last = 0.0;
    for (const auto& e : events) {
        decayed *= std::exp(-beta * (e.time - last));
        terms.excitation_at_events.push_back(beta * decayed);
        decayed += e.mark;
        last = e.time;
    }

    // Grid cells are also split at event times: the kernel jumps there, and a
    // midpoint straddling the jump would be first-order wrong.
    const double horizon = seq.horizon();
    decayed = 0.0;
    last = 0.0;
    std::size_t j = 0;
    terms.excitation_integral = 0.0;
    for (std::size_t k = 0; static_cast<double>(k) * step < horizon; ++k) {
        const double right = std::min(static_cast<double>(k + 1) * step, horizon);
        double a = static_cast<double>(k) * step;
        while (a < right) {
            while (j < events.size() && events[j].time <= a) {
                decayed = decayed * std::exp(-beta * (events[j].time - last)) + events[j].mark;
                last = events[j].time;
                ++j;
            }
            const double b = j < events.size() && events[j].time < right ? events[j].time : right;
            const double mid = 0.5 * (a + b);
            const double exc = j == 0 ? 0.0 : beta * decayed * std::exp(-beta * (mid - last));
            terms.excitation_integral += exc * (b - a);
            a = b;
        }
    }
}

} // namespace

LikelihoodTerms likelihood_terms(const EventSequence& seq,
                                 const PeriodicKDE& background,
                                 double beta,
                                 double step) {
    if (!(beta > 0.0) || !(step > 0.0)) {
        throw DomainError("likelihood terms need beta > 0 and a positive step");
    }
    LikelihoodTerms terms;
    fill_background_terms(seq, background, step, terms);
    fill_excitation_terms(seq, beta, step, terms);
    return terms;
}

double negative_log_likelihood(const LikelihoodTerms& terms, double alpha, double omega) {
    double log_sum = 0.0;
    for (std::size_t i = 0; i < terms.mu_at_events.size(); ++i) {
        const double lambda = alpha * terms.mu_at_events[i] + omega * terms.excitation_at_events[i];
        if (!(lambda > 0.0)) {
            return INFINITY;
        }
        log_sum += std::log(lambda);
    }
    return alpha * terms.mu_integral + omega * terms.excitation_integral - log_sum;
}

LikelihoodGradient log_likelihood_gradient(const LikelihoodTerms& terms, double alpha, double omega) {
    LikelihoodGradient g{-terms.mu_integral, -terms.excitation_integral};
    for (std::size_t i = 0; i < terms.mu_at_events.size(); ++i) {
        const double lambda = alpha * terms.mu_at_events[i] + omega * terms.excitation_at_events[i];
        g.d_alpha += terms.mu_at_events[i] / lambda;
        g.d_omega += terms.excitation_at_events[i] / lambda;
    }
    return g;
}

double log_likelihood(const EventSequence& seq, const HawkesModel& model, double step) {
    model.params.validate();
    const auto terms = likelihood_terms(seq, model.background, model.params.beta, step);
    const double nll = negative_log_likelihood(terms, model.params.alpha, model.params.omega);
    if (!std::isfinite(nll)) {
        throw LikelihoodError("ground intensity is zero at an observed event of sensor " +
                              seq.sensor_id());
    }
    return -nll;
}

// ---------------------------------------------------------------------------

std::vector<int> dbscan_1d(std::span<const double> sorted_times, double eps, std::size_t min_pts) {
    const std::size_t n = sorted_times.size();
    std::vector<int> labels(n, -1);
    if (n == 0) {
        return labels;
    }
    // Neighbourhood counts include the point itself.
    std::vector<bool> core(n, false);
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (sorted_times[i] - sorted_times[lo] > eps) {
            ++lo;
        }
        while (hi + 1 < n && sorted_times[hi + 1] - sorted_times[i] <= eps) {
            ++hi;
        }
        hi = std::max(hi, i);
        core[i] = hi - lo + 1 >= min_pts;
    }
    int cluster = -1;
    std::optional<std::size_t> last_core;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) {
            continue;
        }
        if (!last_core || sorted_times[i] - sorted_times[*last_core] > eps) {
            ++cluster;
        }
        labels[i] = cluster;
        last_core = i;
    }
    // Border points join the nearest core point's cluster within eps (earlier one on ties).
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            continue;
        }
        std::optional<std::size_t> best;
        for (std::size_t j = i; j-- > 0 && sorted_times[i] - sorted_times[j] <= eps;) {
            if (core[j]) {
                best = j;
                break;
            }
        }
        for (std::size_t j = i + 1; j < n && sorted_times[j] - sorted_times[i] <= eps; ++j) {
            if (core[j]) {
                if (!best || sorted_times[j] - sorted_times[i] < sorted_times[i] - sorted_times[*best]) {
                    best = j;
                }
                break;
            }
        }
        if (best) {
            labels[i] = labels[*best];
        }
    }
    return labels;
}

HawkesParams init_params(std::span<const EventSequence> train_seqs) {
    std::size_t n_events = 0;
    double total_horizon = 0.0;
    std::vector<double> gaps;
    for (const auto& seq : train_seqs) {
        n_events += seq.size();
        total_horizon += seq.horizon();
        const auto ev = seq.events();
        for (std::size_t i = 1; i < ev.size(); ++i) {
            gaps.push_back(ev[i].time - ev[i - 1].time);
        }
    }
    if (n_events < 2) {
        throw InitError("initialisation needs at least two events");
    }
    if (gaps.empty() || !(total_horizon > 0.0)) {
        throw InitError("initialisation needs a sequence with two or more events");
    }
    const double eps = stats::median(gaps);

    std::size_t n_clusters = 0;
    double duration_sum = 0.0;
    for (const auto& seq : train_seqs) {
        std::vector<double> times;
        for (const auto& e : seq.events()) {
            times.push_back(e.time);
        }
        const auto labels = dbscan_1d(times, eps, 2);
        int current = -1;
        double first = 0.0;
        double last = 0.0;
        auto close_cluster = [&] {
            if (current >= 0) {
                ++n_clusters;
                duration_sum += last - first;
            }
        };
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (labels[i] < 0) {
                continue;
            }
            if (labels[i] != current) {
                close_cluster();
                current = labels[i];
                first = times[i];
            }
            last = times[i];
        }
        close_cluster();
    }

    HawkesParams p;
    p.alpha = static_cast<double>(n_events) / total_horizon;
    p.omega = static_cast<double>(n_clusters) / static_cast<double>(n_events);
    const double mean_duration = n_clusters > 0 ? duration_sum / static_cast<double>(n_clusters) : 0.0;
    p.beta = mean_duration > 0.0 ? 1.0 / mean_duration : 1.0 / eps;
    return p;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<LikelihoodTerms> background_terms(std::span<const EventSequence> seqs,
                                              const PeriodicKDE& background) {
    std::vector<LikelihoodTerms> out(seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        fill_background_terms(seqs[i], background, kLikelihoodStepHours, out[i]);
    }
    return out;
}

void refresh_excitation(std::span<const EventSequence> seqs, double beta, std::vector<LikelihoodTerms>& terms) {
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        fill_excitation_terms(seqs[i], beta, kLikelihoodStepHours, terms[i]);
    }
}

double total_nll(std::span<const LikelihoodTerms> terms, const HawkesParams& p) {
    double sum = 0.0;
    for (const auto& t : terms) {
        sum += negative_log_likelihood(t, p.alpha, p.omega);
    }
    return sum;
}

double relative_change(double previous, double current) {
    return std::fabs(current - previous) / std::max(std::fabs(previous), 1e-300);
}

} // namespace

FitResult fit_mle(std::span<const EventSequence> train_seqs,
                  std::span<const EventSequence> val_seqs,
                  const PeriodicKDE& background,
                  HawkesParams init,
                  const FitHyper& hyper) {
    if (train_seqs.empty() || val_seqs.empty()) {
        throw FitError("MLE needs at least one training and one validation sequence");
    }
    if (hyper.beta_points < 1 || !(hyper.learning_rate > 0.0) || hyper.eval_every < 1) {
        throw DomainError("invalid optimiser hyperparameters");
    }
    init.alpha = std::max(init.alpha, 0.0);
    init.omega = std::max(init.omega, 0.0);
    init.beta = std::max(init.beta, kMinBeta);
    init.validate();

    FitResult result;
    HawkesParams p = init;
    std::mt19937_64 rng(hyper.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train_seqs.size() - 1);

    auto train_terms = background_terms(train_seqs, background);
    auto val_terms = background_terms(val_seqs, background);
    refresh_excitation(train_seqs, p.beta, train_terms);
    refresh_excitation(val_seqs, p.beta, val_terms);
    double train_nll = total_nll(train_terms, p);
    if (!std::isfinite(train_nll) || !std::isfinite(total_nll(val_terms, p))) {
        throw FitError("negative log-likelihood is infinite at the initial parameters");
    }
    result.trace.push_back({0, "train_nll", p, train_nll});

    std::size_t iteration = 0;
    while (result.rounds < hyper.max_rounds && iteration < hyper.max_iterations) {
        ++result.rounds;
        // (1) SGD on (alpha, omega) until the full training NLL settles.
        double previous_train = train_nll;
        while (iteration < hyper.max_iterations) {
            const auto& terms = train_terms[pick(rng)];
            const auto g = log_likelihood_gradient(terms, p.alpha, p.omega);
            ++iteration;
            if (!std::isfinite(g.d_alpha) || !std::isfinite(g.d_omega)) {
                result.trace.push_back({iteration, "skip", p, NAN});
            } else {
                // Descend the NLL, whose gradient is minus the log-likelihood gradient.
                const double ga = std::clamp(-g.d_alpha, -hyper.grad_clip, hyper.grad_clip);
                const double go = std::clamp(-g.d_omega, -hyper.grad_clip, hyper.grad_clip);
                p.alpha = std::max(0.0, p.alpha - hyper.learning_rate * ga);
                p.omega = std::max(0.0, p.omega - hyper.learning_rate * go);
            }
            if (iteration % hyper.eval_every == 0) {
                train_nll = total_nll(train_terms, p);
                result.trace.push_back({iteration, "train_nll", p, train_nll});
                if (std::isfinite(train_nll) && std::isfinite(previous_train) &&
                    relative_change(previous_train, train_nll) < hyper.tol) {
                    break;
                }
                previous_train = train_nll;
            }
        }
        const double val_before = total_nll(val_terms, p);
        result.trace.push_back({iteration, "val_nll", p, val_before});

        // (2) Line search on beta over one random training sequence.
        const std::size_t chosen = pick(rng);
        const auto& seq = train_seqs[chosen];
        LikelihoodTerms probe = train_terms[chosen];
        const double current_value = negative_log_likelihood(probe, p.alpha, p.omega);
        double best_beta = p.beta;
        double best_value = current_value;
        for (std::size_t k = 0; k < hyper.beta_points; ++k) {
            const double offset = hyper.beta_points == 1
                                      ? 0.0
                                      : -hyper.beta_radius + 2.0 * hyper.beta_radius *
                                                                 static_cast<double>(k) /
                                                                 static_cast<double>(hyper.beta_points - 1);
            const double candidate = p.beta + offset;
            if (!(candidate > kMinBeta)) {
                continue;
            }
            fill_excitation_terms(seq, candidate, kLikelihoodStepHours, probe);
            const double value = negative_log_likelihood(probe, p.alpha, p.omega);
            if (value < best_value) {
                best_value = value;
                best_beta = candidate;
            }
        }
        result.trace.push_back({iteration, "line_search_before", p, current_value});
        p.beta = best_beta;
        result.trace.push_back({iteration, "line_search_after", p, best_value});

        refresh_excitation(train_seqs, p.beta, train_terms);
        refresh_excitation(val_seqs, p.beta, val_terms);
        train_nll = total_nll(train_terms, p);
        const double val_after = total_nll(val_terms, p);
        result.trace.push_back({iteration, "val_nll", p, val_after});
        if (std::isfinite(val_after) && std::isfinite(val_before) &&
            relative_change(val_before, val_after) < hyper.tol) {
            result.converged = true;
            break;
        }
    }
    result.params = p;
    result.iterations = iteration;
    return result;
}

// ---------------------------------------------------------------------------

EventSequence sample_trajectory(const EventSequence& history,
                                const HawkesModel& model,
                                double horizon,
                                std::uint64_t seed,
                                std::optional<std::size_t> stop_at_count) {
    model.params.validate();
    if (!(horizon > history.horizon())) {
        throw DomainError("sampling horizon must exceed the history horizon");
    }
    const auto& p = model.params;
    const bool unit_marks = model.event_type == EventKind::environment;
    std::vector<DegradationEvent> events(history.events().begin(), history.events().end());

    // Running mark moments (Welford) over every event so far.
    std::size_t mark_count = 0;
    double mark_mean = 0.0;
    double mark_m2 = 0.0;
    auto add_mark = [&](double m) {
        ++mark_count;
        const double delta = m - mark_mean;
        mark_mean += delta / static_cast<double>(mark_count);
        mark_m2 += delta * (m - mark_mean);
    };
    for (const auto& e : events) {
        add_mark(e.mark);
    }

    // decayed = sum_i m_i exp(-beta (t - t_i)) at time `now`
    double now = history.horizon();
    double decayed = 0.0;
    for (const auto& e : events) {
        decayed += e.mark * std::exp(-p.beta * (now - e.time));
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double background_bound = p.alpha * model.background.upper_bound();

    while (!stop_at_count || events.size() < *stop_at_count) {
        const double bound = background_bound + p.omega * p.beta * decayed;
        if (!std::isfinite(bound)) {
            throw SampleError("non-finite intensity bound while sampling");
        }
        if (!(bound > 0.0)) {
            break;
        }
        const double gap = -std::log1p(-unit(rng)) / bound;
        const double candidate = now + gap;
        if (candidate > horizon) {
            break;
        }
        decayed *= std::exp(-p.beta * gap);
        now = candidate;
        const double lambda = p.alpha * model.background(now) + p.omega * p.beta * decayed;
        if (!std::isfinite(lambda)) {
            throw SampleError("non-finite intensity while sampling");
        }
        if (unit(rng) * bound > lambda) {
            continue;
        }
        if (!events.empty() && !(now > events.back().time)) {
            continue; // sub-resolution gap; cannot keep strictly increasing times
        }
        double mark = 1.0;
        if (!unit_marks) {
            double mean = mark_mean;
            double sigma = 0.0;
            if (mark_count >= 2) {
                sigma = std::sqrt(mark_m2 / static_cast<double>(mark_count - 1));
            } else {
                const auto s = model.marks.stats_before(events, now);
                mean = s.mean;
                sigma = s.sigma;
            }
            if (!(sigma > 0.0)) {
                mark = mean;
            } else {
                // Gaussian truncated below at zero, by rejection.
                int attempts = 0;
                do {
                    mark = mean + sigma * normal(rng);
                    if (++attempts > 100000) {
                        throw SampleError("mark distribution has almost no positive mass");
                    }
                } while (!(mark > 0.0));
            }
            if (!(mark > 0.0)) {
                throw SampleError("non-positive mark mean");
            }
        }
        events.push_back({now, mark});
        add_mark(mark);
        decayed += mark;
    }
    return EventSequence(history.sensor_id(), history.kind(), std::move(events), horizon);
}

} // namespace coatcast
