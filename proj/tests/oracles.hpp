#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code.

#include "coatcast/core.hpp"
#include "coatcast/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

/// Left-Riemann sum of the piecewise-linear interpolant on a grid `refine`
/// times finer than the samples.
inline double riemann_charge(std::span<const double> t, std::span<const double> v, double upto,
                             int refine = 1000) {
    double sum = 0.0;
    for (std::size_t k = 1; k < t.size() && t[k - 1] < upto; ++k) {
        const double right = std::min(t[k], upto);
        const double h = (t[k] - t[k - 1]) / refine;
        for (int s = 0; s < refine; ++s) {
            const double a = t[k - 1] + s * h;
            if (a >= right) {
                break;
            }
            const double b = std::min(a + h, right);
            const double mid = 0.5 * (a + b);
            const double value = v[k - 1] + (v[k] - v[k - 1]) * (mid - t[k - 1]) / (t[k] - t[k - 1]);
            sum += value * (b - a);
        }
    }
    return sum;
}

/// CUSUM statistic from its closed form: W_n = S_n - min_{0 <= k < n} S_k.
inline std::vector<double> prefix_min_cusum(std::span<const double> increments) {
    std::vector<double> out;
    double s = 0.0;
    double running_min = 0.0;
    for (double l : increments) {
        const double previous = s;
        running_min = std::min(running_min, previous);
        s += l;
        out.push_back(s - running_min);
    }
    return out;
}

/// Kolmogorov limiting survival function Q(x) = 2 sum (-1)^{k-1} exp(-2 k^2 x^2).
inline double kolmogorov_survival(double x) {
    if (x <= 0.0) {
        return 1.0;
    }
    if (x < 0.2) {
        return 1.0;
    }
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) {
            break;
        }
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS p-value against a continuous CDF (Stephens' small-sample correction).
inline double ks_one_sample_p(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::ranges::sort(x);
    const auto n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    const double root = std::sqrt(n);
    return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

/// Two-sample KS p-value (asymptotic; conservative for discrete data).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::ranges::sort(a);
    std::ranges::sort(b);
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) {
            ++i;
        }
        while (j < b.size() && b[j] == v) {
            ++j;
        }
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    const double ne = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
    const double root = std::sqrt(ne);
    return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

/// Ground intensity by direct summation over the events strictly before t.
inline double intensity(double t, std::span<const coatcast::DegradationEvent> events,
                        const coatcast::HawkesModel& m) {
    double excitation = 0.0;
    for (const auto& e : events) {
        if (e.time < t) {
            excitation += e.mark * m.params.beta * std::exp(-m.params.beta * (t - e.time));
        }
    }
    return m.params.alpha * m.background(t) + m.params.omega * excitation;
}

/// Log-likelihood with the compensator integrated by a fine midpoint rule.
inline double fine_grid_log_likelihood(const coatcast::EventSequence& seq,
                                       const coatcast::HawkesModel& m,
                                       double step = 0.01) {
    const auto events = seq.events();
    double log_sum = 0.0;
    for (const auto& e : events) {
        log_sum += std::log(intensity(e.time, events, m));
    }
    double integral = 0.0;
    const auto cells = static_cast<long>(std::ceil(seq.horizon() / step - 1e-9));
    for (long k = 0; k < cells; ++k) {
        const double a = k * step;
        const double b = std::min(a + step, seq.horizon());
        integral += intensity(0.5 * (a + b), events, m) * (b - a);
    }
    return log_sum - integral;
}

/// Compensator at every event time: background integral by a fine
/// midpoint rule (one sweep) plus the closed-form excitation integral.
inline std::vector<double> compensator_at_events(std::span<const coatcast::DegradationEvent> events,
                                                 const coatcast::HawkesModel& m,
                                                 double step = 1e-2) {
    std::vector<double> out;
    double background = 0.0;
    double cursor = 0.0;
    for (const auto& target : events) {
        while (cursor < target.time) {
            const double b = std::min(cursor + step, target.time);
            background += m.background(0.5 * (cursor + b)) * (b - cursor);
            cursor = b;
        }
        double excitation = 0.0;
        for (const auto& e : events) {
            if (e.time < target.time) {
                excitation += e.mark * (1.0 - std::exp(-m.params.beta * (target.time - e.time)));
            }
        }
        out.push_back(m.params.alpha * background + m.params.omega * excitation);
    }
    return out;
}

inline double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_sd(std::span<const double> x) {
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

} // namespace oracle
