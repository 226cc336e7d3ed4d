#pragma once

#include <span>
#include <vector>

namespace coatcast::stats {

[[nodiscard]] double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
[[nodiscard]] double sample_std(std::span<const double> x);
[[nodiscard]] double sample_variance(std::span<const double> x);
[[nodiscard]] double median(std::span<const double> x);

/// Linearly interpolated sample quantile (the "type 7" convention):
/// position q*(n-1) in the sorted sample.
[[nodiscard]] double quantile(std::span<const double> x, double q);
/// Same, for a sample that is already sorted ascending.
[[nodiscard]] double quantile_sorted(std::span<const double> sorted, double q);

[[nodiscard]] double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
[[nodiscard]] double spearman(std::span<const double> x, std::span<const double> y);
[[nodiscard]] std::vector<double> average_ranks(std::span<const double> x);

struct WelchResult {
    double t = 0.0;
    double dof = 0.0;
    double p_value = 1.0; // two-sided
};

/// Two-sample unequal-variance T-test. Each sample needs two or more values.
[[nodiscard]] WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

[[nodiscard]] double normal_quantile(double p);

} // namespace coatcast::stats
