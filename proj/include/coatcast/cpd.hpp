#pragma once

#include "coatcast/core.hpp"
#include "coatcast/tailfit.hpp"

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace coatcast {

inline constexpr double kDefaultCpdThreshold = 0.90;
inline constexpr std::size_t kDefaultCpdWindow = 7;

/// Running state of a (window-limited) CUSUM detector. The state only moves
/// forward: once detected_at is set it is never cleared or moved.
struct CusumState {
    double statistic = 0.0;
    double threshold = kDefaultCpdThreshold;
    std::size_t index = 0;
    /// Last w standardized observations (window-limited variant only).
    std::deque<double> window;
    std::optional<double> detected_at;
    std::optional<std::size_t> detected_index;
};

/// W' = max(W, 0) + llr; records the first exceedance of the threshold.
[[nodiscard]] CusumState cusum_step(CusumState state, double llr, double at_time = 0.0);

/// Centres and scales by the mean and sample standard deviation of the first
/// `w` values. A zero baseline spread leaves the scale at 1.
[[nodiscard]] std::vector<double> standardize_baseline(std::span<const double> x, std::size_t w);

/// Per-step log-likelihood ratios of the Gaussian mean-shift test whose
/// post-change mean is the average of the previous w standardized values:
/// l_i = m_i * (z_i - m_i / 2). Entry k corresponds to z[w + k].
[[nodiscard]] std::vector<double> wlcusum_increments(std::span<const double> z, std::size_t w);

struct WlcusumPath {
    std::vector<double> times;      // cycle times of the updates
    std::vector<double> statistic;  // W^L after each update
};

/// Full statistic path over the valid cycles of a tau series (independent of
/// the threshold). Throws DomainError when w < 2 or fewer than w valid fits.
[[nodiscard]] WlcusumPath wlcusum_path(const TauSeries& taus, std::size_t w);

/// First cycle whose statistic exceeds b, as a data-driven failure label.
[[nodiscard]] std::optional<FailureLabel> wlcusum_tau(const TauSeries& taus,
                                                      std::size_t w = kDefaultCpdWindow,
                                                      double b = kDefaultCpdThreshold);

[[nodiscard]] std::optional<double> first_exceedance(const WlcusumPath& path, double b);

struct ThresholdCalibration {
    std::vector<double> b_grid;
    std::vector<std::optional<double>> p_values; // nullopt where b was skipped
    double b_hat = kDefaultCpdThreshold;
};

/// Picks the threshold whose (visual - detected) label differences look most
/// alike across the two groups (largest Welch p-value, smaller b on ties).
/// Throws CalibrationError if every b is skipped.
[[nodiscard]] ThresholdCalibration calibrate_threshold(
    const std::map<std::string, std::vector<TauSeries>>& groups,
    std::span<const FailureLabel> visual_labels,
    std::span<const double> b_grid,
    std::size_t w = kDefaultCpdWindow);

} // namespace coatcast
