#pragma once

// Small builders shared by the unit tests and the acceptance binary.

#include "coatcast/core.hpp"
#include "coatcast/predict.hpp"

#include <array>
#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace fixture {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("coatcast_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<double> grid(std::size_t n, double dt) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<double>(i) * dt;
    }
    return t;
}

inline coatcast::SensorRecord record(const std::string& id,
                                     const std::vector<double>& t,
                                     const std::vector<double>& current,
                                     const std::vector<double>& temp,
                                     const std::vector<double>& rh,
                                     const std::vector<double>& cond,
                                     coatcast::CoatingClass coating = coatcast::CoatingClass::chromate) {
    using coatcast::Channel;
    using coatcast::TimeSeries;
    return coatcast::SensorRecord(id, "bench", coating,
                                  {TimeSeries(Channel::corrosion_current_uA, t, current),
                                   TimeSeries(Channel::temperature_C, t, temp),
                                   TimeSeries(Channel::relative_humidity_pct, t, rh),
                                   TimeSeries(Channel::conductance_uS, t, cond)});
}

/// A noiseless planted autoregressive system on an hourly grid. Coefficients
/// and inputs are positive so the current never goes negative. The
/// coefficients depend on `seed` only; `input_seed` picks the exogenous
/// inputs, so two calls differing only there share one system.
struct PlantedVar {
    std::size_t lag = 1;
    double intercept = 0.5;
    std::vector<double> ar;
    std::array<std::vector<double>, 3> exog; // temperature, RH, conductance; lags 0..p
    coatcast::SensorRecord data;
};

inline PlantedVar planted_var(std::size_t lag,
                              std::uint64_t seed,
                              std::size_t n = 400,
                              bool temperature_irrelevant = false,
                              const std::string& id = "var",
                              std::uint64_t input_seed = 0) {
    std::mt19937_64 rng(seed);
    auto u = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    std::vector<double> ar(lag);
    for (auto& a : ar) {
        a = u(0.05, 0.8 / static_cast<double>(lag));
    }
    std::array<std::vector<double>, 3> b;
    const std::array<std::pair<double, double>, 3> ranges{
        std::pair{0.01, 0.05}, std::pair{1e-3, 1e-2}, std::pair{1e-5, 1e-4}};
    for (std::size_t c = 0; c < 3; ++c) {
        b[c].resize(lag + 1);
        for (auto& v : b[c]) {
            v = (c == 0 && temperature_irrelevant) ? 0.0 : u(ranges[c].first, ranges[c].second);
        }
    }
    rng.seed(input_seed * 7919 + seed + 1);
    const auto t = grid(n, 1.0);
    std::vector<double> temp(n), rh(n), cond(n), cur(n);
    for (std::size_t i = 0; i < n; ++i) {
        temp[i] = 25.0 + u(-5.0, 5.0);
        rh[i] = u(0.0, 100.0);
        cond[i] = u(0.0, 10000.0);
    }
    const std::array<const std::vector<double>*, 3> x{&temp, &rh, &cond};
    const double intercept = 0.5;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < lag) {
            cur[i] = u(0.5, 1.5);
            continue;
        }
        double v = intercept;
        for (std::size_t k = 1; k <= lag; ++k) {
            v += ar[k - 1] * cur[i - k];
        }
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k <= lag; ++k) {
                v += b[c][k] * (*x[c])[i - k];
            }
        }
        cur[i] = v;
    }
    return PlantedVar{lag, intercept, ar, b, record(id, t, cur, temp, rh, cond)};
}

} // namespace fixture
