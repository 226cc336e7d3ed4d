#pragma once

#include "coatcast/errors.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coatcast {

// All times are hours since the sensor's own first sample.

enum class Channel {
    corrosion_current_uA,
    relative_humidity_pct,
    conductance_uS,
    temperature_C,
};

enum class CoatingClass { chromate, non_chromate };

enum class EventKind { corrosion, environment, hybrid };

enum class LabelSource { visual, data_driven };

[[nodiscard]] std::string_view to_string(Channel channel) noexcept;
[[nodiscard]] std::string_view to_string(CoatingClass coating) noexcept;
[[nodiscard]] std::string_view to_string(EventKind kind) noexcept;
[[nodiscard]] std::string_view to_string(LabelSource source) noexcept;

[[nodiscard]] std::optional<Channel> channel_from_string(std::string_view name) noexcept;
/// Throws DomainError on unknown names.
[[nodiscard]] CoatingClass coating_from_string(std::string_view name);
[[nodiscard]] EventKind event_kind_from_string(std::string_view name);
[[nodiscard]] LabelSource label_source_from_string(std::string_view name);

/// A single channel sampled on a strictly increasing time grid.
class TimeSeries {
public:
    /// Validates the invariants; throws DomainError.
    TimeSeries(Channel channel, std::vector<double> timestamps, std::vector<double> values);

    [[nodiscard]] Channel channel() const noexcept { return channel_; }
    [[nodiscard]] std::span<const double> timestamps() const noexcept { return timestamps_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double start() const noexcept { return timestamps_.front(); }
    [[nodiscard]] double end() const noexcept { return timestamps_.back(); }

    /// Linear interpolation of the value at t, t within [start, end].
    [[nodiscard]] double value_at(double t) const;

    bool operator==(const TimeSeries&) const = default;

private:
    Channel channel_;
    std::vector<double> timestamps_;
    std::vector<double> values_;
};

/// One coated sensor with all of its channels on a shared time grid.
class SensorRecord {
public:
    SensorRecord(std::string sensor_id,
                 std::string platform_id,
                 CoatingClass coating,
                 std::vector<TimeSeries> channels);

    [[nodiscard]] const std::string& sensor_id() const noexcept { return sensor_id_; }
    [[nodiscard]] const std::string& platform_id() const noexcept { return platform_id_; }
    [[nodiscard]] CoatingClass coating_class() const noexcept { return coating_; }
    [[nodiscard]] double measurement_period() const noexcept { return measurement_period_; }

    [[nodiscard]] bool has(Channel channel) const noexcept;
    /// Throws DomainError if the channel is absent.
    [[nodiscard]] const TimeSeries& channel(Channel channel) const;
    [[nodiscard]] const std::map<Channel, TimeSeries>& channels() const noexcept { return channels_; }
    [[nodiscard]] std::span<const double> timestamps() const noexcept;
    [[nodiscard]] std::size_t size() const noexcept { return timestamps().size(); }

    /// Samples with timestamp <= t_end (at least one sample must remain).
    [[nodiscard]] SensorRecord prefix(double t_end) const;

    bool operator==(const SensorRecord&) const = default;

private:
    std::string sensor_id_;
    std::string platform_id_;
    CoatingClass coating_;
    std::map<Channel, TimeSeries> channels_;
    double measurement_period_ = 0.0;
};

struct DegradationEvent {
    double time = 0.0;
    double mark = 1.0;

    bool operator==(const DegradationEvent&) const = default;
};

/// Ordered marked events observed on [0, horizon].
class EventSequence {
public:
    EventSequence(std::string sensor_id,
                  EventKind kind,
                  std::vector<DegradationEvent> events,
                  double horizon);

    [[nodiscard]] const std::string& sensor_id() const noexcept { return sensor_id_; }
    [[nodiscard]] EventKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::span<const DegradationEvent> events() const noexcept { return events_; }
    [[nodiscard]] std::size_t size() const noexcept { return events_.size(); }
    [[nodiscard]] bool empty() const noexcept { return events_.empty(); }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }

    /// Events with time <= t_end, horizon t_end.
    [[nodiscard]] EventSequence truncated(double t_end) const;

    bool operator==(const EventSequence&) const = default;

private:
    std::string sensor_id_;
    EventKind kind_;
    std::vector<DegradationEvent> events_;
    double horizon_;
};

struct FailureLabel {
    std::string sensor_id;
    double time = 0.0;
    LabelSource source = LabelSource::visual;

    bool operator==(const FailureLabel&) const = default;
};

/// Throws DomainError unless time > 0.
void validate(const FailureLabel& label);

[[nodiscard]] const FailureLabel* find_label(std::span<const FailureLabel> labels,
                                             std::string_view sensor_id) noexcept;

// ---------------------------------------------------------------------------
// Charge

/// Trapezoidal integral of the series over [from, to]; both inside the series span.
[[nodiscard]] double integrate_series(const TimeSeries& series, double from, double to);

/// Integral of the corrosion current from the first sample to `upto` (uA*h).
[[nodiscard]] double accumulated_charge(const TimeSeries& current, double upto);

// ---------------------------------------------------------------------------
// CSV I/O

struct CsvSchema {
    std::string timestamp_column = "timestamp";
    /// Column name -> channel name. Columns not listed here must be named
    /// after a channel themselves.
    std::map<std::string, std::string> channel_columns;
};

struct SensorMeta {
    std::string sensor_id;
    std::string platform_id;
    CoatingClass coating = CoatingClass::chromate;
};

/// Reads a sensor CSV. Rows with any missing channel value are dropped and
/// timestamps are rebased to hours since the first kept row.
[[nodiscard]] SensorRecord ingest_csv(const std::filesystem::path& path,
                                      const CsvSchema& schema = {},
                                      std::optional<SensorMeta> meta = std::nullopt);

/// Writes the record with numeric-hour timestamps; ingest_csv reads it back unchanged.
void write_csv(const SensorRecord& record, const std::filesystem::path& path);

/// Parses "2021-05-01T06:30:00[.fff][Z]" or a plain number of hours. Returns hours.
[[nodiscard]] double parse_timestamp_hours(std::string_view text);

[[nodiscard]] std::vector<FailureLabel> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(std::span<const FailureLabel> labels, const std::filesystem::path& path);

} // namespace coatcast
