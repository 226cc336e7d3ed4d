#include "coatcast/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace coatcast {

namespace {

constexpr std::array<std::pair<Channel, std::string_view>, 4> kChannelNames{{
    {Channel::corrosion_current_uA, "corrosion_current_uA"},
    {Channel::relative_humidity_pct, "relative_humidity_pct"},
    {Channel::conductance_uS, "conductance_uS"},
    {Channel::temperature_C, "temperature_C"},
}};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    for (auto& f : fields) {
        if (f.size() >= 2 && f.front() == '"' && f.back() == '"') {
            f = f.substr(1, f.size() - 2);
        }
    }
    return fields;
}

std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw IngestError("unparseable timestamp '" + std::string(whole) + "'");
    }
    return value;
}

double median_spacing(std::span<const double> t) {
    std::vector<double> gaps;
    gaps.reserve(t.size());
    for (std::size_t i = 1; i < t.size(); ++i) {
        gaps.push_back(t[i] - t[i - 1]);
    }
    std::sort(gaps.begin(), gaps.end());
    const std::size_t n = gaps.size();
    return n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

} // namespace

std::string_view to_string(Channel channel) noexcept {
    for (const auto& [c, name] : kChannelNames) {
        if (c == channel) {
            return name;
        }
    }
    return "unknown";
}

std::string_view to_string(CoatingClass coating) noexcept {
    return coating == CoatingClass::chromate ? "chromate" : "non_chromate";
}

std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
    case EventKind::corrosion: return "corrosion";
    case EventKind::environment: return "environment";
    case EventKind::hybrid: return "hybrid";
    }
    return "unknown";
}

std::string_view to_string(LabelSource source) noexcept {
    return source == LabelSource::visual ? "visual" : "data_driven";
}

std::optional<Channel> channel_from_string(std::string_view name) noexcept {
    for (const auto& [c, n] : kChannelNames) {
        if (n == name) {
            return c;
        }
    }
    return std::nullopt;
}

CoatingClass coating_from_string(std::string_view name) {
    if (name == "chromate") {
        return CoatingClass::chromate;
    }
    if (name == "non_chromate") {
        return CoatingClass::non_chromate;
    }
    throw DomainError("unknown coating class '" + std::string(name) + "'");
}

EventKind event_kind_from_string(std::string_view name) {
    for (auto k : {EventKind::corrosion, EventKind::environment, EventKind::hybrid}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw DomainError("unknown event kind '" + std::string(name) + "'");
}

LabelSource label_source_from_string(std::string_view name) {
    if (name == "visual") {
        return LabelSource::visual;
    }
    if (name == "data_driven") {
        return LabelSource::data_driven;
    }
    throw DomainError("unknown label source '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

TimeSeries::TimeSeries(Channel channel, std::vector<double> timestamps, std::vector<double> values)
    : channel_(channel), timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (timestamps_.empty() || timestamps_.size() != values_.size()) {
        throw DomainError("time series needs equal-length, non-empty timestamps and values");
    }
    for (std::size_t i = 0; i < timestamps_.size(); ++i) {
        if (!std::isfinite(timestamps_[i]) || timestamps_[i] < 0.0) {
            throw DomainError("timestamps must be finite and non-negative");
        }
        if (i > 0 && !(timestamps_[i] > timestamps_[i - 1])) {
            throw DomainError("timestamps must be strictly increasing");
        }
        const double v = values_[i];
        if (!std::isfinite(v)) {
            throw DomainError("non-finite value in " + std::string(to_string(channel_)));
        }
        switch (channel_) {
        case Channel::relative_humidity_pct:
            if (v < 0.0 || v > 100.0) {
                throw DomainError("relative humidity outside [0, 100]");
            }
            break;
        case Channel::conductance_uS:
        case Channel::corrosion_current_uA:
            if (v < 0.0) {
                throw DomainError(std::string(to_string(channel_)) + " must be non-negative");
            }
            break;
        case Channel::temperature_C:
            break;
        }
    }
}

double TimeSeries::value_at(double t) const {
    if (t < start() || t > end()) {
        throw DomainError("value_at outside series span");
    }
    const auto it = std::upper_bound(timestamps_.begin(), timestamps_.end(), t);
    if (it == timestamps_.end()) {
        return values_.back();
    }
    const auto hi = static_cast<std::size_t>(it - timestamps_.begin());
    if (hi == 0) {
        return values_.front();
    }
    const std::size_t lo = hi - 1;
    const double frac = (t - timestamps_[lo]) / (timestamps_[hi] - timestamps_[lo]);
    return values_[lo] + frac * (values_[hi] - values_[lo]);
}

// ---------------------------------------------------------------------------

SensorRecord::SensorRecord(std::string sensor_id,
                           std::string platform_id,
                           CoatingClass coating,
                           std::vector<TimeSeries> channels)
    : sensor_id_(std::move(sensor_id)), platform_id_(std::move(platform_id)), coating_(coating) {
    if (channels.empty()) {
        throw DomainError("sensor record needs at least one channel");
    }
    for (auto& series : channels) {
        const Channel c = series.channel();
        if (channels_.contains(c)) {
            throw DomainError("duplicate channel " + std::string(to_string(c)));
        }
        channels_.emplace(c, std::move(series));
    }
    const auto grid = channels_.begin()->second.timestamps();
    for (const auto& [c, series] : channels_) {
        if (!std::ranges::equal(series.timestamps(), grid)) {
            throw DomainError("channels do not share a time grid");
        }
    }
    if (grid.size() < 2) {
        throw DomainError("sensor record needs at least two samples");
    }
    measurement_period_ = median_spacing(grid);
}

bool SensorRecord::has(Channel channel) const noexcept {
    return channels_.contains(channel);
}

const TimeSeries& SensorRecord::channel(Channel channel) const {
    const auto it = channels_.find(channel);
    if (it == channels_.end()) {
        throw DomainError("sensor " + sensor_id_ + " has no " + std::string(to_string(channel)) +
                          " channel");
    }
    return it->second;
}

std::span<const double> SensorRecord::timestamps() const noexcept {
    return channels_.begin()->second.timestamps();
}

SensorRecord SensorRecord::prefix(double t_end) const {
    const auto grid = timestamps();
    const auto n = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), t_end) -
                                            grid.begin());
    std::vector<TimeSeries> cut;
    for (const auto& [c, series] : channels_) {
        const auto t = series.timestamps();
        const auto v = series.values();
        cut.emplace_back(c, std::vector<double>(t.begin(), t.begin() + static_cast<long>(n)),
                         std::vector<double>(v.begin(), v.begin() + static_cast<long>(n)));
    }
    return SensorRecord(sensor_id_, platform_id_, coating_, std::move(cut));
}

// ---------------------------------------------------------------------------

EventSequence::EventSequence(std::string sensor_id,
                             EventKind kind,
                             std::vector<DegradationEvent> events,
                             double horizon)
    : sensor_id_(std::move(sensor_id)), kind_(kind), events_(std::move(events)), horizon_(horizon) {
    if (!std::isfinite(horizon_) || horizon_ < 0.0) {
        throw DomainError("event horizon must be finite and non-negative");
    }
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const auto& e = events_[i];
        if (!(e.time >= 0.0) || e.time > horizon_) {
            throw DomainError("event time outside [0, horizon]");
        }
        if (i > 0 && !(e.time > events_[i - 1].time)) {
            throw DomainError("event times must be strictly increasing");
        }
        if (!(e.mark > 0.0) || !std::isfinite(e.mark)) {
            throw DomainError("event marks must be positive");
        }
        if (kind_ == EventKind::environment && e.mark != 1.0) {
            throw DomainError("environment events carry unit marks");
        }
    }
}

EventSequence EventSequence::truncated(double t_end) const {
    if (t_end < 0.0) {
        throw DomainError("truncation time must be non-negative");
    }
    std::vector<DegradationEvent> kept;
    for (const auto& e : events_) {
        if (e.time <= t_end) {
            kept.push_back(e);
        }
    }
    return EventSequence(sensor_id_, kind_, std::move(kept), t_end);
}

void validate(const FailureLabel& label) {
    if (!(label.time > 0.0) || !std::isfinite(label.time)) {
        throw DomainError("failure label time must be positive for sensor " + label.sensor_id);
    }
}

const FailureLabel* find_label(std::span<const FailureLabel> labels,
                               std::string_view sensor_id) noexcept {
    for (const auto& l : labels) {
        if (l.sensor_id == sensor_id) {
            return &l;
        }
    }
    return nullptr;
}

// ---------------------------------------------------------------------------

double integrate_series(const TimeSeries& series, double from, double to) {
    if (from > to) {
        return -integrate_series(series, to, from);
    }
    if (from < series.start() || to > series.end()) {
        throw DomainError("integration bounds outside the series span");
    }
    const auto t = series.timestamps();
    const auto v = series.values();
    double total = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double a = std::max(t[i - 1], from);
        const double b = std::min(t[i], to);
        if (b <= a) {
            if (t[i - 1] >= to) {
                break;
            }
            continue;
        }
        // Linear interpolation inside the segment keeps partial segments exact.
        const double slope = (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
        const double va = v[i - 1] + slope * (a - t[i - 1]);
        const double vb = v[i - 1] + slope * (b - t[i - 1]);
        total += 0.5 * (va + vb) * (b - a);
    }
    return total;
}

double accumulated_charge(const TimeSeries& current, double upto) {
    if (upto < current.start() || upto > current.end()) {
        throw DomainError("accumulated_charge: upto outside the series span");
    }
    return integrate_series(current, current.start(), upto);
}

// ---------------------------------------------------------------------------

double parse_timestamp_hours(std::string_view text) {
    text = trim(text);
    if (auto numeric = parse_double(text)) {
        return *numeric;
    }
    // YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]
    if (text.size() < 16 || text[4] != '-' || text[7] != '-' ||
        (text[10] != 'T' && text[10] != ' ') || text[13] != ':') {
        throw IngestError("unparseable timestamp '" + std::string(text) + "'");
    }
    using namespace std::chrono;
    const int y = parse_int(text.substr(0, 4), text);
    const int mo = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    const int hh = parse_int(text.substr(11, 2), text);
    const int mm = parse_int(text.substr(14, 2), text);
    double seconds = 0.0;
    std::string_view rest = text.substr(16);
    if (!rest.empty() && rest.front() == ':') {
        rest.remove_prefix(1);
        const auto end = rest.find_first_of("Z+-");
        const auto sec_text = rest.substr(0, end);
        const auto sec = parse_double(sec_text);
        if (!sec) {
            throw IngestError("unparseable timestamp '" + std::string(text) + "'");
        }
        seconds = *sec;
        rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
    }
    double offset_hours = 0.0;
    if (!rest.empty() && rest != "Z") {
        if (rest.size() != 6 || (rest[0] != '+' && rest[0] != '-') || rest[3] != ':') {
            throw IngestError("unparseable timestamp offset '" + std::string(text) + "'");
        }
        const double sign = rest[0] == '+' ? 1.0 : -1.0;
        offset_hours = sign * (parse_int(rest.substr(1, 2), text) +
                               parse_int(rest.substr(4, 2), text) / 60.0);
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || seconds < 0.0 || seconds >= 61.0) {
        throw IngestError("invalid calendar timestamp '" + std::string(text) + "'");
    }
    const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
    return static_cast<double>(days_since_epoch) * 24.0 + hh + mm / 60.0 + seconds / 3600.0 -
           offset_hours;
}

SensorRecord ingest_csv(const std::filesystem::path& path,
                        const CsvSchema& schema,
                        std::optional<SensorMeta> meta) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open " + path.string());
    }
    std::string header_line;
    if (!std::getline(in, header_line) || trim(header_line).empty()) {
        throw IngestError("empty file " + path.string());
    }
    if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        header_line.erase(0, 3);
    }
    const auto header = split_csv_line(header_line);

    std::optional<std::size_t> time_col;
    std::vector<std::pair<std::size_t, Channel>> channel_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name(header[i]);
        if (name == schema.timestamp_column) {
            time_col = i;
            continue;
        }
        std::string channel_name = name;
        if (auto it = schema.channel_columns.find(name); it != schema.channel_columns.end()) {
            channel_name = it->second;
        }
        const auto channel = channel_from_string(channel_name);
        if (!channel) {
            throw SchemaError("unknown channel column '" + name + "' in " + path.string());
        }
        for (const auto& [_, c] : channel_cols) {
            if (c == *channel) {
                throw SchemaError("channel " + channel_name + " mapped twice");
            }
        }
        channel_cols.emplace_back(i, *channel);
    }
    if (!time_col) {
        throw SchemaError("missing timestamp column '" + schema.timestamp_column + "'");
    }
    if (channel_cols.empty()) {
        throw SchemaError("no channel columns in " + path.string());
    }

    std::vector<double> times;
    std::vector<std::vector<double>> values(channel_cols.size());
    std::optional<double> previous;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw IngestError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields");
        }
        const double t = parse_timestamp_hours(fields[*time_col]);
        if (previous && !(t > *previous)) {
            throw IngestError("line " + std::to_string(line_no) +
                              ": timestamps must be strictly increasing");
        }
        previous = t;
        std::vector<double> row;
        row.reserve(channel_cols.size());
        for (const auto& [col, _] : channel_cols) {
            const auto v = parse_double(fields[col]);
            if (!v) {
                break;
            }
            row.push_back(*v);
        }
        if (row.size() != channel_cols.size()) {
            continue; // missing value: drop the whole row
        }
        times.push_back(t);
        for (std::size_t c = 0; c < row.size(); ++c) {
            values[c].push_back(row[c]);
        }
    }
    if (times.empty()) {
        throw IngestError("no complete rows in " + path.string());
    }
    const double t0 = times.front();
    for (auto& t : times) {
        t -= t0;
    }

    if (!meta) {
        meta = SensorMeta{path.stem().string(), "", CoatingClass::chromate};
    }
    try {
        std::vector<TimeSeries> channels;
        for (std::size_t c = 0; c < channel_cols.size(); ++c) {
            channels.emplace_back(channel_cols[c].second, times, std::move(values[c]));
        }
        return SensorRecord(meta->sensor_id, meta->platform_id, meta->coating, std::move(channels));
    } catch (const DomainError& e) {
        throw IngestError(path.string() + ": " + e.what());
    }
}

void write_csv(const SensorRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IngestError("cannot write " + path.string());
    }
    out << std::setprecision(17);
    out << "timestamp";
    for (const auto& [c, _] : record.channels()) {
        out << ',' << to_string(c);
    }
    out << '\n';
    const auto grid = record.timestamps();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out << grid[i];
        for (const auto& [_, series] : record.channels()) {
            out << ',' << series.values()[i];
        }
        out << '\n';
    }
}

std::vector<FailureLabel> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError("empty labels file " + path.string());
    }
    const auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "sensor_id" || header[1] != "time_hours" ||
        header[2] != "source") {
        throw SchemaError("labels header must be sensor_id,time_hours,source");
    }
    std::vector<FailureLabel> labels;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 3) {
            throw IngestError("malformed label row '" + line + "'");
        }
        const auto t = parse_double(f[1]);
        if (!t) {
            throw IngestError("malformed label time '" + std::string(f[1]) + "'");
        }
        FailureLabel label{std::string(f[0]), *t, label_source_from_string(f[2])};
        validate(label);
        if (!seen.insert(label.sensor_id).second) {
            throw IngestError("duplicate label for sensor " + label.sensor_id);
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

void write_labels_csv(std::span<const FailureLabel> labels, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IngestError("cannot write " + path.string());
    }
    out << std::setprecision(17) << "sensor_id,time_hours,source\n";
    for (const auto& l : labels) {
        out << l.sensor_id << ',' << l.time << ',' << to_string(l.source) << '\n';
    }
}

} // namespace coatcast
