#include "fixtures.hpp"
#include "oracles.hpp"

#include "coatcast/core.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace coatcast;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

} // namespace

TEST(TimeSeries, RejectsBadGrids) {
    EXPECT_THROW(TimeSeries(Channel::temperature_C, {0.0, 1.0}, {1.0}), DomainError);
    EXPECT_THROW(TimeSeries(Channel::temperature_C, {0.0, 0.0}, {1.0, 2.0}), DomainError);
    EXPECT_THROW(TimeSeries(Channel::temperature_C, {1.0, 0.5}, {1.0, 2.0}), DomainError);
    EXPECT_THROW(TimeSeries(Channel::temperature_C, {-1.0, 0.5}, {1.0, 2.0}), DomainError);
    EXPECT_THROW(TimeSeries(Channel::relative_humidity_pct, {0.0, 1.0}, {50.0, 101.0}), DomainError);
    EXPECT_THROW(TimeSeries(Channel::corrosion_current_uA, {0.0, 1.0}, {0.5, -0.1}), DomainError);
    EXPECT_THROW(TimeSeries(Channel::conductance_uS, {0.0, 1.0}, {-1.0, 2.0}), DomainError);
    EXPECT_NO_THROW(TimeSeries(Channel::temperature_C, {0.0, 1.0}, {-5.0, 2.0}));
}

TEST(TimeSeries, InterpolatesLinearly) {
    const TimeSeries s(Channel::temperature_C, {0.0, 2.0, 4.0}, {0.0, 4.0, 0.0});
    EXPECT_DOUBLE_EQ(s.value_at(1.0), 2.0);
    EXPECT_DOUBLE_EQ(s.value_at(3.0), 2.0);
    EXPECT_DOUBLE_EQ(s.value_at(4.0), 0.0);
    EXPECT_THROW((void)s.value_at(4.5), DomainError);
}

TEST(SensorRecord, RequiresSharedGrid) {
    const TimeSeries a(Channel::temperature_C, {0.0, 1.0}, {1.0, 2.0});
    const TimeSeries b(Channel::conductance_uS, {0.0, 2.0}, {1.0, 2.0});
    EXPECT_THROW(SensorRecord("s", "p", CoatingClass::chromate, {a, b}), DomainError);
    EXPECT_THROW(SensorRecord("s", "p", CoatingClass::chromate, {a, a}), DomainError);
}

TEST(SensorRecord, PrefixKeepsSamplesUpToTime) {
    const auto t = fixture::grid(10, 1.0);
    const std::vector<double> v(10, 1.0);
    const auto r = fixture::record("s", t, v, v, v, v);
    const auto p = r.prefix(4.5);
    EXPECT_EQ(p.size(), 5u);
    EXPECT_EQ(p.sensor_id(), "s");
    EXPECT_DOUBLE_EQ(r.measurement_period(), 1.0);
    EXPECT_THROW((void)r.channel(Channel::corrosion_current_uA).value_at(20.0), DomainError);
}

TEST(EventSequence, Invariants) {
    EXPECT_THROW(EventSequence("s", EventKind::corrosion, {{2.0, 1.0}, {1.0, 1.0}}, 5.0), DomainError);
    EXPECT_THROW(EventSequence("s", EventKind::corrosion, {{1.0, 1.0}}, 0.5), DomainError);
    EXPECT_THROW(EventSequence("s", EventKind::corrosion, {{1.0, 0.0}}, 5.0), DomainError);
    EXPECT_THROW(EventSequence("s", EventKind::environment, {{1.0, 2.0}}, 5.0), DomainError);
    const EventSequence seq("s", EventKind::corrosion, {{1.0, 2.0}, {3.0, 1.0}, {4.0, 1.5}}, 6.0);
    const auto cut = seq.truncated(3.0);
    EXPECT_EQ(cut.size(), 2u);
    EXPECT_DOUBLE_EQ(cut.horizon(), 3.0);
}

TEST(FailureLabel, TimeMustBePositive) {
    EXPECT_THROW(validate(FailureLabel{"s", 0.0}), DomainError);
    EXPECT_NO_THROW(validate(FailureLabel{"s", 1.0}));
}

TEST(Charge, Rectangle) {
    const TimeSeries s(Channel::corrosion_current_uA, fixture::grid(11, 1.0), std::vector<double>(11, 2.0));
    EXPECT_DOUBLE_EQ(accumulated_charge(s, 10.0), 20.0);
}

TEST(Charge, Triangle) {
    const TimeSeries s(Channel::corrosion_current_uA, {0.0, 4.0}, {0.0, 4.0});
    EXPECT_DOUBLE_EQ(accumulated_charge(s, 4.0), 8.0);
}

TEST(Charge, OutOfRangeThrows) {
    const TimeSeries s(Channel::corrosion_current_uA, {0.0, 4.0}, {0.0, 4.0});
    EXPECT_THROW((void)accumulated_charge(s, 5.0), DomainError);
    EXPECT_THROW((void)accumulated_charge(s, -1.0), DomainError);
}

TEST(Charge, MatchesFineRiemannSum) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<double> t{0.0};
    std::vector<double> v{u(rng)};
    for (int i = 0; i < 30; ++i) {
        t.push_back(t.back() + 0.1 + u(rng) / 5.0);
        v.push_back(u(rng));
    }
    const TimeSeries s(Channel::corrosion_current_uA, t, v);
    for (double upto : {t[3] + 0.37 * (t[4] - t[3]), t[17] + 0.5 * (t[18] - t[17]), t.back()}) {
        const double got = accumulated_charge(s, upto);
        const double want = oracle::riemann_charge(t, v, upto);
        EXPECT_NEAR(got, want, 1e-9 * want) << upto;
    }
}

TEST(Charge, AdditiveAndMonotone) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    const auto t = fixture::grid(50, 0.25);
    std::vector<double> v(50);
    for (auto& x : v) {
        x = u(rng);
    }
    const TimeSeries s(Channel::corrosion_current_uA, t, v);
    double previous = 0.0;
    for (double upto = 0.0; upto <= t.back(); upto += 0.17) {
        const double q = accumulated_charge(s, upto);
        EXPECT_GE(q, previous);
        previous = q;
    }
    const double t1 = 3.3;
    const double t2 = 9.1;
    const double total = accumulated_charge(s, t2);
    EXPECT_NEAR(accumulated_charge(s, t1) + integrate_series(s, t1, t2), total, 1e-12 * total);
}

TEST(Timestamps, ParsesIsoAndNumeric) {
    EXPECT_DOUBLE_EQ(parse_timestamp_hours("12.5"), 12.5);
    const double a = parse_timestamp_hours("2021-05-01T06:30:00");
    const double b = parse_timestamp_hours("2021-05-02T07:00:00Z");
    EXPECT_DOUBLE_EQ(b - a, 24.5);
    const double c = parse_timestamp_hours("2021-05-01T06:30:00.5");
    EXPECT_NEAR((c - a) * 3600.0, 0.5, 1e-6);
    EXPECT_THROW((void)parse_timestamp_hours("yesterday"), IngestError);
}

TEST(Ingest, ThreeRows) {
    fixture::TempDir dir;
    write_text(dir / "s.csv",
               "timestamp,corrosion_current_uA,relative_humidity_pct,conductance_uS,temperature_C\n"
               "10,1.0,50,100,20\n11,2.0,60,200,21\n12,3.0,70,300,22\n");
    const auto r = ingest_csv(dir / "s.csv");
    EXPECT_EQ(r.size(), 3u);
    EXPECT_EQ(r.sensor_id(), "s");
    EXPECT_EQ(r.channels().size(), 4u);
    EXPECT_DOUBLE_EQ(r.timestamps()[0], 0.0);
    EXPECT_DOUBLE_EQ(r.timestamps()[2], 2.0);
    EXPECT_DOUBLE_EQ(r.channel(Channel::conductance_uS).values()[1], 200.0);
}

TEST(Ingest, DropsRowsWithMissingValues) {
    fixture::TempDir dir;
    write_text(dir / "s.csv",
               "timestamp,corrosion_current_uA,relative_humidity_pct\n0,1.0,50\n1,2.0,\n2,3.0,70\n");
    const auto r = ingest_csv(dir / "s.csv");
    EXPECT_EQ(r.size(), 2u);
    EXPECT_DOUBLE_EQ(r.timestamps()[1], 2.0);
}

TEST(Ingest, Errors) {
    fixture::TempDir dir;
    write_text(dir / "unsorted.csv", "timestamp,corrosion_current_uA\n2,1.0\n1,2.0\n");
    EXPECT_THROW((void)ingest_csv(dir / "unsorted.csv"), IngestError);
    write_text(dir / "dup.csv", "timestamp,corrosion_current_uA\n1,1.0\n1,2.0\n");
    EXPECT_THROW((void)ingest_csv(dir / "dup.csv"), IngestError);
    write_text(dir / "empty.csv", "");
    EXPECT_THROW((void)ingest_csv(dir / "empty.csv"), IngestError);
    write_text(dir / "unknown.csv", "timestamp,voltage\n1,1.0\n");
    EXPECT_THROW((void)ingest_csv(dir / "unknown.csv"), SchemaError);
    EXPECT_THROW((void)ingest_csv(dir / "missing.csv"), IngestError);
}

TEST(Ingest, SchemaMapsColumns) {
    fixture::TempDir dir;
    write_text(dir / "s.csv", "time,i_zra\n0,1.0\n1,2.0\n");
    CsvSchema schema;
    schema.timestamp_column = "time";
    schema.channel_columns["i_zra"] = "corrosion_current_uA";
    const auto r = ingest_csv(dir / "s.csv", schema, SensorMeta{"x", "p", CoatingClass::non_chromate});
    EXPECT_EQ(r.sensor_id(), "x");
    EXPECT_EQ(r.coating_class(), CoatingClass::non_chromate);
    EXPECT_TRUE(r.has(Channel::corrosion_current_uA));
}

TEST(Ingest, RoundTripIsIdempotent) {
    fixture::TempDir dir;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 90.0);
    const auto t = fixture::grid(40, 1.0 / 12.0);
    std::vector<double> a(40), b(40), c(40), d(40);
    for (std::size_t i = 0; i < 40; ++i) {
        a[i] = u(rng) / 7.0;
        b[i] = u(rng);
        c[i] = u(rng) * 100.0;
        d[i] = u(rng) - 20.0;
    }
    const auto rec = fixture::record("rt", t, a, d, b, c);
    write_csv(rec, dir / "rt.csv");
    const SensorMeta meta{"rt", "bench", CoatingClass::chromate};
    const auto once = ingest_csv(dir / "rt.csv", {}, meta);
    EXPECT_EQ(once, rec);
    write_csv(once, dir / "rt2.csv");
    EXPECT_EQ(ingest_csv(dir / "rt2.csv", {}, meta), once);
}

TEST(Labels, RoundTrip) {
    fixture::TempDir dir;
    const std::vector<FailureLabel> labels{{"a", 12.5, LabelSource::visual},
                                           {"b", 100.0 / 3.0, LabelSource::data_driven}};
    write_labels_csv(labels, dir / "labels.csv");
    EXPECT_EQ(read_labels_csv(dir / "labels.csv"), labels);
    EXPECT_NE(find_label(labels, "b"), nullptr);
    EXPECT_EQ(find_label(labels, "c"), nullptr);
}

TEST(Enums, RoundTripNames) {
    for (auto c : {Channel::corrosion_current_uA, Channel::relative_humidity_pct, Channel::conductance_uS,
                   Channel::temperature_C}) {
        EXPECT_EQ(channel_from_string(to_string(c)), c);
    }
    EXPECT_EQ(event_kind_from_string("hybrid"), EventKind::hybrid);
    EXPECT_EQ(coating_from_string("non_chromate"), CoatingClass::non_chromate);
    EXPECT_EQ(label_source_from_string("data_driven"), LabelSource::data_driven);
    EXPECT_THROW((void)event_kind_from_string("rain"), DomainError);
    EXPECT_FALSE(channel_from_string("voltage").has_value());
}
