#include "oracles.hpp"

#include "coatcast/events.hpp"
#include "coatcast/io.hpp"
#include "coatcast/synth.hpp"

#include <gtest/gtest.h>

#include "fixtures.hpp"

#include <cmath>

using namespace coatcast;

TEST(SynthSensor, ShapeAndGroundTruth) {
    synth::SynthSpec spec;
    spec.n_days = 3;
    spec.peaks = {{10.01, 5.0}};
    spec.rh_episodes = {{2.0, 4.0}};
    const auto s = synth::generate_sensor(spec);
    EXPECT_EQ(s.record.size(), static_cast<std::size_t>(std::lround(72.0 / spec.sample_period)));
    EXPECT_EQ(s.record.channels().size(), 4u);
    ASSERT_EQ(s.truth.peaks.size(), 1u);
    EXPECT_NEAR(s.truth.peaks[0].time, 10.0, 1e-9);
    EXPECT_EQ(s.truth.tau_by_day.size(), 3u);
    const auto& cur = s.record.channel(Channel::corrosion_current_uA);
    EXPECT_NEAR(cur.value_at(s.truth.peaks[0].time), 5.1, 1e-12);
    EXPECT_NEAR(cur.value_at(18.0), 0.1 + 5.0 * std::exp(-8.0 / 4.0), 1e-9);
    EXPECT_DOUBLE_EQ(cur.value_at(24.0 + 10.0), 0.1);
    const auto& rh = s.record.channel(Channel::relative_humidity_pct);
    EXPECT_DOUBLE_EQ(rh.value_at(3.0), 90.0);
    EXPECT_DOUBLE_EQ(rh.value_at(4.0), 40.0);
}

TEST(SynthSensor, ThreePeaksPerDayAreExtracted) {
    synth::SynthSpec spec;
    spec.n_days = 4;
    spec.tau_by_day = {2.0};
    for (int d = 0; d < 4; ++d) {
        for (double h : {3.0, 11.0, 19.0}) {
            spec.peaks.push_back({24.0 * d + h, 4.0});
        }
    }
    const auto s = synth::generate_sensor(spec);
    EXPECT_EQ(extract_events(s.record, EventDefinition::corrosion()).size(), 12u);
}

TEST(SynthSensor, NoiseIsSeeded) {
    synth::SynthSpec spec;
    spec.peaks = synth::daily_peaks(spec.n_days, 12.0, 3.0);
    spec.noise_sigma = 0.1;
    spec.seed = 5;
    const auto a = synth::generate_sensor(spec);
    const auto b = synth::generate_sensor(spec);
    EXPECT_EQ(a.record, b.record);
    spec.seed = 6;
    EXPECT_NE(synth::generate_sensor(spec).record, a.record);
    for (double v : a.record.channel(Channel::corrosion_current_uA).values()) {
        EXPECT_GE(v, 0.0);
    }
}

TEST(SynthSensor, ValidatesSpec) {
    synth::SynthSpec spec;
    spec.n_days = 0;
    EXPECT_THROW((void)synth::generate_sensor(spec), DomainError);
    spec = {};
    spec.tau_by_day = {1.0, 2.0};
    EXPECT_THROW(spec.validate(), DomainError);
    spec = {};
    spec.rh_high = 120.0;
    EXPECT_THROW(spec.validate(), DomainError);
    spec = {};
    spec.rh_episodes = {{3.0, 2.0}};
    EXPECT_THROW(spec.validate(), DomainError);
}

TEST(SynthSensor, TauProfiles) {
    const auto p = synth::step_tau_profile(6, 3.0, 5.0, 4);
    EXPECT_EQ(p, (std::vector<double>{3.0, 3.0, 3.0, 3.0, 5.0, 5.0}));
    const auto peaks = synth::daily_peaks(3, 7.0, 2.0);
    ASSERT_EQ(peaks.size(), 3u);
    EXPECT_DOUBLE_EQ(peaks[2].time, 55.0);
}

TEST(HawkesStream, PoissonCount) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        total += static_cast<double>(
            synth::generate_hawkes_stream({2.0, 0.0, 1.0}, PeriodicKDE::uniform(), 1.0, 0.0, 1000.0, seed,
                                          EventKind::environment)
                .size());
    }
    EXPECT_NEAR(total / 100.0, 2000.0, 3.0 * std::sqrt(20.0));
}

TEST(HawkesStream, BranchingMeanWithSlowDecay) {
    // With a long horizon relative to 1/beta the mean count approaches
    // alpha T / (1 - omega E[m]).
    const HawkesParams p{0.5, 0.4, 2.0};
    double total = 0.0;
    const int runs = 200;
    for (int seed = 0; seed < runs; ++seed) {
        total += static_cast<double>(
            synth::generate_hawkes_stream(p, PeriodicKDE::uniform(), 1.0, 0.0, 400.0, 7000 + seed,
                                          EventKind::environment)
                .size());
    }
    const double expected = 0.5 * 400.0 / (1.0 - 0.4);
    EXPECT_NEAR(total / runs, expected, 0.03 * expected);
}

TEST(HawkesStream, MarksPositiveAndDeterministic) {
    const auto a = synth::generate_hawkes_stream({0.5, 0.3, 0.5}, PeriodicKDE::uniform(), 0.5, 1.0, 200.0, 4);
    const auto b = synth::generate_hawkes_stream({0.5, 0.3, 0.5}, PeriodicKDE::uniform(), 0.5, 1.0, 200.0, 4);
    EXPECT_EQ(a, b);
    for (const auto& e : a.events()) {
        EXPECT_GT(e.mark, 0.0);
    }
}

TEST(Cohort, PlantedLabelsAndCsv) {
    synth::CohortSpec cs;
    cs.n_days = 35;
    const auto cohort = synth::make_cohort(cs);
    ASSERT_EQ(cohort.specs.size(), cs.failure_days.size());
    ASSERT_EQ(cohort.planted_labels.size(), cs.failure_days.size());
    for (std::size_t i = 0; i < cs.failure_days.size(); ++i) {
        EXPECT_DOUBLE_EQ(cohort.planted_labels[i].time, 24.0 * cs.failure_days[i]);
        EXPECT_EQ(cohort.planted_labels[i].source, LabelSource::visual);
        EXPECT_DOUBLE_EQ(cohort.specs[i].tau_on_day(cs.failure_days[i]), cs.tau_after);
        EXPECT_DOUBLE_EQ(cohort.specs[i].tau_on_day(cs.failure_days[i] - 1), cs.tau_before);
    }
    fixture::TempDir dir;
    synth::write_cohort(cohort, dir.path());
    const auto index = io::read_dataset_index(dir / "sensors.json");
    ASSERT_EQ(index.size(), cohort.specs.size());
    const auto rec = ingest_csv(dir.path() / index[0].csv, {}, index[0].meta);
    EXPECT_EQ(rec, synth::generate_sensor(cohort.specs[0]).record);
    EXPECT_EQ(read_labels_csv(dir / "labels.csv"), cohort.planted_labels);
}
