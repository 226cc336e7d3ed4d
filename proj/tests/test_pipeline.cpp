#include "fixtures.hpp"

#include "coatcast/pipeline.hpp"
#include "coatcast/synth.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

using namespace coatcast;

namespace {

json base_config(const std::filesystem::path& data) {
    return {
        {"data_dir", data.string()},
        {"event_kind", "corrosion"},
        {"label_source", "visual"},
        {"predict", {{"quantile_mode", "gaussian"}, {"n_traj", 50}}},
        {"split", {{"train", {"S1", "S4", "S6"}}, {"val", {"S2"}}, {"test", {"S3", "S5"}}}},
    };
}

class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fixture::TempDir;
        synth::CohortSpec cs;
        cs.n_days = 30;
        cs.failure_days = {18, 20, 22, 19, 21, 23};
        synth::write_cohort(synth::make_cohort(cs), dir_->path() / "data");
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static std::filesystem::path data() { return dir_->path() / "data"; }
    static std::filesystem::path scratch(const std::string& name) { return dir_->path() / name; }

    static fixture::TempDir* dir_;
};

fixture::TempDir* Pipeline::dir_ = nullptr;

} // namespace

TEST(PipelineConfig, DefaultsAndValidation) {
    const auto c = pipeline_config_from_json(base_config("/nowhere"));
    EXPECT_EQ(c.cpd.window, kDefaultCpdWindow);
    EXPECT_EQ(c.predict.n_traj, 50u);
    EXPECT_EQ(c.events.kind, EventKind::corrosion);
    EXPECT_EQ(json(c.hawkes.hyper), json(default_hyper(EventKind::corrosion, Setting::lab)));

    auto overlap = base_config("/nowhere");
    overlap["split"]["test"] = {"S1"};
    EXPECT_THROW((void)pipeline_config_from_json(overlap), ConfigError);
    auto no_val = base_config("/nowhere");
    no_val["split"]["val"] = json::array();
    EXPECT_THROW((void)pipeline_config_from_json(no_val), ConfigError);
    auto bad_kind = base_config("/nowhere");
    bad_kind["event_kind"] = "rust";
    EXPECT_THROW((void)pipeline_config_from_json(bad_kind), ConfigError);
    auto bad_cpd = base_config("/nowhere");
    bad_cpd["cpd"] = {{"window", 1}};
    EXPECT_THROW((void)pipeline_config_from_json(bad_cpd), ConfigError);
    EXPECT_THROW((void)pipeline_config_from_json(json::object()), ConfigError);
}

TEST(PipelineConfig, JsonRoundTripAndHash) {
    const auto c = pipeline_config_from_json(base_config("/nowhere"));
    const auto back = pipeline_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
    auto other = base_config("/nowhere");
    other["seed"] = 9;
    EXPECT_NE(config_hash(pipeline_config_from_json(other)), config_hash(c));
}

TEST_F(Pipeline, MissingDataIsConfigError) {
    auto cfg = base_config(scratch("absent"));
    EXPECT_THROW((void)run_pipeline(pipeline_config_from_json(cfg), scratch("run_absent")), ConfigError);
    cfg = base_config(data());
    cfg["split"]["test"] = {"S3", "S99"};
    EXPECT_THROW((void)run_pipeline(pipeline_config_from_json(cfg), scratch("run_unknown")), ConfigError);
}

TEST_F(Pipeline, RunsAllStagesReproducibly) {
    const auto cfg = pipeline_config_from_json(base_config(data()));
    const auto a = run_pipeline(cfg, scratch("run_a"));
    ASSERT_TRUE(a.ok);
    ASSERT_EQ(a.stages.size(), kStageNames.size());
    for (std::size_t i = 0; i < a.stages.size(); ++i) {
        EXPECT_EQ(a.stages[i].name, kStageNames[i]);
        EXPECT_EQ(a.stages[i].status, "ok") << a.stages[i].error;
    }
    EXPECT_EQ(a.config_hash, config_hash(cfg));
    EXPECT_EQ(a.seed_source, "config");
    for (const char* f : {"manifest.json", "config.json", "fit/model.json", "predict/windows.json",
                          "evaluate/evaluation.json", "events/S3.json", "tailfit/S1.json"}) {
        EXPECT_TRUE(std::filesystem::exists(scratch("run_a") / f)) << f;
    }
    EXPECT_FALSE(std::filesystem::exists(scratch("run_a") / ".lock"));

    const auto windows = io::read_json(scratch("run_a") / "predict" / "windows.json");
    EXPECT_EQ(windows.size(), 6u); // every split sensor gets a window
    (void)run_pipeline(cfg, scratch("run_b"));
    EXPECT_EQ(windows, io::read_json(scratch("run_b") / "predict" / "windows.json"));
    EXPECT_EQ(io::read_json(scratch("run_a") / "fit" / "model.json"),
              io::read_json(scratch("run_b") / "fit" / "model.json"));
}

TEST_F(Pipeline, SeedFromEnvironment) {
    ::setenv(kSeedEnvVar, "42", 1);
    const auto m = run_pipeline(pipeline_config_from_json(base_config(data())), scratch("run_env"));
    ::unsetenv(kSeedEnvVar);
    EXPECT_EQ(m.seed, 42u);
    EXPECT_EQ(m.seed_source, kSeedEnvVar);

    ::setenv(kSeedEnvVar, "abc", 1);
    EXPECT_THROW((void)run_pipeline(pipeline_config_from_json(base_config(data())), scratch("run_env2")),
                 ConfigError);
    ::unsetenv(kSeedEnvVar);
}

TEST_F(Pipeline, LockedDirectoryRefuses) {
    const auto out = scratch("run_locked");
    std::filesystem::create_directories(out);
    std::ofstream(out / ".lock") << "";
    EXPECT_THROW((void)run_pipeline(pipeline_config_from_json(base_config(data())), out), Error);
    EXPECT_TRUE(std::filesystem::exists(out / ".lock"));
}

TEST_F(Pipeline, StageFailureSkipsTheRest) {
    const auto broken = scratch("broken_data");
    std::filesystem::copy(data(), broken, std::filesystem::copy_options::recursive);
    std::ofstream(broken / "S3.csv") << "time,nonsense\n1,2\n";
    const auto m = run_pipeline(pipeline_config_from_json(base_config(broken)), scratch("run_broken"));
    EXPECT_FALSE(m.ok);
    EXPECT_EQ(m.stages[0].status, "failed");
    EXPECT_FALSE(m.stages[0].error.empty());
    for (std::size_t i = 1; i < m.stages.size(); ++i) {
        EXPECT_EQ(m.stages[i].status, "skipped");
    }
    const auto written = io::read_json(scratch("run_broken") / "manifest.json");
    EXPECT_FALSE(written.at("ok").get<bool>());
}
