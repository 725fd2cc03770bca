#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fame/harness.hpp"
#include "helpers.hpp"

using namespace fame;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("fame_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig with_tasks(RunConfig cfg, std::size_t k) {
    cfg.sequence.tasks.resize(k);
    return cfg;
}

}  // namespace

TEST(Harness, CurveGridEndsAtEveryBoundary) {
    auto cfg = test::small_gridworld_config(Method::reset, 0);
    const auto grid = curve_grid(cfg);
    EXPECT_EQ(grid.size(), 1 + 3 * cfg.curve_points);
    for (std::size_t k = 1; k <= 3; ++k)
        EXPECT_NE(std::find(grid.begin(), grid.end(), k * cfg.sequence.steps_per_task), grid.end());
}

TEST(Harness, RunsAreDeterministic) {
    for (Method m : {Method::fame_q, Method::finetune}) {
        const auto a = make_run(test::small_gridworld_config(m, 3))->run();
        const auto b = make_run(test::small_gridworld_config(m, 3))->run();
        EXPECT_EQ(curves_csv(a), curves_csv(b));
        EXPECT_EQ(tasks_csv(a), tasks_csv(b));
    }
    for (Method m : {Method::fame_kl, Method::fame_wd}) {
        const auto a = make_run(test::small_pointmass_config(m, 3))->run();
        const auto b = make_run(test::small_pointmass_config(m, 3))->run();
        EXPECT_EQ(curves_csv(a), curves_csv(b));
    }
}

TEST(Harness, DifferentSeedsDiffer) {
    const auto a = make_run(test::small_gridworld_config(Method::finetune, 1))->run();
    const auto b = make_run(test::small_gridworld_config(Method::finetune, 2))->run();
    EXPECT_NE(curves_csv(a), curves_csv(b));
}

TEST(Harness, EveryTaskSpendsExactlyItsBudget) {
    for (Method m : {Method::fame_q, Method::reset, Method::finetune}) {
        const auto cfg = test::small_gridworld_config(m, 4);
        const auto r = make_run(cfg)->run();
        ASSERT_EQ(r.tasks.size(), 3u);
        for (const auto& t : r.tasks) EXPECT_EQ(t.eval_steps + t.train_steps, cfg.sequence.steps_per_task);
    }
    for (Method m : {Method::fame_kl, Method::fame_wd}) {
        const auto cfg = test::small_pointmass_config(m, 4);
        for (const auto& t : make_run(cfg)->run().tasks)
            EXPECT_EQ(t.eval_steps + t.train_steps, cfg.sequence.steps_per_task);
    }
}

TEST(Harness, FameRecordsDecisionsAndObjectives) {
    const auto r = make_run(test::small_gridworld_config(Method::fame_q, 5))->run();
    EXPECT_EQ(r.tasks[0].chosen, Candidate::random);
    EXPECT_FALSE(r.tasks[0].evaluated);
    EXPECT_TRUE(r.tasks[1].evaluated);
    EXPECT_TRUE(r.tasks[1].candidate_means[0].has_value());
    EXPECT_GT(r.tasks[1].eval_steps, 0u);
    for (const auto& t : r.tasks) {
        ASSERT_TRUE(t.objective_after.has_value());
        if (t.objective_before) {
            EXPECT_LE(*t.objective_after, *t.objective_before + 1e-12);
        }
    }
    EXPECT_TRUE(r.tasks[1].cf_fast.has_value());
    ASSERT_TRUE(r.fast_curve.has_value());
}

TEST(Harness, ForcedFastWithoutIntegrationMatchesFinetune) {
    auto fame = test::small_gridworld_config(Method::fame_q, 6);
    fame.forced_warmup = Candidate::fast;
    fame.integrate = false;
    const auto a = make_run(fame)->run();
    const auto b = make_run(test::small_gridworld_config(Method::finetune, 6))->run();
    ASSERT_TRUE(a.fast_curve.has_value());
    EXPECT_EQ(a.fast_curve->values, b.curve.values);

    auto fame_wd = test::small_pointmass_config(Method::fame_wd, 6);
    fame_wd.forced_warmup = Candidate::fast;
    fame_wd.integrate = false;
    const auto c = make_run(fame_wd)->run();
    const auto d = make_run(test::small_pointmass_config(Method::finetune, 6))->run();
    EXPECT_EQ(c.fast_curve->values, d.curve.values);
}

TEST(Harness, ForcedRandomMatchesReset) {
    auto fame = test::small_gridworld_config(Method::fame_q, 7);
    fame.forced_warmup = Candidate::random;
    const auto a = make_run(fame)->run();
    const auto b = make_run(test::small_gridworld_config(Method::reset, 7))->run();
    EXPECT_EQ(a.fast_curve->values, b.curve.values);
}

TEST(Harness, SingleTaskIdentities) {
    const auto reset = make_run(with_tasks(test::small_gridworld_config(Method::reset, 8), 1))->run();
    const auto finetune = make_run(with_tasks(test::small_gridworld_config(Method::finetune, 8), 1))->run();
    EXPECT_EQ(reset.curve.values, finetune.curve.values);
    EXPECT_EQ(forgetting(reset.curve).mean, 0.0);
    EXPECT_EQ(forward_transfer(reset.curve, reset.curve).mean, 0.0);
    const auto fame = make_run(with_tasks(test::small_gridworld_config(Method::fame_q, 8), 1))->run();
    EXPECT_EQ(fame.fast_curve->values, reset.curve.values);
}

TEST(Harness, CheckpointResumeReproducesUninterruptedRun) {
    for (Method m : {Method::fame_q, Method::fame_kl}) {
        const bool grid = m == Method::fame_q;
        auto base = grid ? test::small_gridworld_config(m, 9) : test::small_pointmass_config(m, 9);
        const auto full_dir = scratch("full"), part_dir = scratch("part");
        base.output_dir = full_dir.string();
        run_experiment(base);

        auto first = base;
        first.output_dir = part_dir.string();
        first.checkpoint = true;
        first.stop_after_tasks = 1;
        const auto partial = run_experiment(first);
        EXPECT_FALSE(partial.complete);
        ASSERT_TRUE(fs::exists(part_dir / "checkpoint.json"));

        auto second = first;
        second.stop_after_tasks.reset();
        const auto resumed = run_experiment(second, part_dir / "checkpoint.json");
        EXPECT_TRUE(resumed.complete);
        for (const char* f : {"curves.csv", "tasks.csv", "summary.csv"})
            EXPECT_EQ(slurp(full_dir / f), slurp(part_dir / f)) << f;
    }
}

TEST(Harness, CheckpointFromAnotherRunIsRejected) {
    auto cfg = test::small_gridworld_config(Method::fame_q, 10);
    const auto j = make_run(cfg)->checkpoint();
    cfg.seed = 11;
    EXPECT_THROW(make_run(cfg)->restore(j), std::invalid_argument);
}

TEST(Harness, OutputsHaveExpectedShape) {
    const auto dir = scratch("shape");
    auto cfg = test::small_gridworld_config(Method::fame_q, 12);
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    const auto curves = slurp(dir / "curves.csv");
    EXPECT_EQ(curves.rfind(kCurvesHeader, 0), 0u);
    const auto loaded = load_curves_csv(dir / "curves.csv");
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].label, "FAME-Q");
    EXPECT_EQ(loaded[1].label, "FAME-Q:fast");
    EXPECT_EQ(loaded[0].curve.times.size(), 1 + 3 * cfg.curve_points);
    for (const auto& series : loaded[0].curve.values)
        for (double p : series) EXPECT_TRUE(std::isfinite(p));
    std::istringstream tasks(slurp(dir / "tasks.csv"));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(tasks, line)) ++rows;
    EXPECT_EQ(rows, 4u);
}

TEST(Harness, ReportAgainstOwnBaselineHasZeroTransfer) {
    std::vector<LoadedCurve> curves;
    for (std::uint64_t seed : {1, 2}) {
        const auto dir = scratch("report" + std::to_string(seed));
        auto cfg = test::small_gridworld_config(Method::reset, seed);
        cfg.output_dir = dir.string();
        run_experiment(cfg);
        for (auto& c : load_curves_csv(dir / "curves.csv")) curves.push_back(std::move(c));
    }
    for (const auto& row : compute_report(curves))
        if (row.metric == "forward_transfer") {
            EXPECT_EQ(row.value, 0.0);
        }
}

TEST(Harness, ConfigValidation) {
    auto cfg = test::small_gridworld_config(Method::fame_q, 0);
    cfg.meta_records = cfg.sequence.steps_per_task + 1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = test::small_gridworld_config(Method::fame_q, 0);
    cfg.warmup_episodes = 1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = test::small_gridworld_config(Method::fame_kl, 0);
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = test::small_gridworld_config(Method::fame_q, 0);
    cfg.sequence.tasks[1] = test::small_pointmass_config(Method::fame_kl, 0).sequence.tasks[0];
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = test::small_gridworld_config(Method::fame_q, 0);
    cfg.sequence.tasks[1].grid.width = 5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    cfg = test::small_gridworld_config(Method::fame_q, 0);
    cfg.meta_records = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);

    EXPECT_NO_THROW(test::small_gridworld_config(Method::fame_q, 0).validate());
}

TEST(Harness, ShippedConfigsParseAndValidate) {
    for (const auto& entry : fs::directory_iterator(fs::path(FAME_SOURCE_DIR) / "configs")) {
        if (entry.path().extension() != ".json") continue;
        SCOPED_TRACE(entry.path().string());
        const auto cfg = load_config(entry.path().string());
        EXPECT_NO_THROW(cfg.validate());
        EXPECT_EQ(cfg.sequence.size(), 3u);
    }
}

TEST(Harness, ParseConfigErrors) {
    EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"method": "Nope", "steps_per_task": 10, "tasks": []})")),
                 std::invalid_argument);
    const auto j = nlohmann::json::parse(R"({
        "method": "Reset", "steps_per_task": 100,
        "tasks": [{"generator": "gridworld", "seed": 1, "params": {"goal": [4, 4]}}],
        "order": [0, 3]})");
    EXPECT_ANY_THROW(parse_config(j));
}
