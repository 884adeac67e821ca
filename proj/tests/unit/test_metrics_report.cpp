#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dclnas/error.hpp"
#include "dclnas/metrics.hpp"
#include "dclnas/report.hpp"
#include "reference.hpp"

using namespace dclnas;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SweepRow row(int budget, std::vector<double> taus) {
    SweepRow r;
    r.budget = budget;
    r.test_size = 100;
    r.taus = taus;
    r.mean_tau = mean(taus);
    r.std_tau = sample_std(taus);
    r.mean_val_tau = r.mean_tau;
    for (std::size_t i = 0; i < taus.size(); ++i) r.seeds.push_back(i);
    return r;
}

}  // namespace

TEST(Metrics, MeanAndSampleStd) {
    EXPECT_EQ(mean({1.0, 2.0, 3.0}), 2.0);
    EXPECT_NEAR(sample_std({1.0, 2.0, 3.0}), 1.0, 1e-15);
    EXPECT_EQ(sample_std({4.0}), 0.0);
}

TEST(Metrics, SpecChecks) {
    SweepSpec s;
    EXPECT_NO_THROW(check_spec(s));
    s.label_budgets = {1};
    s.repeats = 0;
    EXPECT_THROW(check_spec(s), ConfigError);
}

TEST(Metrics, SweepShapesSeedsAndDeterminism) {
    const auto s = nasbench201_space();
    const auto t = PathTable::build(s);
    const SyntheticLandscape land(s, 0);
    std::vector<LabeledSample> pool;
    const auto all = enumerate_space(s);
    for (std::size_t i = 0; i < all.size(); i += 31) pool.push_back(land.evaluate(all[i]));
    SweepSpec spec;
    spec.label_budgets = {10, 30};
    spec.validation_budget = 20;
    spec.repeats = 3;
    spec.test_size = 100;
    SweepConfig cfg;
    cfg.finetune.epochs = 10;
    cfg.finetune.batch_size = 16;
    cfg.d_e = 16;
    cfg.seed = 5;
    const auto rows = run_sweep(s, t, pool, spec, cfg);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.taus.size(), 3u);
        EXPECT_EQ(r.seeds.size(), 3u);
        EXPECT_EQ(r.test_size, 100);
        EXPECT_NEAR(r.mean_tau, mean(r.taus), 1e-15);
        EXPECT_NEAR(r.std_tau, sample_std(r.taus), 1e-15);
        for (double tau : r.taus) {
            EXPECT_GE(tau, -1.0);
            EXPECT_LE(tau, 1.0);
        }
    }
    const auto again = run_sweep(s, t, pool, spec, cfg);
    EXPECT_EQ(again[1].taus, rows[1].taus);
    spec.label_budgets = {10000};
    EXPECT_THROW(run_sweep(s, t, pool, spec, cfg), ParameterError);
    spec.label_budgets = {10};
    auto dup = pool;
    dup.push_back(pool[0]);
    EXPECT_THROW(run_sweep(s, t, dup, spec, cfg), ParameterError);
}

TEST(Report, CsvRoundTripIsExact) {
    ReportTable tbl{"x", {"a", "b"}, {{0.1, 1.0 / 3.0}, {1e-300, -2.5}}};
    const auto back = parse_csv("x", to_csv(tbl));
    EXPECT_EQ(back, tbl);
    EXPECT_THROW(parse_csv("x", "a,b\n1\n"), IoError);
}

TEST(Report, TablesFromRowsAndHistory) {
    const auto st = sweep_table({row(78, {0.1, 0.3}), row(156, {0.2, 0.4})});
    EXPECT_EQ(st.rows.size(), 2u);
    EXPECT_EQ(st.rows[0][0], 78.0);
    const auto ht = history_table({{{0, 20, 0.5}, {1, 30, 0.6}}, {{0, 20, 0.4}}});
    EXPECT_EQ(ht.rows.size(), 3u);
}

TEST(Report, EmitWritesFilesAndSummary) {
    const auto dir = fs::temp_directory_path() / "dclnas_report_test";
    fs::remove_all(dir);
    ReportBundle b;
    b.rows = {row(78, {0.1, 0.3}), row(156, {0.2, 0.4})};
    b.seeds = {7};
    b.tables.push_back(history_table({{{0, 20, 0.5}}}));
    emit_report(b, dir);
    EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
    EXPECT_TRUE(fs::exists(dir / (b.tables[0].name + ".csv")));
    const auto summary = slurp(dir / "summary.json");
    EXPECT_EQ(summary, summary_json(b));
    EXPECT_NE(summary.find("\"schema_version\": 1"), std::string::npos);
    EXPECT_NE(summary.find("\"test_size\": \"all\""), std::string::npos);
    EXPECT_EQ(parse_csv("sweep", slurp(dir / "sweep.csv")), sweep_table(b.rows));
    fs::remove_all(dir);
}

TEST(Report, EmptyBundleWritesNothing) {
    const auto dir = fs::temp_directory_path() / "dclnas_report_empty";
    fs::remove_all(dir);
    EXPECT_THROW(emit_report(ReportBundle{}, dir), ParameterError);
    EXPECT_FALSE(fs::exists(dir));
}
