#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "dclnas/error.hpp"
#include "dclnas/oracle.hpp"
#include "reference.hpp"

using namespace dclnas;

TEST(Oracle, LandscapeSeededAndBounded) {
    const auto s = nasbench201_space();
    const SyntheticLandscape a(s, 3), b(s, 3), c(s, 4);
    Rng rng = make_rng(1);
    bool differs = false;
    for (int i = 0; i < 200; ++i) {
        const auto x = random_architecture(s, rng);
        EXPECT_EQ(a.fitness(x), b.fitness(x));
        EXPECT_GE(a.fitness(x), 0.0);
        EXPECT_LE(a.fitness(x), 1.0);
        differs |= a.fitness(x) != c.fitness(x);
        const auto t = a.evaluate(x).test_acc;
        ASSERT_TRUE(t);
        EXPECT_EQ(*t, b.test_accuracy(x));
    }
    EXPECT_TRUE(differs);
}

TEST(Oracle, LandscapeDependsOnlyOnPathMultiset) {
    const auto s = nasbench101_space();
    Architecture a({kInputOp, 0, 2, 1, kOutputOp}, std::vector<std::uint8_t>(25, 0));
    for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}, {1, 4}})
        a.set_edge(i, j, true);
    Architecture b({kInputOp, 2, 0, 1, kOutputOp}, std::vector<std::uint8_t>(25, 0));
    for (auto [i, j] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}, {2, 4}})
        b.set_edge(i, j, true);
    const SyntheticLandscape land(s, 0);
    EXPECT_EQ(land.fitness(a), land.fitness(b));
}

TEST(Oracle, LandscapeRawMatchesHandSum) {
    const auto s = nasbench101_space();
    const SyntheticLandscape land(s, 8);
    Rng rng = make_rng(2);
    const auto& p = land.params();
    for (int i = 0; i < 100; ++i) {
        const auto a = random_architecture(s, rng);
        const auto routes = ref::routes(a);
        double v = p.baseline;
        std::size_t longest = 0;
        for (const auto& r : routes) {
            for (std::size_t t = 0; t < r.size(); ++t) {
                v += land.op_weight(r[t], static_cast<int>(t));
                if (t + 1 < r.size()) v += land.pair_weight(r[t], r[t + 1]);
            }
            longest = std::max(longest, r.size());
        }
        v += p.longest_bonus * static_cast<double>(longest) - p.path_penalty * static_cast<double>(routes.size() - 1);
        EXPECT_NEAR(land.raw(a), v, 1e-12);
    }
}

TEST(Oracle, LandscapeHasUsefulSpread) {
    const auto s = nasbench201_space();
    const auto all = enumerate_space(s);
    const SyntheticLandscape land(s, 0);
    std::vector<double> f;
    for (const auto& a : all) f.push_back(land.fitness(a));
    std::sort(f.begin(), f.end());
    EXPECT_GT(f[f.size() * 3 / 4] - f[f.size() / 4], 0.1);
}

TEST(Oracle, LedgerCountsOnlyNewArchitectures) {
    const auto s = nasbench201_space();
    const SyntheticLandscape land(s, 0);
    BudgetLedger ledger(3);
    Rng rng = make_rng(3);
    const auto a = random_architecture(s, rng);
    ledger.query(land, a);
    ledger.query(land, a);
    EXPECT_EQ(ledger.fes(), 1);
    EXPECT_TRUE(ledger.archived(a));
    Architecture b = a;
    b.set_op(1, (a.op(1) + 1) % s.num_ops());
    ledger.query(land, b);
    Architecture c = b;
    c.set_op(2, (b.op(2) + 1) % s.num_ops());
    ledger.query(land, c);
    EXPECT_EQ(ledger.fes(), 3);
    EXPECT_EQ(ledger.remaining(), 0);
    Architecture d = c;
    d.set_op(3, (c.op(3) + 1) % s.num_ops());
    EXPECT_THROW(ledger.query(land, d), BudgetExhausted);
    EXPECT_EQ(ledger.query(land, a).val_acc, land.fitness(a));
    EXPECT_EQ(ledger.fes(), 3);
    EXPECT_EQ(ledger.archive().size(), 3u);
    EXPECT_THROW(BudgetLedger(-1), ParameterError);
}

TEST(Oracle, TabularRoundTrip) {
    const auto s = nasbench101_space();
    const SyntheticLandscape land(s, 2);
    TabularOracle t(s);
    Rng rng = make_rng(4);
    for (int i = 0; i < 30; ++i) {
        const auto a = random_architecture(s, rng);
        if (t.lookup(arch_hash(a))) continue;
        auto sample = land.evaluate(a);
        if (i % 3 == 0) sample.test_acc.reset();
        t.add(sample);
    }
    std::stringstream ss;
    t.write(ss);
    const auto back = TabularOracle::read(ss, s);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& x = t.entries()[i];
        const auto y = back.evaluate(x.arch);
        EXPECT_EQ(y.val_acc, x.val_acc);
        EXPECT_EQ(y.test_acc, x.test_acc);
        EXPECT_EQ(y.source, SampleSource::tabular);
    }
    EXPECT_THROW(t.add(t.entries()[0]), ParameterError);
}

TEST(Oracle, TabularRejectsBadRecordsWithLineNumber) {
    const auto s = nasbench101_space();
    const std::string good =
        R"({"ops":["input","conv3x3-bn-relu","output"],"adjacency":"011001000","val_acc":0.5,"test_acc":0.4})";
    auto expect_line = [&](const std::string& text, const std::string& needle) {
        std::stringstream ss(text);
        try {
            TabularOracle::read(ss, s);
            FAIL() << "accepted: " << text;
        } catch (const IoError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_line(good + "\n" + good + "\n", "line 2");
    expect_line(good + "\n{not json\n", "line 2");
    expect_line(R"({"ops":["input","conv3x3-bn-relu","output"],"adjacency":"011001000","val_acc":1.5})", "line 1");
    expect_line(R"({"ops":["input","conv3x3-bn-relu","output"],"adjacency":"010000000","val_acc":0.5})", "line 1");
    EXPECT_THROW(TabularOracle::load("/nonexistent/table.jsonl", s), IoError);
}

TEST(Oracle, TabularMissIsLookupError) {
    const auto s = nasbench101_space();
    TabularOracle t(s);
    EXPECT_THROW(t.evaluate(random_architecture(s, 1)), LookupError);
}
