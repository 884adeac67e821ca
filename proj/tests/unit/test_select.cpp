#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dclnas/error.hpp"
#include "dclnas/select.hpp"
#include "reference.hpp"

using namespace dclnas;

namespace {

struct Fixture {
    SearchSpace space = nasbench201_space();
    PathTable table = PathTable::build(space);
    PredictorModel model{[this] {
                             auto d = default_dims(space, table);
                             d.d_e = 16;
                             return d;
                         }(),
                         5};
};

std::vector<int> hash_ranks(const std::vector<ArchHash>& hs) {
    std::vector<int> order(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return hs[static_cast<std::size_t>(a)] < hs[static_cast<std::size_t>(b)]; });
    std::vector<int> rank(hs.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
    return rank;
}

void check_families(const std::vector<HardEncoding>& parents, const std::vector<HardEncoding>& kids,
                    const std::vector<ArchHash>& hashes, int c_a) {
    std::vector<std::vector<int>> dist;
    for (const auto& p : parents) {
        std::vector<int> row;
        for (const auto& k : kids) row.push_back(manhattan_distance(p, k));
        dist.push_back(row);
    }
    const auto want = ref::families(dist, hash_ranks(hashes), c_a);
    const auto got = build_families(parents, kids, hashes, c_a);
    ASSERT_EQ(got.families.size(), want.size());
    std::set<int> claimed;
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(got.families[i], want[i]) << "parent " << i;
        claimed.insert(got.families[i].begin(), got.families[i].end());
    }
    for (int o : got.overflow) EXPECT_FALSE(claimed.contains(o));
    EXPECT_EQ(claimed.size() + got.overflow.size(), kids.size());
}

}  // namespace

TEST(Select, HandBuiltFamilies) {
    const std::vector<HardEncoding> parents{HardEncoding::from_bits("000000"), HardEncoding::from_bits("111111")};
    const std::vector<HardEncoding> kids{HardEncoding::from_bits("111110"), HardEncoding::from_bits("000001"),
                                         HardEncoding::from_bits("110000"), HardEncoding::from_bits("011111")};
    std::vector<ArchHash> hashes(4);
    for (int i = 0; i < 4; ++i) hashes[static_cast<std::size_t>(i)].digest[0] = static_cast<std::uint8_t>(10 - i);
    const auto f = build_families(parents, kids, hashes, 2);
    EXPECT_EQ(f.families[0], (std::vector<int>{1, 2}));
    EXPECT_EQ(f.families[1], (std::vector<int>{3, 0}));
    check_families(parents, kids, hashes, 2);
}

TEST(Select, FamilyTiesBreakByHashAndGreedOrder) {
    // All offspring equidistant from parent 0; hash order decides.
    const std::vector<HardEncoding> parents{HardEncoding::from_bits("0000"), HardEncoding::from_bits("0000")};
    const std::vector<HardEncoding> kids{HardEncoding::from_bits("1000"), HardEncoding::from_bits("0100"),
                                         HardEncoding::from_bits("0010"), HardEncoding::from_bits("0001")};
    std::vector<ArchHash> hashes(4);
    const std::uint8_t order[4] = {3, 1, 4, 2};
    for (int i = 0; i < 4; ++i) hashes[static_cast<std::size_t>(i)].digest[0] = order[i];
    const auto f = build_families(parents, kids, hashes, 2);
    EXPECT_EQ(f.families[0], (std::vector<int>{1, 3}));
    EXPECT_EQ(f.families[1], (std::vector<int>{0, 2}));
    check_families(parents, kids, hashes, 2);
}

TEST(Select, RandomFamiliesMatchExhaustive) {
    Rng rng = make_rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const int np = 2, no = 4 + static_cast<int>(uniform_index(rng, 3));
        std::vector<HardEncoding> ps, ks;
        std::vector<ArchHash> hs(static_cast<std::size_t>(no));
        for (int i = 0; i < np + no; ++i) {
            HardEncoding e(5);
            for (std::size_t b = 0; b < 5; ++b)
                if (bernoulli(rng, 0.5)) e.set(b);
            (i < np ? ps : ks).push_back(e);
        }
        for (auto& h : hs)
            for (auto& byte : h.digest) byte = static_cast<std::uint8_t>(uniform_index(rng, 256));
        check_families(ps, ks, hs, 1 + static_cast<int>(uniform_index(rng, 3)));
    }
}

TEST(Select, FrontsMatchBruteForce) {
    Rng rng = make_rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::array<double, 2>> obj;
        for (int i = 0; i < 50; ++i)
            obj.push_back({std::round(uniform01(rng) * 20) / 20, std::round(uniform01(rng) * 20) / 20});
        EXPECT_EQ(fast_non_dominated_sort(obj), ref::pareto_fronts(obj));
    }
}

TEST(Select, CrowdingBoundariesInfinite) {
    const std::vector<std::array<double, 2>> obj{{0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}, {0.25, 0.8}};
    const auto c = pareto_crowding(obj, {0, 1, 2, 3});
    EXPECT_TRUE(std::isinf(c[0]));
    EXPECT_TRUE(std::isinf(c[2]));
    EXPECT_TRUE(std::isfinite(c[1]));
    EXPECT_TRUE(std::isfinite(c[3]));
    const auto two = pareto_crowding(obj, {0, 1});
    EXPECT_TRUE(std::isinf(two[0]) && std::isinf(two[1]));
}

TEST(Select, UncertaintyNeedsTwoPasses) {
    Fixture f;
    Rng rng = make_rng(3);
    EXPECT_THROW(draw_perturbations(f.model, 1, 0.05, rng), ParameterError);
}

TEST(Select, UncertaintyMatchesDirectComputation) {
    Fixture f;
    Rng rng = make_rng(4);
    const auto a = random_architecture(f.space, rng);
    const auto fp = forward(f.model, {prepare(a, f.space, f.table)});
    Rng r1 = make_rng(9);
    const auto pert = draw_perturbations(f.model, 8, 0.05, r1);
    ASSERT_EQ(pert.weights.size(), 8u);
    const Eigen::RowVectorXd h = fp.hidden().row(0);
    std::vector<double> s;
    for (const auto& w : pert.weights) s.push_back(1.0 / (1.0 + std::exp(-(h.dot(w) + pert.bias))));
    double m = 0.0;
    for (double x : s) m += x / 8.0;
    double v = 0.0;
    for (double x : s) v += (x - m) * (x - m) / 7.0;
    EXPECT_NEAR(score_uncertainty(pert, fp.hidden())(0), std::sqrt(v), 1e-12);
    Rng r2 = make_rng(9);
    EXPECT_NEAR(predict_uncertainty(f.model, f.space, f.table, a, 8, r2), std::sqrt(v), 1e-12);
    Rng r3 = make_rng(9);
    EXPECT_NEAR(predict_uncertainty(f.model, f.space, f.table, a, 8, r3, 0.0), 0.0, 1e-15);
}

TEST(Select, EnvironmentSelectionPicksFamilyWinners) {
    Fixture f;
    Rng rng = make_rng(5);
    std::vector<Architecture> parents, kids;
    for (int i = 0; i < 4; ++i) parents.push_back(random_architecture(f.space, rng));
    for (int i = 0; i < 16; ++i) kids.push_back(random_architecture(f.space, rng));
    const auto res = environment_selection(f.space, f.table, parents, kids, f.model, 4, 3);
    ASSERT_EQ(res.survivors.size(), 4u);
    std::vector<EncodedArch> enc;
    for (const auto& a : parents) enc.push_back(prepare(a, f.space, f.table));
    for (const auto& a : kids) enc.push_back(prepare(a, f.space, f.table));
    const auto scores = score_batch(f.model, enc);
    for (std::size_t p = 0; p < 4; ++p) {
        int best = static_cast<int>(p);
        for (int o : res.families.families[p]) {
            const int idx = 4 + o;
            if (scores(idx) > scores(best)) best = idx;
        }
        const auto& want = best < 4 ? parents[static_cast<std::size_t>(best)] : kids[static_cast<std::size_t>(best - 4)];
        EXPECT_NE(std::find(res.survivors.begin(), res.survivors.end(), want), res.survivors.end());
    }
    EXPECT_EQ(res.from_families, 4);
}

TEST(Select, EnvironmentSelectionDedupsAndFailsShort) {
    Fixture f;
    Rng rng = make_rng(6);
    const auto a = random_architecture(f.space, rng);
    EXPECT_THROW(environment_selection(f.space, f.table, {a, a}, {a, a}, f.model, 2, 2), ShortfallError);
}

TEST(Select, InfillTakesFrontsAndSkipsArchive) {
    Fixture f;
    Rng rng = make_rng(7);
    std::vector<Architecture> pool;
    for (int i = 0; i < 40; ++i) pool.push_back(random_architecture(f.space, rng));
    pool.push_back(pool[0]);
    HashSet archive{arch_hash(pool[1])};
    Rng r = make_rng(8);
    const auto res = infill_sampling(f.space, f.table, pool, f.model, 10, archive, r);
    ASSERT_EQ(res.selected.size(), 10u);
    std::set<ArchHash> seen;
    for (const auto& c : res.candidates) {
        EXPECT_FALSE(archive.contains(arch_hash(c.arch)));
        EXPECT_TRUE(seen.insert(arch_hash(c.arch)).second);
    }
    int worst_selected = 0;
    for (int i : res.selected_indices) worst_selected = std::max(worst_selected, res.candidates[static_cast<std::size_t>(i)].front);
    for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        if (res.candidates[i].front < worst_selected) {
            EXPECT_NE(std::find(res.selected_indices.begin(), res.selected_indices.end(), static_cast<int>(i)),
                      res.selected_indices.end());
        }
    }
    Rng r2 = make_rng(8);
    EXPECT_THROW(infill_sampling(f.space, f.table, {pool[0], pool[0]}, f.model, 2, {}, r2), ShortfallError);
}
