#include <gtest/gtest.h>

#include <cmath>

#include "dclnas/cluster.hpp"
#include "dclnas/error.hpp"
#include "reference.hpp"

using namespace dclnas;

namespace {

std::vector<HardEncoding> random_batch(Rng& rng, int n, int bits) {
    std::vector<HardEncoding> out;
    for (int i = 0; i < n; ++i) {
        HardEncoding e(static_cast<std::size_t>(bits));
        for (int b = 0; b < bits; ++b)
            if (bernoulli(rng, 0.3)) e.set(static_cast<std::size_t>(b));
        out.push_back(e);
    }
    return out;
}

std::vector<HardEncoding> arch_batch(const SearchSpace& s, const PathTable& t, Rng& rng, int n) {
    std::vector<HardEncoding> out;
    for (int i = 0; i < n; ++i) out.push_back(encode_architecture(random_architecture(s, rng), s, t));
    return out;
}

}  // namespace

TEST(Cluster, DistanceMatrixMatchesPairwise) {
    Rng rng = make_rng(1);
    const auto b = random_batch(rng, 12, 40);
    const auto d = distance_matrix(b);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            EXPECT_EQ(d[static_cast<std::size_t>(i * 12 + j)],
                      ref::manhattan(b[static_cast<std::size_t>(i)].to_string(), b[static_cast<std::size_t>(j)].to_string()));
}

TEST(Cluster, CostNonIncreasingOnArchitectureBatches) {
    const auto s = nasbench101_space();
    const auto t = PathTable::build(s);
    Rng rng = make_rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto batch = arch_batch(s, t, rng, 64);
        const int k = 2 + static_cast<int>(uniform_index(rng, 15));
        const auto c = k_medoids(batch, k, static_cast<std::uint64_t>(trial));
        ASSERT_FALSE(c.cost_history.empty());
        for (std::size_t i = 1; i < c.cost_history.size(); ++i) EXPECT_LE(c.cost_history[i], c.cost_history[i - 1]);
        EXPECT_EQ(c.cost, c.cost_history.back());
        EXPECT_EQ(c.cost, clustering_cost(distance_matrix(batch), 64, c.medoid_indices));
    }
}

TEST(Cluster, AssignmentIsNearestMedoid) {
    Rng rng = make_rng(3);
    const auto batch = random_batch(rng, 50, 30);
    const auto d = distance_matrix(batch);
    const auto c = k_medoids(batch, 5, 9);
    ASSERT_EQ(c.medoid_indices.size(), 5u);
    for (int i = 0; i < 50; ++i) {
        const int mine = d[static_cast<std::size_t>(i * 50 + c.medoid_indices[static_cast<std::size_t>(c.assignment[static_cast<std::size_t>(i)])])];
        for (int m : c.medoid_indices) EXPECT_LE(mine, d[static_cast<std::size_t>(i * 50 + m)]);
    }
    for (int j = 0; j < 5; ++j) EXPECT_EQ(c.assignment[static_cast<std::size_t>(c.medoid_indices[static_cast<std::size_t>(j)])], j);
}

TEST(Cluster, SmallBatchesMatchExhaustiveOptimum) {
    Rng rng = make_rng(4);
    int hits = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 3 + static_cast<int>(uniform_index(rng, 6));
        const auto batch = random_batch(rng, n, 16);
        const auto d = distance_matrix(batch);
        const auto c = k_medoids(d, n, 2, static_cast<std::uint64_t>(trial));
        hits += c.cost == ref::best_medoid_cost(d, n, 2);
    }
    EXPECT_GE(hits, 190);
}

TEST(Cluster, Deterministic) {
    Rng rng = make_rng(5);
    const auto batch = random_batch(rng, 40, 24);
    const auto a = k_medoids(batch, 4, 17);
    const auto b = k_medoids(batch, 4, 17);
    EXPECT_EQ(a.medoid_indices, b.medoid_indices);
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_EQ(a.cost_history, b.cost_history);
}

TEST(Cluster, BadKIsParameterError) {
    Rng rng = make_rng(6);
    const auto batch = random_batch(rng, 5, 8);
    EXPECT_THROW(k_medoids(batch, 1, 0), ParameterError);
    EXPECT_THROW(k_medoids(batch, 6, 0), ParameterError);
    EXPECT_THROW(k_medoids(std::vector<HardEncoding>{}, 2, 0), ParameterError);
}

TEST(Cluster, TwoPointCrowdingFixture) {
    const auto medoid = HardEncoding::from_bits("0000");
    const std::vector<HardEncoding> members{medoid, HardEncoding::from_bits("1111")};
    const double tau = crowding_distance(members, medoid);
    EXPECT_NEAR(tau, 4.0 / (2.0 * std::log(12.0)), 1e-12);
    EXPECT_NEAR(tau, 0.8049, 1e-4);
}

TEST(Cluster, CrowdingMatchesDirectEvaluation) {
    Rng rng = make_rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const int gs = 1 + static_cast<int>(uniform_index(rng, 20));
        const auto members = random_batch(rng, gs, 48);
        const auto& medoid = members[uniform_index(rng, static_cast<std::uint64_t>(gs))];
        std::vector<std::string> strs;
        for (const auto& m : members) strs.push_back(m.to_string());
        const double want = ref::crowding(strs, medoid.to_string(), 10.0);
        EXPECT_NEAR(crowding_distance_raw(members, medoid, 10.0), want, 1e-12);
    }
}

TEST(Cluster, CrowdingFloorAndErrors) {
    const auto e = HardEncoding::from_bits("0101");
    EXPECT_EQ(crowding_distance({e}, e), kTauFloor);
    EXPECT_EQ(crowding_distance_raw({e}, e, 10.0), 0.0);
    EXPECT_THROW(crowding_distance({}, e), ParameterError);
    EXPECT_THROW(crowding_distance({e}, e, 0.0), ParameterError);
}

TEST(Cluster, TausAreFlooredCrowding) {
    Rng rng = make_rng(8);
    const auto batch = random_batch(rng, 30, 20);
    const auto c = k_medoids(batch, 3, 1);
    for (int j = 0; j < 3; ++j) {
        std::vector<HardEncoding> members;
        for (int i : c.members(j)) members.push_back(batch[static_cast<std::size_t>(i)]);
        EXPECT_NEAR(c.taus[static_cast<std::size_t>(j)],
                    crowding_distance(members, batch[static_cast<std::size_t>(c.medoid_indices[static_cast<std::size_t>(j)])]),
                    1e-12);
    }
}
