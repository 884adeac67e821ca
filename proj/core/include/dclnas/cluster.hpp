#pragma once

#include <cstdint>
#include <vector>

#include "dclnas/paths.hpp"

namespace dclnas {

inline constexpr double kCrowdingBeta = 10.0;
inline constexpr double kTauFloor = 1e-3;
inline constexpr int kMedoidIterationCap = 100;
inline constexpr int kMedoidRestarts = 4;

struct Clustering {
    int k = 0;
    std::vector<int> medoid_indices;  // sample index of each cluster's medoid
    std::vector<int> assignment;      // cluster index per sample
    std::vector<double> taus;         // floored crowding distance per cluster
    std::vector<long> cost_history;   // cost after seeding and every iteration of the winning restart
    long cost = 0;

    std::vector<int> members(int cluster) const;
};

// Row-major n x n Manhattan distances.
std::vector<int> distance_matrix(const std::vector<HardEncoding>& encodings);

// k-means++ seeding on Manhattan distance, then alternating assign/medoid
// update steps with a swap pass whenever alternation stalls. Stops when no
// step improves the cost or after kMedoidIterationCap iterations. Runs
// kMedoidRestarts seedings derived from `seed` and keeps the cheapest.
// Throws ParameterError unless 2 <= k <= n.
Clustering k_medoids(const std::vector<HardEncoding>& encodings, int k, std::uint64_t seed);
Clustering k_medoids(const std::vector<int>& distances, int n, int k, std::uint64_t seed);

// Sum of member-to-medoid distances over all samples.
long clustering_cost(const std::vector<int>& distances, int n, const std::vector<int>& medoids);

// Unfloored sum(d) / (gs * ln(gs + beta)).
double crowding_distance_raw(const std::vector<HardEncoding>& members, const HardEncoding& medoid, double beta);
// Floored at `floor`. Throws ParameterError for an empty cluster or beta <= 0.
double crowding_distance(const std::vector<HardEncoding>& members, const HardEncoding& medoid,
                         double beta = kCrowdingBeta, double floor = kTauFloor);

}  // namespace dclnas
