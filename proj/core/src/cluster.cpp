#include "dclnas/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dclnas/error.hpp"
#include "dclnas/rng.hpp"

namespace dclnas {

std::vector<int> Clustering::members(int cluster) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == cluster) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> distance_matrix(const std::vector<HardEncoding>& encodings) {
    const std::size_t n = encodings.size();
    std::vector<int> d(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = manhattan_distance(encodings[i], encodings[j]);
    return d;
}

long clustering_cost(const std::vector<int>& distances, int n, const std::vector<int>& medoids) {
    long total = 0;
    for (int i = 0; i < n; ++i) {
        int best = std::numeric_limits<int>::max();
        for (int m : medoids) best = std::min(best, distances[static_cast<std::size_t>(i * n + m)]);
        total += best;
    }
    return total;
}

namespace {

struct State {
    const std::vector<int>& d;
    int n;
    std::vector<int> medoids;
    std::vector<int> nearest;  // cluster position of nearest medoid
    std::vector<int> dn;       // distance to nearest medoid
    std::vector<int> ds;       // distance to second nearest medoid

    int dist(int a, int b) const { return d[static_cast<std::size_t>(a * n + b)]; }

    void assign() {
        const int k = static_cast<int>(medoids.size());
        std::vector<int> own(static_cast<std::size_t>(n), -1);
        for (int c = 0; c < k; ++c) own[static_cast<std::size_t>(medoids[static_cast<std::size_t>(c)])] = c;
        for (int i = 0; i < n; ++i) {
            int b1 = std::numeric_limits<int>::max(), b2 = b1, c1 = -1;
            for (int c = 0; c < k; ++c) {
                const int v = dist(i, medoids[static_cast<std::size_t>(c)]);
                if (v < b1) {
                    b2 = b1;
                    b1 = v;
                    c1 = c;
                } else if (v < b2) {
                    b2 = v;
                }
            }
            // A medoid always belongs to its own cluster, even when another
            // medoid sits at distance zero.
            const auto iu = static_cast<std::size_t>(i);
            if (own[iu] >= 0 && own[iu] != c1) {
                c1 = own[iu];
                b2 = b1;
                b1 = 0;
            }
            nearest[iu] = c1;
            dn[iu] = b1;
            ds[iu] = b2;
        }
    }

    long cost() const {
        long t = 0;
        for (int v : dn) t += v;
        return t;
    }

    // Move every medoid to the member minimizing its cluster's cost.
    bool update_medoids() {
        const int k = static_cast<int>(medoids.size());
        std::vector<std::vector<int>> groups(static_cast<std::size_t>(k));
        for (int i = 0; i < n; ++i) groups[static_cast<std::size_t>(nearest[static_cast<std::size_t>(i)])].push_back(i);
        bool changed = false;
        for (int c = 0; c < k; ++c) {
            const auto& g = groups[static_cast<std::size_t>(c)];
            int& m = medoids[static_cast<std::size_t>(c)];
            auto within = [&](int cand) {
                long s = 0;
                for (int o : g) s += dist(cand, o);
                return s;
            };
            long best = within(m);
            int best_idx = m;
            for (int cand : g) {
                const long s = within(cand);
                if (s < best) {
                    best = s;
                    best_idx = cand;
                }
            }
            if (best_idx != m) {
                m = best_idx;
                changed = true;
            }
        }
        return changed;
    }

    // Best single medoid/non-medoid exchange, evaluated for all medoids of a
    // candidate at once from nearest and second-nearest distances.
    bool swap_pass() {
        const int k = static_cast<int>(medoids.size());
        std::vector<long> removal(static_cast<std::size_t>(k), 0);
        for (int o = 0; o < n; ++o) {
            const auto ou = static_cast<std::size_t>(o);
            removal[static_cast<std::size_t>(nearest[ou])] += ds[ou] - dn[ou];
        }
        std::vector<bool> is_medoid(static_cast<std::size_t>(n), false);
        for (int m : medoids) is_medoid[static_cast<std::size_t>(m)] = true;

        long best_delta = 0;
        int best_c = -1, best_x = -1;
        std::vector<long> delta(static_cast<std::size_t>(k));
        for (int x = 0; x < n; ++x) {
            if (is_medoid[static_cast<std::size_t>(x)]) continue;
            delta = removal;
            long acc = 0;
            for (int o = 0; o < n; ++o) {
                const auto ou = static_cast<std::size_t>(o);
                const int dox = dist(o, x);
                if (dox < dn[ou]) {
                    acc += dox - dn[ou];
                    delta[static_cast<std::size_t>(nearest[ou])] += dn[ou] - ds[ou];
                } else if (dox < ds[ou]) {
                    delta[static_cast<std::size_t>(nearest[ou])] += dox - ds[ou];
                }
            }
            for (int c = 0; c < k; ++c) {
                const long total = delta[static_cast<std::size_t>(c)] + acc;
                if (total < best_delta) {
                    best_delta = total;
                    best_c = c;
                    best_x = x;
                }
            }
        }
        if (best_c < 0) return false;
        medoids[static_cast<std::size_t>(best_c)] = best_x;
        return true;
    }
};

std::vector<int> seed_medoids(const std::vector<int>& d, int n, int k, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<int> medoids{static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)))};
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    chosen[static_cast<std::size_t>(medoids[0])] = true;
    std::vector<double> w(static_cast<std::size_t>(n));
    while (static_cast<int>(medoids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = std::numeric_limits<int>::max();
            for (int m : medoids) best = std::min(best, d[static_cast<std::size_t>(i * n + m)]);
            const auto iu = static_cast<std::size_t>(i);
            w[iu] = chosen[iu] ? 0.0 : static_cast<double>(best) * static_cast<double>(best);
            total += w[iu];
        }
        int pick = -1;
        if (total > 0.0) {
            double r = uniform01(rng) * total;
            for (int i = 0; i < n; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                if (w[iu] <= 0.0) continue;
                pick = i;
                if (r < w[iu]) break;
                r -= w[iu];
            }
        } else {
            // Every remaining point coincides with a medoid.
            std::vector<int> rest;
            for (int i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) rest.push_back(i);
            pick = rest[uniform_index(rng, rest.size())];
        }
        chosen[static_cast<std::size_t>(pick)] = true;
        medoids.push_back(pick);
    }
    return medoids;
}

std::vector<long> run_alternation(State& st) {
    st.assign();
    std::vector<long> history{st.cost()};
    for (int iter = 0; iter < kMedoidIterationCap; ++iter) {
        const auto before = st.medoids;
        const long prev = st.cost();
        bool moved = st.update_medoids();
        if (moved) {
            st.assign();
            if (st.cost() >= prev) {
                // Plateau: keep the previous medoids so the loop cannot cycle.
                st.medoids = before;
                st.assign();
                moved = false;
            }
        }
        if (!moved) {
            if (!st.swap_pass()) break;
            st.assign();
        }
        history.push_back(st.cost());
    }
    return history;
}

}  // namespace

Clustering k_medoids(const std::vector<int>& distances, int n, int k, std::uint64_t seed) {
    if (n < 1) throw ParameterError("k_medoids: empty batch");
    if (k < 2 || k > n)
        throw ParameterError("k_medoids: k=" + std::to_string(k) + " must lie in [2, " + std::to_string(n) + "]");
    if (distances.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw StructuralError("k_medoids: distance matrix is not n x n");

    // Single swaps cannot leave some local optima that tie-heavy Manhattan
    // distances produce, so independent seedings compete and the cheapest wins.
    Clustering out;
    State best{distances, n, {}, {}, {}, {}};
    for (int r = 0; r < kMedoidRestarts; ++r) {
        const std::uint64_t s = r == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(r)});
        State st{distances, n, seed_medoids(distances, n, k, s), std::vector<int>(static_cast<std::size_t>(n)),
                 std::vector<int>(static_cast<std::size_t>(n)), std::vector<int>(static_cast<std::size_t>(n))};
        auto history = run_alternation(st);
        if (r == 0 || st.cost() < best.cost()) {
            best.medoids = st.medoids;
            best.nearest = st.nearest;
            best.dn = st.dn;
            best.ds = st.ds;
            out.cost_history = std::move(history);
        }
    }
    const State& st = best;

    out.k = k;
    out.medoid_indices = st.medoids;
    out.assignment = st.nearest;
    out.cost = st.cost();
    out.taus.resize(static_cast<std::size_t>(k));
    std::vector<long> sums(static_cast<std::size_t>(k), 0);
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(st.nearest[static_cast<std::size_t>(i)]);
        sums[c] += st.dn[static_cast<std::size_t>(i)];
        ++sizes[c];
    }
    for (int c = 0; c < k; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const double gs = sizes[cu];
        out.taus[cu] = std::max(kTauFloor, static_cast<double>(sums[cu]) / (gs * std::log(gs + kCrowdingBeta)));
    }
    return out;
}

Clustering k_medoids(const std::vector<HardEncoding>& encodings, int k, std::uint64_t seed) {
    const int n = static_cast<int>(encodings.size());
    if (n < 1) throw ParameterError("k_medoids: empty batch");
    return k_medoids(distance_matrix(encodings), n, k, seed);
}

double crowding_distance_raw(const std::vector<HardEncoding>& members, const HardEncoding& medoid, double beta) {
    if (members.empty()) throw ParameterError("crowding_distance: empty cluster");
    if (!(beta > 0.0)) throw ParameterError("crowding_distance: beta must be positive");
    long sum = 0;
    for (const auto& m : members) sum += manhattan_distance(m, medoid);
    const double gs = static_cast<double>(members.size());
    return static_cast<double>(sum) / (gs * std::log(gs + beta));
}

double crowding_distance(const std::vector<HardEncoding>& members, const HardEncoding& medoid, double beta,
                         double floor) {
    return std::max(floor, crowding_distance_raw(members, medoid, beta));
}

}  // namespace dclnas
