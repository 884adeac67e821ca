#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dclnas/paths.hpp"
#include "dclnas/rng.hpp"
#include "dclnas/space.hpp"

namespace dclnas {

enum class RetentionPolicy { pkeep_only, pkeep_times_freq };

struct EvoConfig {
    double p_c = 0.9;
    double p_m = 0.1;
    double p_keep = 0.5;
    int r = 6;
    int round_cap = 50;
    int crossover_retries = 20;
    RetentionPolicy retention = RetentionPolicy::pkeep_times_freq;
    std::uint64_t seed = 0;
};

void check_config(const EvoConfig& cfg);  // throws ConfigError

using ArchPair = std::pair<Architecture, Architecture>;
using HashSet = std::unordered_set<ArchHash, ArchHashHasher>;

// DAG whose routes spell exactly the given multiset of op sequences:
// prefixes are shared, a repeated sequence gets an extra final node, then
// nodes with equal op and equal successors are merged. A repeated empty path
// collapses to one Input -> Output edge.
// Nullopt when the result needs more than max_nodes nodes or max_edges edges.
std::optional<Architecture> rebuild_from_paths(const SearchSpace& space, const std::vector<Path>& paths);

// With probability p_c swaps random path subsets between the parents and
// rebuilds both children, then restores parent ops at shared node positions
// per the retention policy. Otherwise returns the parents. Nullopt when no
// valid pair was found within cfg.crossover_retries draws.
std::optional<ArchPair> crossover(const SearchSpace& space, const Architecture& a, const Architecture& b,
                                  const EvoConfig& cfg, Rng& rng);

// Deterministic core of crossover: `swap_a` / `swap_b` flag the paths (in
// enumeration order) each parent gives away. For fixed-topology spaces both
// flag vectors index the shared routes and must be equal. Node retention is
// drawn from `rng`. Nullopt when a child is invalid.
std::optional<ArchPair> crossover_with(const SearchSpace& space, const Architecture& a, const Architecture& b,
                                       const std::vector<bool>& swap_a, const std::vector<bool>& swap_b,
                                       const EvoConfig& cfg, Rng& rng);

// Moves edge from->to so that it ends at new_to, then deletes the outgoing
// edges of every node no longer reachable from Input.
Architecture retarget_edge(const Architecture& arch, int from, int to, int new_to);

// Random edge retarget followed by repair. Nullopt when no retarget yields a
// valid, encodable architecture (always for fixed-topology spaces).
std::optional<Architecture> connection_mutation(const SearchSpace& space, const Architecture& arch, Rng& rng);

// One internal node gets a different op. Throws ParameterError when the
// space has fewer than two ops or the cell has no internal node.
Architecture operation_mutation(const SearchSpace& space, const Architecture& arch, Rng& rng);

struct Offspring {
    Architecture arch;
    int parent = -1;   // population index of the individual that started the pairing
    int partner = -1;  // its crossover partner
    std::string operators;
    int round = 0;
    std::uint64_t round_seed = 0;
};

// Rounds of uniform parent pairing, crossover and mutation until
// r * |population| offspring not in `archive` exist; the surplus is dropped.
// Throws ShortfallError after cfg.round_cap rounds.
std::vector<Offspring> generate_offspring(const SearchSpace& space, const std::vector<Architecture>& population,
                                          const EvoConfig& cfg, const HashSet& archive, std::uint64_t seed);

}  // namespace dclnas
