#include "dclnas/evo.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dclnas/error.hpp"

namespace dclnas {

void check_config(const EvoConfig& cfg) {
    std::vector<std::string> problems;
    auto prob = [&](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) problems.push_back(std::string(name) + " must lie in [0, 1]");
    };
    prob(cfg.p_c, "P_c");
    prob(cfg.p_m, "P_m");
    prob(cfg.p_keep, "P_keep");
    if (cfg.r < 1) problems.emplace_back("r must be >= 1");
    if (cfg.round_cap < 1) problems.emplace_back("round_cap must be >= 1");
    if (cfg.crossover_retries < 1) problems.emplace_back("crossover_retries must be >= 1");
    if (!problems.empty()) {
        std::string msg = "invalid evolution config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::optional<Architecture> rebuild_from_paths(const SearchSpace& space, const std::vector<Path>& paths) {
    if (paths.empty()) return std::nullopt;
    struct TrieNode {
        int op = kInputOp;
        int parent = -1;
        int tag = 0;  // nonzero for the extra leaves that carry duplicate paths
        std::map<int, int> children;
        std::vector<int> copies;
        bool to_output = false;
    };
    std::vector<TrieNode> trie(1);
    for (const auto& p : paths) {
        int cur = 0;
        for (int op : p.ops) {
            auto it = trie[static_cast<std::size_t>(cur)].children.find(op);
            if (it == trie[static_cast<std::size_t>(cur)].children.end()) {
                trie.push_back(TrieNode{op, cur, 0, {}, {}, false});
                const int id = static_cast<int>(trie.size()) - 1;
                trie[static_cast<std::size_t>(cur)].children.emplace(op, id);
                cur = id;
            } else {
                cur = it->second;
            }
        }
        auto& end = trie[static_cast<std::size_t>(cur)];
        if (!end.to_output || cur == 0) {
            // A second Input -> Output edge cannot exist, so a repeated empty
            // path collapses.
            end.to_output = true;
            continue;
        }
        // A repeated sequence gets its own final node beside the first copy.
        const int parent = end.parent;
        const int op = end.op;
        auto& sib = trie[static_cast<std::size_t>(parent)].copies;
        trie.push_back(TrieNode{op, parent, static_cast<int>(sib.size()) + 1, {}, {}, true});
        trie[static_cast<std::size_t>(parent)].copies.push_back(static_cast<int>(trie.size()) - 1);
    }
    auto successors = [&](int v) {
        const auto& node = trie[static_cast<std::size_t>(v)];
        std::vector<int> out;
        for (const auto& [op, c] : node.children) out.push_back(c);
        out.insert(out.end(), node.copies.begin(), node.copies.end());
        return out;
    };

    // Post-order classing: equal (op, output flag, tag, successor classes)
    // means equal suffix language. Siblings never share a class, so merging
    // a class never collapses two parallel edges and the route multiset
    // survives.
    using Signature = std::tuple<int, bool, int, std::vector<int>>;
    std::map<Signature, int> classes;
    std::vector<int> cls(trie.size(), -1);
    std::vector<Signature> class_sig;
    std::vector<std::pair<int, bool>> stack{{0, false}};
    while (!stack.empty()) {
        auto [v, expanded] = stack.back();
        stack.pop_back();
        const auto& node = trie[static_cast<std::size_t>(v)];
        if (!expanded) {
            stack.emplace_back(v, true);
            const auto kids = successors(v);
            for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.emplace_back(*it, false);
            continue;
        }
        if (v == 0) continue;
        std::vector<int> succ;
        for (int c : successors(v)) succ.push_back(cls[static_cast<std::size_t>(c)]);
        std::sort(succ.begin(), succ.end());
        Signature sig{node.op, node.to_output, node.tag, succ};
        auto [it, inserted] = classes.emplace(sig, static_cast<int>(class_sig.size()));
        if (inserted) class_sig.push_back(sig);
        cls[static_cast<std::size_t>(v)] = it->second;
    }

    const int k = static_cast<int>(class_sig.size());
    const int n = k + 2;
    if (n > space.max_nodes()) return std::nullopt;

    // Depth = longest distance from Input; node order is (depth, class id).
    std::vector<std::set<int>> succ(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c)
        for (int s : std::get<3>(class_sig[static_cast<std::size_t>(c)])) succ[static_cast<std::size_t>(c)].insert(s);
    std::set<int> roots;
    for (int c : successors(0)) roots.insert(cls[static_cast<std::size_t>(c)]);
    std::vector<int> depth(static_cast<std::size_t>(k), 0);
    // Classes are numbered in post-order, so successors have smaller ids;
    // sweeping ids downward visits predecessors first.
    for (int c : roots) depth[static_cast<std::size_t>(c)] = std::max(depth[static_cast<std::size_t>(c)], 1);
    for (int c = k - 1; c >= 0; --c)
        for (int s : succ[static_cast<std::size_t>(c)])
            depth[static_cast<std::size_t>(s)] = std::max(depth[static_cast<std::size_t>(s)], depth[static_cast<std::size_t>(c)] + 1);
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return depth[static_cast<std::size_t>(x)] < depth[static_cast<std::size_t>(y)];
    });
    std::vector<int> pos(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i + 1;

    std::vector<int> ops(static_cast<std::size_t>(n));
    ops.front() = kInputOp;
    ops.back() = kOutputOp;
    for (int c = 0; c < k; ++c) ops[static_cast<std::size_t>(pos[static_cast<std::size_t>(c)])] = std::get<0>(class_sig[static_cast<std::size_t>(c)]);
    std::vector<std::uint8_t> adj(static_cast<std::size_t>(n * n), 0);
    auto edge = [&](int i, int j) { adj[static_cast<std::size_t>(i * n + j)] = 1; };
    for (int c : roots) edge(0, pos[static_cast<std::size_t>(c)]);
    if (trie[0].to_output) edge(0, n - 1);
    for (int c = 0; c < k; ++c) {
        const int u = pos[static_cast<std::size_t>(c)];
        for (int s : succ[static_cast<std::size_t>(c)]) edge(u, pos[static_cast<std::size_t>(s)]);
        if (std::get<1>(class_sig[static_cast<std::size_t>(c)])) edge(u, n - 1);
    }
    Architecture arch(std::move(ops), std::move(adj));
    if (arch.edge_count() > space.max_edges()) return std::nullopt;
    return arch;
}

namespace {

std::vector<Path> arch_paths(const Architecture& arch) { return enumerate_paths(arch, 1'000'000); }

// Relative frequency of each op among the internal nodes of both parents.
std::vector<double> op_frequencies(const SearchSpace& space, const Architecture& a, const Architecture& b) {
    std::vector<double> f(static_cast<std::size_t>(space.num_ops()), 0.0);
    double total = 0.0;
    for (const auto* arch : {&a, &b})
        for (int v = 1; v + 1 < arch->num_nodes(); ++v) {
            f[static_cast<std::size_t>(arch->op(v))] += 1.0;
            total += 1.0;
        }
    if (total > 0.0)
        for (auto& x : f) x /= total;
    return f;
}

void retain_nodes(Architecture& child, const Architecture& parent, const std::vector<double>& freq,
                  const EvoConfig& cfg, Rng& rng) {
    const int shared = std::min(child.num_nodes(), parent.num_nodes()) - 1;
    for (int v = 1; v < shared; ++v) {
        const int op = parent.op(v);
        double p = cfg.p_keep;
        if (cfg.retention == RetentionPolicy::pkeep_times_freq) p *= freq[static_cast<std::size_t>(op)];
        if (bernoulli(rng, p)) child.set_op(v, op);
    }
}

bool acceptable(const SearchSpace& space, const Architecture& arch) {
    try {
        return validate(space, arch) && encodable(space, arch);
    } catch (const StructuralError&) {
        return false;
    }
}

}  // namespace

std::optional<ArchPair> crossover_with(const SearchSpace& space, const Architecture& a, const Architecture& b,
                                       const std::vector<bool>& swap_a, const std::vector<bool>& swap_b,
                                       const EvoConfig& cfg, Rng& rng) {
    const bool any = std::find(swap_a.begin(), swap_a.end(), true) != swap_a.end() ||
                     std::find(swap_b.begin(), swap_b.end(), true) != swap_b.end();
    if (!any) return ArchPair{a, b};
    const auto freq = op_frequencies(space, a, b);

    if (space.fixed_topology()) {
        if (swap_a != swap_b) throw ParameterError("fixed-topology crossover swaps one shared route set");
        const auto routes = enumerate_routes(a, 1'000'000);
        if (routes.size() != swap_a.size()) throw ParameterError("swap flags do not match the route count");
        Architecture ca = a, cb = b;
        for (std::size_t r = 0; r < routes.size(); ++r) {
            if (!swap_a[r]) continue;
            for (std::size_t i = 1; i + 1 < routes[r].size(); ++i) {
                const int v = routes[r][i];
                ca.set_op(v, b.op(v));
                cb.set_op(v, a.op(v));
            }
        }
        retain_nodes(ca, a, freq, cfg, rng);
        retain_nodes(cb, b, freq, cfg, rng);
        return ArchPair{std::move(ca), std::move(cb)};
    }

    const auto pa = arch_paths(a);
    const auto pb = arch_paths(b);
    if (pa.size() != swap_a.size() || pb.size() != swap_b.size())
        throw ParameterError("swap flags do not match the path count");
    std::vector<Path> child_a, child_b;
    for (std::size_t i = 0; i < pa.size(); ++i) (swap_a[i] ? child_b : child_a).push_back(pa[i]);
    for (std::size_t i = 0; i < pb.size(); ++i) (swap_b[i] ? child_a : child_b).push_back(pb[i]);
    auto ra = rebuild_from_paths(space, child_a);
    auto rb = rebuild_from_paths(space, child_b);
    if (!ra || !rb) return std::nullopt;
    retain_nodes(*ra, a, freq, cfg, rng);
    retain_nodes(*rb, b, freq, cfg, rng);
    if (!acceptable(space, *ra) || !acceptable(space, *rb)) return std::nullopt;
    return ArchPair{std::move(*ra), std::move(*rb)};
}

std::optional<ArchPair> crossover(const SearchSpace& space, const Architecture& a, const Architecture& b,
                                  const EvoConfig& cfg, Rng& rng) {
    if (!bernoulli(rng, cfg.p_c)) return ArchPair{a, b};
    const std::size_t na = space.fixed_topology() ? enumerate_routes(a, 1'000'000).size() : arch_paths(a).size();
    const std::size_t nb = space.fixed_topology() ? na : arch_paths(b).size();
    for (int attempt = 0; attempt < cfg.crossover_retries; ++attempt) {
        std::vector<bool> sa(na), sb(nb);
        for (std::size_t i = 0; i < na; ++i) sa[i] = bernoulli(rng, 0.5);
        if (space.fixed_topology()) {
            sb = sa;
        } else {
            for (std::size_t i = 0; i < nb; ++i) sb[i] = bernoulli(rng, 0.5);
        }
        if (auto out = crossover_with(space, a, b, sa, sb, cfg, rng)) return out;
    }
    return std::nullopt;
}

Architecture retarget_edge(const Architecture& arch, int from, int to, int new_to) {
    const int n = arch.num_nodes();
    if (from < 0 || from >= n || to <= from || to >= n || new_to <= from || new_to >= n)
        throw ParameterError("edge retarget outside the node range");
    if (!arch.has_edge(from, to)) throw ParameterError("retargeted edge does not exist");
    Architecture out = arch;
    out.set_edge(from, to, false);
    out.set_edge(from, new_to, true);
    // Nodes cut off from Input pass no data on; drop what they feed.
    const auto live = reachable_from_input(out);
    for (int v = 1; v < n; ++v) {
        if (live[static_cast<std::size_t>(v)]) continue;
        for (int w = v + 1; w < n; ++w) out.set_edge(v, w, false);
    }
    return out;
}

std::optional<Architecture> connection_mutation(const SearchSpace& space, const Architecture& arch, Rng& rng) {
    if (space.fixed_topology()) return std::nullopt;
    const int n = arch.num_nodes();
    struct Move {
        int from, to, new_to;
    };
    std::vector<Move> moves;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            if (!arch.has_edge(u, v)) continue;
            for (int w = u + 1; w < n; ++w)
                if (w != v && !arch.has_edge(u, w)) moves.push_back({u, v, w});
        }
    for (std::size_t i = moves.size(); i > 1; --i) std::swap(moves[i - 1], moves[uniform_index(rng, i)]);
    for (const auto& m : moves) {
        auto out = retarget_edge(arch, m.from, m.to, m.new_to);
        if (acceptable(space, out)) return out;
    }
    return std::nullopt;
}

Architecture operation_mutation(const SearchSpace& space, const Architecture& arch, Rng& rng) {
    const int k = space.num_ops();
    if (k < 2) throw ParameterError("operation mutation needs at least two ops");
    const int internal = arch.num_nodes() - 2;
    if (internal < 1) throw ParameterError("operation mutation needs an internal node");
    const int v = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(internal)));
    int op = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k - 1)));
    if (op >= arch.op(v)) ++op;
    Architecture out = arch;
    out.set_op(v, op);
    return out;
}

std::vector<Offspring> generate_offspring(const SearchSpace& space, const std::vector<Architecture>& population,
                                          const EvoConfig& cfg, const HashSet& archive, std::uint64_t seed) {
    check_config(cfg);
    const std::size_t n = population.size();
    if (n < 2) throw ParameterError("generate_offspring needs at least two individuals");
    const std::size_t target = static_cast<std::size_t>(cfg.r) * n;
    std::vector<Offspring> out;
    out.reserve(target + 2 * n);
    int round = 0;
    while (out.size() < target) {
        if (round >= cfg.round_cap)
            throw ShortfallError("offspring generation stopped after " + std::to_string(cfg.round_cap) + " rounds with " +
                                     std::to_string(out.size()) + " of " + std::to_string(target) + " offspring",
                                 target, out.size());
        const std::uint64_t round_seed = derive_seed(seed, {static_cast<std::uint64_t>(round)});
        Rng rng = make_rng(round_seed);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = uniform_index(rng, n - 1);
            if (j >= i) ++j;
            const auto& pa = population[i];
            const auto& pb = population[j];
            std::string how;
            bool force_mutation = false;
            ArchPair kids{pa, pb};
            if (auto x = crossover(space, pa, pb, cfg, rng)) {
                kids = std::move(*x);
                if (!(kids.first == pa && kids.second == pb)) how = "crossover";
            } else {
                force_mutation = true;
                how = "crossover-failed";
            }
            for (Architecture* child : {&kids.first, &kids.second}) {
                std::string ops = how;
                if (force_mutation || bernoulli(rng, cfg.p_m)) {
                    std::optional<Architecture> m;
                    if (bernoulli(rng, 0.5)) {
                        m = connection_mutation(space, *child, rng);
                        if (m) ops += ops.empty() ? "connection" : "+connection";
                    }
                    if (!m) {
                        m = operation_mutation(space, *child, rng);
                        ops += ops.empty() ? "operation" : "+operation";
                    }
                    *child = std::move(*m);
                }
                if (!acceptable(space, *child) || archive.contains(arch_hash(*child))) continue;
                out.push_back(Offspring{*child, static_cast<int>(i), static_cast<int>(j), ops.empty() ? "copy" : ops,
                                        round, round_seed});
            }
        }
        ++round;
    }
    out.resize(target);
    return out;
}

}  // namespace dclnas
