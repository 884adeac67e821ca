#include "dclnas/space.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "dclnas/error.hpp"
#include "json.hpp"

namespace dclnas {

using nlohmann::json;

Architecture::Architecture(std::vector<int> ops, std::vector<std::uint8_t> adjacency)
    : ops_(std::move(ops)), adjacency_(std::move(adjacency)) {
    if (adjacency_.size() != ops_.size() * ops_.size()) {
        throw StructuralError("adjacency has " + std::to_string(adjacency_.size()) +
                              " entries, expected " + std::to_string(ops_.size() * ops_.size()));
    }
}

int Architecture::edge_count() const {
    int n = 0;
    for (auto e : adjacency_) n += e != 0;
    return n;
}

namespace {

ArchHash sha256(std::span<const std::uint8_t> bytes) {
    ArchHash h;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), h.digest.data(), &len) != 1 || len != h.digest.size()) {
        throw Error("SHA-256 digest failed");
    }
    return h;
}

void put_int(std::vector<std::uint8_t>& out, std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(u >> s));
}

// Digest of the raw (ops, adjacency) pair; only used to name architectures
// in error messages where the canonical hash cannot be computed.
ArchHash structure_digest(const Architecture& arch) {
    std::vector<std::uint8_t> bytes;
    for (int op : arch.ops()) put_int(bytes, op);
    bytes.insert(bytes.end(), arch.adjacency().begin(), arch.adjacency().end());
    return sha256(bytes);
}

bool is_terminal_name(std::string_view s) { return s == kInputName || s == kOutputName; }

std::vector<std::uint8_t> parse_bits(std::string_view bits) {
    std::vector<std::uint8_t> out;
    out.reserve(bits.size());
    for (char c : bits) {
        if (c != '0' && c != '1') throw StructuralError("adjacency string must contain only 0/1");
        out.push_back(c == '1');
    }
    return out;
}

int longest_route(const std::vector<std::uint8_t>& adj, int n) {
    // Longest Input->Output node count over internal nodes; -1 if unreachable.
    std::vector<int> best(static_cast<std::size_t>(n), -1);
    best[0] = 0;
    for (int j = 1; j < n; ++j) {
        for (int i = 0; i < j; ++i) {
            if (adj[static_cast<std::size_t>(i * n + j)] && best[static_cast<std::size_t>(i)] >= 0) {
                const int cand = best[static_cast<std::size_t>(i)] + (i == 0 ? 0 : 1);
                best[static_cast<std::size_t>(j)] = std::max(best[static_cast<std::size_t>(j)], cand);
            }
        }
    }
    return best[static_cast<std::size_t>(n - 1)];
}

}  // namespace

SearchSpace::SearchSpace(SpaceDefinition def) : def_(std::move(def)) {
    std::vector<std::string> problems;

    if (def_.op_set.empty()) problems.emplace_back("op_set must not be empty");
    for (std::size_t i = 0; i < def_.op_set.size(); ++i) {
        const auto& name = def_.op_set[i];
        if (is_terminal_name(name)) problems.push_back("op_set must not contain '" + name + "'");
        if (!op_lookup_.emplace(name, static_cast<int>(i)).second)
            problems.push_back("op_set entry '" + name + "' is duplicated");
    }
    if (def_.max_nodes < 2) problems.emplace_back("max_nodes must be >= 2");
    if (def_.max_edges < 1) problems.emplace_back("max_edges must be >= 1");
    if (def_.l_seq < 1) problems.emplace_back("L_seq must be >= 1");

    // The template may spell out the terminal nodes; they carry no slot.
    std::vector<bool> covered(def_.op_set.size(), false);
    for (const auto& entry : def_.path_template) {
        if (is_terminal_name(entry)) continue;
        auto it = op_lookup_.find(entry);
        if (it == op_lookup_.end()) {
            problems.push_back("path_template entry '" + entry + "' is not in op_set");
            continue;
        }
        template_ops_.push_back(it->second);
        covered[static_cast<std::size_t>(it->second)] = true;
    }
    for (std::size_t i = 0; i < covered.size(); ++i)
        if (!covered[i]) problems.push_back("path_template does not cover op '" + def_.op_set[i] + "'");

    if (def_.onehot_order.empty()) def_.onehot_order = def_.op_set;
    onehot_of_op_.assign(def_.op_set.size(), -1);
    if (def_.onehot_order.size() != def_.op_set.size()) {
        problems.emplace_back("onehot_order must list every op exactly once");
    } else {
        for (std::size_t pos = 0; pos < def_.onehot_order.size(); ++pos) {
            auto it = op_lookup_.find(def_.onehot_order[pos]);
            if (it == op_lookup_.end()) {
                problems.push_back("onehot_order entry '" + def_.onehot_order[pos] + "' is not in op_set");
            } else if (onehot_of_op_[static_cast<std::size_t>(it->second)] != -1) {
                problems.push_back("onehot_order entry '" + def_.onehot_order[pos] + "' is duplicated");
            } else {
                onehot_of_op_[static_cast<std::size_t>(it->second)] = static_cast<int>(pos);
            }
        }
    }

    max_path_length_ = std::min(template_slots(), std::max(0, def_.max_nodes - 2));
    if (!def_.fixed_adjacency.empty() && def_.max_nodes >= 2) {
        const int n = def_.max_nodes;
        std::vector<std::uint8_t> adj;
        try {
            adj = parse_bits(def_.fixed_adjacency);
        } catch (const StructuralError& e) {
            problems.emplace_back(std::string("fixed_adjacency: ") + e.what());
        }
        if (adj.size() != static_cast<std::size_t>(n * n)) {
            problems.emplace_back("fixed_adjacency must have max_nodes^2 entries");
        } else {
            int edges = 0;
            bool upper = true;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const bool e = adj[static_cast<std::size_t>(i * n + j)] != 0;
                    edges += e;
                    if (e && j <= i) upper = false;
                }
            if (!upper) problems.emplace_back("fixed_adjacency must be strictly upper triangular");
            if (edges > def_.max_edges) problems.emplace_back("fixed_adjacency exceeds max_edges");
            const int longest = upper ? longest_route(adj, n) : -1;
            if (longest < 0) {
                problems.emplace_back("fixed_adjacency: output unreachable from input");
            } else if (longest > template_slots()) {
                problems.emplace_back("fixed_adjacency has routes longer than the path template");
            } else {
                max_path_length_ = longest;
            }
            topology_ = std::move(adj);
        }
    }

    if (!problems.empty()) {
        std::string msg = "invalid search space '" + def_.name + "':";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

int SearchSpace::op_index(std::string_view name) const {
    auto it = op_lookup_.find(std::string(name));
    if (it == op_lookup_.end()) throw LookupError("unknown operation '" + std::string(name) + "'");
    return it->second;
}

std::string SearchSpace::op_name(int op) const {
    if (op == kInputOp) return std::string(kInputName);
    if (op == kOutputOp) return std::string(kOutputName);
    if (op < 0 || op >= num_ops()) throw LookupError("op code out of range: " + std::to_string(op));
    return def_.op_set[static_cast<std::size_t>(op)];
}

SearchSpace SearchSpace::with_onehot_order(std::vector<std::string> order) const {
    SpaceDefinition d = def_;
    d.onehot_order = std::move(order);
    return SearchSpace(std::move(d));
}

SearchSpace SearchSpace::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("search space JSON: ") + e.what());
    }
    SpaceDefinition d;
    try {
        d.name = j.value("name", std::string("custom"));
        d.op_set = j.at("op_set").get<std::vector<std::string>>();
        d.max_nodes = j.at("max_nodes").get<int>();
        d.max_edges = j.at("max_edges").get<int>();
        d.path_template = j.at("path_template").get<std::vector<std::string>>();
        d.l_seq = j.at("L_seq").get<int>();
        d.onehot_order = j.value("onehot_order", std::vector<std::string>{});
        d.fixed_adjacency = j.value("fixed_adjacency", std::string{});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("search space JSON: ") + e.what());
    }
    return SearchSpace(std::move(d));
}

SearchSpace SearchSpace::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open search space file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string SearchSpace::to_json() const {
    json j;
    j["name"] = def_.name;
    j["op_set"] = def_.op_set;
    j["max_nodes"] = def_.max_nodes;
    j["max_edges"] = def_.max_edges;
    j["path_template"] = def_.path_template;
    j["L_seq"] = def_.l_seq;
    j["onehot_order"] = def_.onehot_order;
    if (!def_.fixed_adjacency.empty()) j["fixed_adjacency"] = def_.fixed_adjacency;
    return j.dump(2);
}

SearchSpace nasbench101_space() {
    SpaceDefinition d;
    d.name = "nasbench101";
    d.op_set = {"conv3x3-bn-relu", "conv1x1-bn-relu", "maxpool3x3"};
    d.max_nodes = 7;
    d.max_edges = 9;
    d.path_template = {"input",           "conv3x3-bn-relu", "conv1x1-bn-relu", "maxpool3x3",
                       "conv3x3-bn-relu", "conv1x1-bn-relu", "output"};
    d.l_seq = 8;
    d.onehot_order = {"maxpool3x3", "conv1x1-bn-relu", "conv3x3-bn-relu"};
    return SearchSpace(std::move(d));
}

SearchSpace nasbench201_space() {
    // Line graph of the 4-node cell. Internal nodes are the cell edges in the
    // order e01, e02, e12, e03, e13, e23.
    constexpr int n = 8;
    std::string adj(n * n, '0');
    auto edge = [&](int i, int j) { adj[static_cast<std::size_t>(i * n + j)] = '1'; };
    edge(0, 1), edge(0, 2), edge(0, 4);  // edges leaving cell node 0
    edge(1, 3), edge(1, 5);              // e01 -> e12, e13
    edge(2, 6);                          // e02 -> e23
    edge(3, 6);                          // e12 -> e23
    edge(4, 7), edge(5, 7), edge(6, 7);  // edges entering cell node 3
    SpaceDefinition d;
    d.name = "nasbench201";
    d.op_set = {"none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};
    d.max_nodes = n;
    d.max_edges = 10;
    d.path_template = {"input", "nor_conv_3x3", "nor_conv_1x1", "avg_pool_3x3", "skip_connect", "none", "output"};
    d.l_seq = 5;
    d.onehot_order = d.op_set;
    d.fixed_adjacency = adj;
    return SearchSpace(std::move(d));
}

SearchSpace preset_space(std::string_view name) {
    if (name == "nasbench101") return nasbench101_space();
    if (name == "nasbench201") return nasbench201_space();
    throw ConfigError("unknown search space preset '" + std::string(name) + "'");
}

Architecture make_architecture(const SearchSpace& space, std::span<const std::string> node_ops,
                               std::string_view bits) {
    std::vector<int> ops;
    ops.reserve(node_ops.size());
    for (std::size_t i = 0; i < node_ops.size(); ++i) {
        const auto& name = node_ops[i];
        if (name == kInputName) {
            ops.push_back(kInputOp);
        } else if (name == kOutputName) {
            ops.push_back(kOutputOp);
        } else {
            ops.push_back(space.op_index(name));
        }
    }
    return Architecture(std::move(ops), parse_bits(bits));
}

std::vector<std::string> node_op_names(const SearchSpace& space, const Architecture& arch) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(arch.num_nodes()));
    for (int op : arch.ops()) out.push_back(space.op_name(op));
    return out;
}

std::string adjacency_bits(const Architecture& arch) {
    std::string s;
    s.reserve(arch.adjacency().size());
    for (auto e : arch.adjacency()) s.push_back(e ? '1' : '0');
    return s;
}

std::vector<bool> reachable_from_input(const Architecture& arch) {
    const int n = arch.num_nodes();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    if (n == 0) return seen;
    seen[0] = true;
    // Topological order: one forward sweep suffices for upper-triangular DAGs,
    // but stay correct for arbitrary input by iterating to a fixpoint.
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            if (!seen[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < n; ++j) {
                if (arch.has_edge(i, j) && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = true;
                    changed = true;
                }
            }
        }
    }
    return seen;
}

bool output_reachable(const Architecture& arch) {
    if (arch.num_nodes() < 2) return false;
    return reachable_from_input(arch).back();
}

bool validate(const SearchSpace& space, const Architecture& arch) {
    const int n = arch.num_nodes();
    if (n < 2 || n > space.max_nodes())
        throw StructuralError("architecture has " + std::to_string(n) + " nodes; space allows 2.." +
                              std::to_string(space.max_nodes()));
    if (space.fixed_topology() && n != space.max_nodes())
        throw StructuralError("fixed-topology space requires exactly " + std::to_string(space.max_nodes()) +
                              " nodes");

    if (arch.op(0) != kInputOp || arch.op(n - 1) != kOutputOp) return false;
    for (int v = 1; v < n - 1; ++v)
        if (arch.op(v) < 0 || arch.op(v) >= space.num_ops()) return false;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            if (arch.has_edge(i, j)) return false;
    if (arch.edge_count() > space.max_edges()) return false;
    if (space.fixed_topology() && arch.adjacency() != space.topology()) return false;
    return output_reachable(arch);
}

std::vector<std::vector<int>> enumerate_routes(const Architecture& arch, std::size_t limit) {
    const int n = arch.num_nodes();
    std::vector<std::vector<int>> routes;
    if (n < 2) return routes;
    std::vector<int> stack{0};
    // Iterative DFS keeping the current route on `stack`; next-child cursor per depth.
    std::vector<int> cursor{1};
    while (!stack.empty()) {
        const int v = stack.back();
        if (v == n - 1) {
            routes.push_back(stack);
            if (routes.size() > limit)
                throw PathOverflow("architecture " + structure_digest(arch).hex().substr(0, 16) +
                                   " has more than " + std::to_string(limit) + " paths");
            stack.pop_back();
            cursor.pop_back();
            continue;
        }
        int& next = cursor.back();
        while (next < n && !arch.has_edge(v, next)) ++next;
        if (next >= n) {
            stack.pop_back();
            cursor.pop_back();
            continue;
        }
        const int child = next++;
        stack.push_back(child);
        cursor.push_back(child + 1);
    }
    return routes;
}

std::string ArchHash::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(digest.size() * 2);
    for (auto b : digest) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 15]);
    }
    return s;
}

ArchHash ArchHash::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw ParameterError("arch hash must be 64 hex characters");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw ParameterError("invalid hex digit in arch hash");
    };
    ArchHash h;
    for (std::size_t i = 0; i < h.digest.size(); ++i)
        h.digest[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
    return h;
}

ArchHash arch_hash(const Architecture& arch) {
    auto routes = enumerate_routes(arch, 1'000'000);
    std::vector<std::vector<int>> paths;
    paths.reserve(routes.size());
    for (const auto& r : routes) {
        std::vector<int> ops;
        for (std::size_t i = 1; i + 1 < r.size(); ++i) ops.push_back(arch.op(r[i]));
        paths.push_back(std::move(ops));
    }
    std::sort(paths.begin(), paths.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    std::vector<std::uint8_t> bytes;
    put_int(bytes, static_cast<std::int32_t>(paths.size()));
    for (const auto& p : paths) {
        put_int(bytes, static_cast<std::int32_t>(p.size()));
        for (int op : p) put_int(bytes, op);
    }
    return sha256(bytes);
}

bool encodable(const SearchSpace& space, const Architecture& arch) {
    std::vector<std::vector<int>> routes;
    try {
        routes = enumerate_routes(arch, static_cast<std::size_t>(space.l_seq()));
    } catch (const PathOverflow&) {
        return false;
    }
    for (const auto& r : routes)
        if (static_cast<int>(r.size()) - 2 > space.template_slots()) return false;
    return true;
}

Architecture random_architecture(const SearchSpace& space, Rng& rng) {
    const int n = space.max_nodes();
    const auto k = static_cast<std::uint64_t>(space.num_ops());
    for (int attempt = 0; attempt < kSamplingRetryCap; ++attempt) {
        std::vector<int> ops(static_cast<std::size_t>(n));
        ops.front() = kInputOp;
        ops.back() = kOutputOp;
        for (int v = 1; v < n - 1; ++v) ops[static_cast<std::size_t>(v)] = static_cast<int>(uniform_index(rng, k));
        std::vector<std::uint8_t> adj;
        if (space.fixed_topology()) {
            adj = space.topology();
        } else {
            adj.assign(static_cast<std::size_t>(n * n), 0);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) adj[static_cast<std::size_t>(i * n + j)] = bernoulli(rng, 0.5);
        }
        Architecture arch(std::move(ops), std::move(adj));
        if (validate(space, arch) && encodable(space, arch)) return arch;
    }
    throw SamplingExhausted("no valid architecture after " + std::to_string(kSamplingRetryCap) +
                            " attempts in space '" + space.name() + "'");
}

Architecture random_architecture(const SearchSpace& space, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return random_architecture(space, rng);
}

std::vector<Architecture> enumerate_space(const SearchSpace& space, std::size_t limit) {
    if (!space.fixed_topology()) throw ParameterError("enumerate_space requires a fixed-topology space");
    const int n = space.max_nodes();
    const int internal = n - 2;
    std::size_t count = 1;
    for (int i = 0; i < internal; ++i) {
        count *= static_cast<std::size_t>(space.num_ops());
        if (count > limit) throw ParameterError("space has more than " + std::to_string(limit) + " architectures");
    }
    std::vector<Architecture> out;
    out.reserve(count);
    std::vector<int> ops(static_cast<std::size_t>(n), 0);
    ops.front() = kInputOp;
    ops.back() = kOutputOp;
    for (std::size_t idx = 0; idx < count; ++idx) {
        std::size_t rem = idx;
        for (int v = internal; v >= 1; --v) {
            ops[static_cast<std::size_t>(v)] = static_cast<int>(rem % static_cast<std::size_t>(space.num_ops()));
            rem /= static_cast<std::size_t>(space.num_ops());
        }
        out.emplace_back(ops, space.topology());
    }
    return out;
}

}  // namespace dclnas
