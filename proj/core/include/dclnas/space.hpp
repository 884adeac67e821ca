#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dclnas/rng.hpp"

namespace dclnas {

// Sentinel op codes for the two terminal nodes of a cell.
inline constexpr int kInputOp = -1;
inline constexpr int kOutputOp = -2;
inline constexpr std::string_view kInputName = "input";
inline constexpr std::string_view kOutputName = "output";

// One cell as a node-labelled DAG. Node 0 is Input, the last node is Output,
// nodes are in topological order so the adjacency is strictly upper
// triangular. Internal node ops are indices into SearchSpace::op_set().
class Architecture {
public:
    Architecture() = default;
    // Throws StructuralError if the adjacency is not num_nodes x num_nodes.
    Architecture(std::vector<int> ops, std::vector<std::uint8_t> adjacency);

    int num_nodes() const { return static_cast<int>(ops_.size()); }
    int op(int node) const { return ops_[static_cast<std::size_t>(node)]; }
    const std::vector<int>& ops() const { return ops_; }
    const std::vector<std::uint8_t>& adjacency() const { return adjacency_; }

    bool has_edge(int from, int to) const {
        return adjacency_[static_cast<std::size_t>(from * num_nodes() + to)] != 0;
    }
    void set_edge(int from, int to, bool present) {
        adjacency_[static_cast<std::size_t>(from * num_nodes() + to)] = present ? 1 : 0;
    }
    void set_op(int node, int op) { ops_[static_cast<std::size_t>(node)] = op; }
    int edge_count() const;

    bool operator==(const Architecture&) const = default;

private:
    std::vector<int> ops_;
    std::vector<std::uint8_t> adjacency_;
};

// Mirrors the search-space JSON file.
struct SpaceDefinition {
    std::string name;
    std::vector<std::string> op_set;
    int max_nodes = 0;
    int max_edges = 0;
    std::vector<std::string> path_template;
    int l_seq = 0;
    std::vector<std::string> onehot_order;
    // Optional row-major 0/1 string. When present every architecture of the
    // space shares this adjacency and only node ops vary (edge-labelled
    // spaces after line-graph conversion).
    std::string fixed_adjacency;
};

class SearchSpace {
public:
    // Throws ConfigError naming every violated invariant.
    explicit SearchSpace(SpaceDefinition def);

    static SearchSpace from_json(std::string_view text);
    static SearchSpace from_file(const std::filesystem::path& path);
    std::string to_json() const;

    const SpaceDefinition& definition() const { return def_; }
    const std::string& name() const { return def_.name; }
    const std::vector<std::string>& op_set() const { return def_.op_set; }
    int num_ops() const { return static_cast<int>(def_.op_set.size()); }
    int max_nodes() const { return def_.max_nodes; }
    int max_edges() const { return def_.max_edges; }
    int l_seq() const { return def_.l_seq; }

    int template_slots() const { return static_cast<int>(template_ops_.size()); }
    int template_op(int slot) const { return template_ops_[static_cast<std::size_t>(slot)]; }
    int onehot_width() const { return num_ops(); }
    int onehot_index(int op) const { return onehot_of_op_[static_cast<std::size_t>(op)]; }

    int op_index(std::string_view name) const;  // throws LookupError
    std::string op_name(int op) const;

    bool fixed_topology() const { return topology_.has_value(); }
    const std::vector<std::uint8_t>& topology() const { return *topology_; }

    // Longest path (in internal ops) any architecture of the space can hold.
    int max_path_length() const { return max_path_length_; }
    std::size_t encoding_length() const {
        return static_cast<std::size_t>(l_seq()) * static_cast<std::size_t>(template_slots()) *
               static_cast<std::size_t>(onehot_width());
    }

    // Same space with a different op -> one-hot position assignment.
    SearchSpace with_onehot_order(std::vector<std::string> order) const;

private:
    SpaceDefinition def_;
    std::unordered_map<std::string, int> op_lookup_;
    std::vector<int> template_ops_;
    std::vector<int> onehot_of_op_;
    std::optional<std::vector<std::uint8_t>> topology_;
    int max_path_length_ = 0;
};

// Presets used throughout the tests and the CLI.
SearchSpace nasbench101_space();
// Four-node, six-edge cell with five candidate ops per edge, modelled as its
// line graph: 6 labelled internal nodes on a fixed topology (15 625 cells).
SearchSpace nasbench201_space();
SearchSpace preset_space(std::string_view name);  // "nasbench101" | "nasbench201"

Architecture make_architecture(const SearchSpace& space, std::span<const std::string> node_ops,
                               std::string_view adjacency_bits);
std::vector<std::string> node_op_names(const SearchSpace& space, const Architecture& arch);
std::string adjacency_bits(const Architecture& arch);

// True iff every Architecture invariant holds under `space`. Throws
// StructuralError when the dimensions do not fit the space at all.
bool validate(const SearchSpace& space, const Architecture& arch);

bool output_reachable(const Architecture& arch);
std::vector<bool> reachable_from_input(const Architecture& arch);

// All Input->Output routes as node-index sequences (Input and Output
// included), DFS order. Throws PathOverflow once more than `limit` exist.
std::vector<std::vector<int>> enumerate_routes(const Architecture& arch, std::size_t limit);

// At most L_seq paths, none longer than the path template.
bool encodable(const SearchSpace& space, const Architecture& arch);

inline constexpr int kSamplingRetryCap = 10'000;

// Valid and encodable (at most l_seq paths) architecture; rejection sampled.
// Throws SamplingExhausted after kSamplingRetryCap attempts.
Architecture random_architecture(const SearchSpace& space, std::uint64_t seed);
Architecture random_architecture(const SearchSpace& space, Rng& rng);

// Every architecture of a fixed-topology space, ops enumerated in
// lexicographic order. Throws ParameterError for free-topology spaces or
// when the count exceeds `limit`.
std::vector<Architecture> enumerate_space(const SearchSpace& space, std::size_t limit = 1'000'000);

struct ArchHash {
    std::array<std::uint8_t, 32> digest{};

    std::string hex() const;
    static ArchHash from_hex(std::string_view hex);
    auto operator<=>(const ArchHash&) const = default;
};

struct ArchHashHasher {
    std::size_t operator()(const ArchHash& h) const noexcept {
        std::size_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | h.digest[static_cast<std::size_t>(i)];
        return v;
    }
};

// SHA-256 over the canonically sorted multiset of path op sequences, so
// architectures with identical hard encodings share a digest.
ArchHash arch_hash(const Architecture& arch);

}  // namespace dclnas
