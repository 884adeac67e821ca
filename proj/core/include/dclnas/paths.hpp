#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dclnas/space.hpp"

namespace dclnas {

// Op sequence of one Input->Output route, terminals excluded. A direct
// Input->Output edge is the empty path.
struct Path {
    std::vector<int> ops;

    std::size_t length() const { return ops.size(); }
    auto operator<=>(const Path&) const = default;
};

using PathId = std::uint32_t;

// Reserved id for the padding token; larger than any real id.
inline constexpr PathId kPadPathId = 0x7FFFFFFFu;

// Exhaustive DFS enumeration; duplicates kept. Throws PathOverflow when the
// count exceeds `limit`.
std::vector<Path> enumerate_paths(const Architecture& arch, std::size_t limit);
// Uses the default overflow limit of 2 * L_seq.
std::vector<Path> enumerate_paths(const SearchSpace& space, const Architecture& arch);

// Deduplicated Path -> dense id registry of a search space.
class PathTable {
public:
    PathTable() = default;
    // Explicit ids; used when loading a persisted table. Ids need not be
    // dense here, but must be unique and below kPadPathId.
    PathTable(std::vector<std::pair<Path, PathId>> entries, std::vector<std::string> path_template);

    // Every op sequence of length 0..space.max_path_length(), ordered by
    // length and then lexicographically by one-hot index. Throws PathOverflow
    // when more than `limit` paths would be created.
    static PathTable build(const SearchSpace& space, std::size_t limit = 1'000'000);

    std::size_t size() const { return by_path_.size(); }
    PathId pad_id() const { return kPadPathId; }
    const std::vector<std::string>& path_template() const { return template_; }

    std::optional<PathId> find(const Path& p) const;
    PathId id(const Path& p) const;  // throws LookupError
    // Dense row index for embedding lookups; pad maps to size().
    std::size_t token_index(PathId id) const;
    const std::vector<std::pair<Path, PathId>>& entries() const { return entries_; }

    // JSON-lines: header {pad_id, template, count}, then {path_id, ops[]}.
    void save_jsonl(std::ostream& out, const SearchSpace& space) const;
    static PathTable load_jsonl(std::istream& in, const SearchSpace& space);

    bool operator==(const PathTable& other) const { return entries_ == other.entries_; }

private:
    std::vector<std::pair<Path, PathId>> entries_;
    std::map<std::vector<int>, PathId> by_path_;
    std::map<PathId, std::size_t> token_row_;
    std::vector<std::string> template_;
};

// Fixed-length binary fingerprint of an architecture, bit-packed.
class HardEncoding {
public:
    HardEncoding() = default;
    explicit HardEncoding(std::size_t length) : length_(length), words_((length + 63) / 64, 0) {}
    static HardEncoding from_bits(std::string_view bits);  // "0101..."

    std::size_t size() const { return length_; }
    bool bit(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
    void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
    std::size_t popcount() const;
    std::string to_string() const;
    const std::vector<std::uint64_t>& words() const { return words_; }

    bool operator==(const HardEncoding&) const = default;

private:
    std::size_t length_ = 0;
    std::vector<std::uint64_t> words_;
};

// One block of onehot_width bits per template slot. Path ops are placed, in
// order, into the earliest slot of the matching op type that still leaves
// room for the rest of the path, else into the next free slot.
// Throws EncodingError if the path is longer than the template.
HardEncoding encode_path(const Path& path, const SearchSpace& space);

// Slot chosen for each op of `path` by encode_path.
std::vector<int> align_path(const Path& path, const SearchSpace& space);

// Ascending op count, then ascending Path-id; stable. Throws LookupError for
// paths missing from the table.
std::vector<Path> sort_paths(std::vector<Path> paths, const PathTable& table);

// Sorted path encodings, padded with zero blocks to L_seq paths.
// Throws CapacityError when the architecture has more than L_seq paths.
HardEncoding encode_architecture(const Architecture& arch, const SearchSpace& space, const PathTable& table);

// Path-ids in encoding order, padded with pad_id to L_seq.
std::vector<PathId> path_id_sequence(const Architecture& arch, const SearchSpace& space, const PathTable& table);

// Throws StructuralError on length mismatch.
int manhattan_distance(const HardEncoding& a, const HardEncoding& b);

}  // namespace dclnas
