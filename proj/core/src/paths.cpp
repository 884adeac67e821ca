#include "dclnas/paths.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "dclnas/error.hpp"
#include "json.hpp"

namespace dclnas {

using nlohmann::json;

std::vector<Path> enumerate_paths(const Architecture& arch, std::size_t limit) {
    std::vector<std::vector<int>> routes;
    try {
        routes = enumerate_routes(arch, limit);
    } catch (const PathOverflow&) {
        throw PathOverflow("architecture " + arch_hash(arch).hex() + " has more than " + std::to_string(limit) +
                           " paths");
    }
    std::vector<Path> out;
    out.reserve(routes.size());
    for (const auto& r : routes) {
        Path p;
        p.ops.reserve(r.size() - 2);
        for (std::size_t i = 1; i + 1 < r.size(); ++i) p.ops.push_back(arch.op(r[i]));
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Path> enumerate_paths(const SearchSpace& space, const Architecture& arch) {
    return enumerate_paths(arch, 2 * static_cast<std::size_t>(space.l_seq()));
}

PathTable::PathTable(std::vector<std::pair<Path, PathId>> entries, std::vector<std::string> path_template)
    : entries_(std::move(entries)), template_(std::move(path_template)) {
    for (std::size_t row = 0; row < entries_.size(); ++row) {
        const auto& [path, id] = entries_[row];
        if (id >= kPadPathId) throw ParameterError("path id " + std::to_string(id) + " collides with the pad id");
        if (!by_path_.emplace(path.ops, id).second) throw ParameterError("duplicate path in path table");
        if (!token_row_.emplace(id, row).second)
            throw ParameterError("duplicate path id " + std::to_string(id) + " in path table");
    }
}

PathTable PathTable::build(const SearchSpace& space, std::size_t limit) {
    const int k = space.num_ops();
    const int max_len = space.max_path_length();

    // Ops ordered by their one-hot position; iterating digits in this order
    // yields the lexicographic order directly.
    std::vector<int> by_onehot(static_cast<std::size_t>(k));
    for (int op = 0; op < k; ++op) by_onehot[static_cast<std::size_t>(space.onehot_index(op))] = op;

    std::vector<std::pair<Path, PathId>> entries;
    for (int len = 0; len <= max_len; ++len) {
        std::vector<int> digits(static_cast<std::size_t>(len), 0);
        while (true) {
            if (entries.size() >= limit)
                throw PathOverflow("path table enumeration exceeded " + std::to_string(limit) + " paths (reached " +
                                   std::to_string(entries.size()) + " at length " + std::to_string(len) + ")");
            Path p;
            p.ops.reserve(digits.size());
            for (int d : digits) p.ops.push_back(by_onehot[static_cast<std::size_t>(d)]);
            entries.emplace_back(std::move(p), static_cast<PathId>(entries.size()));
            int pos = len - 1;
            while (pos >= 0 && ++digits[static_cast<std::size_t>(pos)] == k) digits[static_cast<std::size_t>(pos--)] = 0;
            if (pos < 0) break;
        }
    }
    return PathTable(std::move(entries), space.definition().path_template);
}

std::optional<PathId> PathTable::find(const Path& p) const {
    auto it = by_path_.find(p.ops);
    if (it == by_path_.end()) return std::nullopt;
    return it->second;
}

PathId PathTable::id(const Path& p) const {
    auto found = find(p);
    if (!found) throw LookupError("path of length " + std::to_string(p.length()) + " is not in the path table");
    return *found;
}

std::size_t PathTable::token_index(PathId id) const {
    if (id == kPadPathId) return size();
    auto it = token_row_.find(id);
    if (it == token_row_.end()) throw LookupError("unknown path id " + std::to_string(id));
    return it->second;
}

void PathTable::save_jsonl(std::ostream& out, const SearchSpace& space) const {
    json header;
    header["pad_id"] = kPadPathId;
    header["template"] = template_;
    header["count"] = entries_.size();
    out << header.dump() << '\n';
    for (const auto& [path, id] : entries_) {
        json rec;
        rec["path_id"] = id;
        json ops = json::array();
        for (int op : path.ops) ops.push_back(space.op_name(op));
        rec["ops"] = std::move(ops);
        out << rec.dump() << '\n';
    }
}

PathTable PathTable::load_jsonl(std::istream& in, const SearchSpace& space) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> tmpl;
    std::vector<std::pair<Path, PathId>> entries;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (!have_header) {
                if (j.at("pad_id").get<std::uint64_t>() != kPadPathId)
                    throw IoError("path table pad id does not match this build");
                tmpl = j.at("template").get<std::vector<std::string>>();
                have_header = true;
                continue;
            }
            Path p;
            for (const auto& name : j.at("ops")) p.ops.push_back(space.op_index(name.get<std::string>()));
            entries.emplace_back(std::move(p), j.at("path_id").get<PathId>());
        } catch (const json::exception& e) {
            throw IoError("path table line " + std::to_string(line_no) + ": " + e.what());
        } catch (const LookupError& e) {
            throw IoError("path table line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw IoError("path table is empty");
    return PathTable(std::move(entries), std::move(tmpl));
}

HardEncoding HardEncoding::from_bits(std::string_view bits) {
    HardEncoding e(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') {
            e.set(i);
        } else if (bits[i] != '0') {
            throw StructuralError("hard encoding string must contain only 0/1");
        }
    }
    return e;
}

std::size_t HardEncoding::popcount() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::string HardEncoding::to_string() const {
    std::string s(length_, '0');
    for (std::size_t i = 0; i < length_; ++i)
        if (bit(i)) s[i] = '1';
    return s;
}

std::vector<int> align_path(const Path& path, const SearchSpace& space) {
    const int slots = space.template_slots();
    const int len = static_cast<int>(path.length());
    if (len > slots)
        throw EncodingError("path of length " + std::to_string(len) + " exceeds the " + std::to_string(slots) +
                            "-slot template");
    std::vector<int> placed;
    placed.reserve(path.ops.size());
    int cursor = 0;
    for (int k = 0; k < len; ++k) {
        const int op = path.ops[static_cast<std::size_t>(k)];
        if (op < 0 || op >= space.num_ops()) throw EncodingError("path op outside op_set: " + std::to_string(op));
        const int last = slots - (len - k);
        int slot = cursor;
        for (int s = cursor; s <= last; ++s) {
            if (space.template_op(s) == op) {
                slot = s;
                break;
            }
        }
        placed.push_back(slot);
        cursor = slot + 1;
    }
    return placed;
}

namespace {

void write_path(HardEncoding& out, std::size_t offset, const Path& path, const SearchSpace& space) {
    const auto slots = align_path(path, space);
    const auto width = static_cast<std::size_t>(space.onehot_width());
    for (std::size_t k = 0; k < slots.size(); ++k)
        out.set(offset + static_cast<std::size_t>(slots[k]) * width +
                static_cast<std::size_t>(space.onehot_index(path.ops[k])));
}

}  // namespace

HardEncoding encode_path(const Path& path, const SearchSpace& space) {
    HardEncoding e(static_cast<std::size_t>(space.template_slots() * space.onehot_width()));
    write_path(e, 0, path, space);
    return e;
}

std::vector<Path> sort_paths(std::vector<Path> paths, const PathTable& table) {
    std::vector<std::pair<PathId, Path>> keyed;
    keyed.reserve(paths.size());
    for (auto& p : paths) {
        const PathId id = table.id(p);
        keyed.emplace_back(id, std::move(p));
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.second.length() != b.second.length()) return a.second.length() < b.second.length();
        return a.first < b.first;
    });
    std::vector<Path> out;
    out.reserve(keyed.size());
    for (auto& [id, p] : keyed) out.push_back(std::move(p));
    return out;
}

namespace {

std::vector<Path> sorted_paths_checked(const Architecture& arch, const SearchSpace& space, const PathTable& table) {
    const auto cap = static_cast<std::size_t>(space.l_seq());
    std::vector<std::vector<int>> routes;
    try {
        routes = enumerate_routes(arch, cap);
    } catch (const PathOverflow&) {
        throw CapacityError("architecture " + arch_hash(arch).hex() + " has more than L_seq=" + std::to_string(cap) +
                            " paths");
    }
    std::vector<Path> paths;
    paths.reserve(routes.size());
    for (const auto& r : routes) {
        Path p;
        for (std::size_t i = 1; i + 1 < r.size(); ++i) p.ops.push_back(arch.op(r[i]));
        paths.push_back(std::move(p));
    }
    return sort_paths(std::move(paths), table);
}

}  // namespace

HardEncoding encode_architecture(const Architecture& arch, const SearchSpace& space, const PathTable& table) {
    const auto paths = sorted_paths_checked(arch, space, table);
    const auto block = static_cast<std::size_t>(space.template_slots() * space.onehot_width());
    HardEncoding e(space.encoding_length());
    for (std::size_t i = 0; i < paths.size(); ++i) write_path(e, i * block, paths[i], space);
    return e;
}

std::vector<PathId> path_id_sequence(const Architecture& arch, const SearchSpace& space, const PathTable& table) {
    const auto paths = sorted_paths_checked(arch, space, table);
    std::vector<PathId> ids(static_cast<std::size_t>(space.l_seq()), kPadPathId);
    for (std::size_t i = 0; i < paths.size(); ++i) ids[i] = table.id(paths[i]);
    return ids;
}

int manhattan_distance(const HardEncoding& a, const HardEncoding& b) {
    if (a.size() != b.size())
        throw StructuralError("encoding lengths differ: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    int d = 0;
    const auto& wa = a.words();
    const auto& wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += std::popcount(wa[i] ^ wb[i]);
    return d;
}

}  // namespace dclnas
