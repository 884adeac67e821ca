#include "dclnas/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <fstream>

#include "dclnas/error.hpp"
#include "dclnas/rng.hpp"
#include "json_io.hpp"

namespace dclnas {

namespace {

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

std::uint64_t hash_key(const Architecture& arch) {
    const auto h = arch_hash(arch);
    std::uint64_t key = 0;
    for (int i = 0; i < 8; ++i) key = (key << 8) | h.digest[static_cast<std::size_t>(i)];
    return key;
}

}  // namespace

TabularOracle TabularOracle::load(const std::filesystem::path& path, const SearchSpace& space) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open tabular file " + path.string());
    return read(in, space);
}

TabularOracle TabularOracle::read(std::istream& in, const SearchSpace& space) {
    TabularOracle t(space);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fail = [&](const std::string& why) { return IoError("tabular line " + std::to_string(line_no) + ": " + why); };
        LabeledSample s;
        s.source = SampleSource::tabular;
        try {
            const auto j = io::json::parse(line);
            const auto ops = j.at("ops").get<std::vector<std::string>>();
            s.arch = make_architecture(space, ops, j.at("adjacency").get<std::string>());
            s.val_acc = j.at("val_acc").get<double>();
            if (j.contains("test_acc") && !j.at("test_acc").is_null()) s.test_acc = j.at("test_acc").get<double>();
        } catch (const io::json::exception& e) {
            throw fail(e.what());
        } catch (const Error& e) {
            throw fail(e.what());
        }
        if (!in_unit(s.val_acc)) throw fail("val_acc " + std::to_string(s.val_acc) + " outside [0, 1]");
        if (s.test_acc && !in_unit(*s.test_acc)) throw fail("test_acc " + std::to_string(*s.test_acc) + " outside [0, 1]");
        bool ok = false;
        try {
            ok = validate(space, s.arch);
        } catch (const Error& e) {
            throw fail(e.what());
        }
        if (!ok) throw fail("architecture is not valid in space '" + space.name() + "'");
        const auto h = arch_hash(s.arch);
        if (t.index_.contains(h)) throw fail("duplicate architecture hash " + h.hex());
        t.index_.emplace(h, t.entries_.size());
        t.entries_.push_back(std::move(s));
    }
    return t;
}

void TabularOracle::add(LabeledSample sample) {
    if (!in_unit(sample.val_acc) || (sample.test_acc && !in_unit(*sample.test_acc)))
        throw ParameterError("accuracy outside [0, 1]");
    const auto h = arch_hash(sample.arch);
    if (index_.contains(h)) throw ParameterError("duplicate architecture hash " + h.hex());
    index_.emplace(h, entries_.size());
    entries_.push_back(std::move(sample));
}

std::optional<LabeledSample> TabularOracle::lookup(const ArchHash& h) const {
    auto it = index_.find(h);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second];
}

LabeledSample TabularOracle::evaluate(const Architecture& arch) const {
    auto found = lookup(arch_hash(arch));
    if (!found) throw LookupError("architecture " + arch_hash(arch).hex() + " is not in the table");
    return *found;
}

void write_tabular_record(std::ostream& out, const SearchSpace& space, const LabeledSample& s) {
    io::ojson j;
    j["ops"] = node_op_names(space, s.arch);
    j["adjacency"] = adjacency_bits(s.arch);
    j["val_acc"] = s.val_acc;
    if (s.test_acc) {
        j["test_acc"] = *s.test_acc;
    } else {
        j["test_acc"] = nullptr;
    }
    out << j.dump() << '\n';
}

void TabularOracle::write(std::ostream& out) const {
    if (!space_) throw StateError("tabular oracle has no search space");
    for (const auto& s : entries_) write_tabular_record(out, *space_, s);
}

SyntheticLandscape::SyntheticLandscape(const SearchSpace& space, std::uint64_t seed, LandscapeParams params)
    : space_(&space), seed_(seed), params_(params) {
    if (params_.depth_levels < 1) throw ParameterError("depth_levels must be >= 1");
    const auto k = static_cast<std::size_t>(space.num_ops());
    Rng rng = make_rng(derive_seed(seed, {0x1A2D}));
    op_w_.resize(k * static_cast<std::size_t>(params_.depth_levels));
    for (auto& w : op_w_) w = params_.op_scale * standard_normal(rng);
    pair_w_.resize(k * k);
    for (auto& w : pair_w_) w = params_.pair_scale * standard_normal(rng);
}

double SyntheticLandscape::op_weight(int op, int depth) const {
    const int dl = std::min(depth, params_.depth_levels - 1);
    return op_w_[static_cast<std::size_t>(op * params_.depth_levels + dl)];
}

double SyntheticLandscape::pair_weight(int a, int b) const {
    return pair_w_[static_cast<std::size_t>(a * space_->num_ops() + b)];
}

double SyntheticLandscape::raw(const Architecture& arch) const {
    const auto routes = enumerate_routes(arch, 1'000'000);
    // Sum in canonical path order so the result is a function of the multiset.
    std::vector<std::vector<int>> paths;
    paths.reserve(routes.size());
    for (const auto& r : routes) {
        std::vector<int> ops;
        for (std::size_t i = 1; i + 1 < r.size(); ++i) ops.push_back(arch.op(r[i]));
        paths.push_back(std::move(ops));
    }
    std::sort(paths.begin(), paths.end());
    double v = params_.baseline;
    std::size_t longest = 0;
    for (const auto& p : paths) {
        for (std::size_t t = 0; t < p.size(); ++t) {
            v += op_weight(p[t], static_cast<int>(t));
            if (t + 1 < p.size()) v += pair_weight(p[t], p[t + 1]);
        }
        longest = std::max(longest, p.size());
    }
    v += params_.longest_bonus * static_cast<double>(longest);
    if (!paths.empty()) v -= params_.path_penalty * static_cast<double>(paths.size() - 1);
    if (params_.noise > 0.0) {
        Rng rng = make_rng(derive_seed(seed_, {0x7A1, hash_key(arch)}));
        v += params_.noise * standard_normal(rng);
    }
    return v;
}

double SyntheticLandscape::fitness(const Architecture& arch) const { return 1.0 / (1.0 + std::exp(-raw(arch))); }

double SyntheticLandscape::test_accuracy(const Architecture& arch) const {
    Rng rng = make_rng(derive_seed(seed_, {0x7E57, hash_key(arch)}));
    return std::clamp(fitness(arch) + params_.test_noise * standard_normal(rng), 0.0, 1.0);
}

LabeledSample SyntheticLandscape::evaluate(const Architecture& arch) const {
    LabeledSample s;
    s.arch = arch;
    s.val_acc = fitness(arch);
    s.test_acc = test_accuracy(arch);
    s.source = SampleSource::synthetic;
    return s;
}

BudgetLedger::BudgetLedger(int fes_max) : fes_max_(fes_max) {
    if (fes_max < 0) throw ParameterError("fes_max must be non-negative");
}

LabeledSample BudgetLedger::query(const FitnessOracle& oracle, const Architecture& arch) {
    const auto h = arch_hash(arch);
    if (auto it = index_.find(h); it != index_.end()) return archive_[it->second];
    if (fes_ >= fes_max_)
        throw BudgetExhausted("evaluation budget of " + std::to_string(fes_max_) + " exhausted");
    LabeledSample s = oracle.evaluate(arch);
    index_.emplace(h, archive_.size());
    hashes_.push_back(h);
    archive_.push_back(s);
    ++fes_;
    if (fes_ > fes_max_) throw StateError("ledger exceeded its budget");
    return s;
}

}  // namespace dclnas
