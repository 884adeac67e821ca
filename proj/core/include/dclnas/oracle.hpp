#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dclnas/space.hpp"

namespace dclnas {

enum class SampleSource { tabular, synthetic };

struct LabeledSample {
    Architecture arch;
    double val_acc = 0.0;
    std::optional<double> test_acc;
    SampleSource source = SampleSource::synthetic;
};

class FitnessOracle {
public:
    virtual ~FitnessOracle() = default;
    // Throws LookupError when the oracle has no value for `arch`.
    virtual LabeledSample evaluate(const Architecture& arch) const = 0;
};

// Benchmark table indexed by ArchHash. Record format, one per line:
//   {"ops": [...names incl. input/output], "adjacency": "0110...", "val_acc": x, "test_acc": y}
class TabularOracle : public FitnessOracle {
public:
    TabularOracle() = default;
    explicit TabularOracle(const SearchSpace& space) : space_(&space) {}

    // Throws IoError naming the line for malformed records, out-of-range
    // accuracies, invalid architectures, and duplicate hashes.
    static TabularOracle load(const std::filesystem::path& path, const SearchSpace& space);
    static TabularOracle read(std::istream& in, const SearchSpace& space);

    void add(LabeledSample sample);  // throws ParameterError on duplicates or bad ranges
    std::size_t size() const { return entries_.size(); }
    const std::vector<LabeledSample>& entries() const { return entries_; }
    std::optional<LabeledSample> lookup(const ArchHash& h) const;

    LabeledSample evaluate(const Architecture& arch) const override;

    // Same format as load(); records in insertion order.
    void write(std::ostream& out) const;

private:
    const SearchSpace* space_ = nullptr;
    std::vector<LabeledSample> entries_;
    std::unordered_map<ArchHash, std::size_t, ArchHashHasher> index_;
};

void write_tabular_record(std::ostream& out, const SearchSpace& space, const LabeledSample& s);

struct LandscapeParams {
    double baseline = 0.3;
    double op_scale = 0.45;         // spread of per-op, per-depth weights
    double pair_scale = 0.3;        // spread of consecutive-op interaction weights
    double longest_bonus = 0.08;    // per op on the longest path
    double path_penalty = 0.05;     // per path beyond the first
    double noise = 0.0;             // validation noise amplitude
    double test_noise = 0.005;      // test accuracy = validation + this * N(0, 1)
    int depth_levels = 3;           // depths beyond this share the last weight
};

// Seeded fitness that depends on an architecture only through its multiset
// of path op sequences, so equal hard encodings get equal fitness.
class SyntheticLandscape : public FitnessOracle {
public:
    SyntheticLandscape(const SearchSpace& space, std::uint64_t seed, LandscapeParams params = {});

    std::uint64_t seed() const { return seed_; }
    const LandscapeParams& params() const { return params_; }

    double raw(const Architecture& arch) const;      // pre-sigmoid value
    double fitness(const Architecture& arch) const;  // validation accuracy in [0, 1]
    double test_accuracy(const Architecture& arch) const;
    LabeledSample evaluate(const Architecture& arch) const override;

    double op_weight(int op, int depth) const;
    double pair_weight(int a, int b) const;

private:
    const SearchSpace* space_;
    std::uint64_t seed_;
    LandscapeParams params_;
    std::vector<double> op_w_;    // num_ops x depth_levels
    std::vector<double> pair_w_;  // num_ops x num_ops
};

// Evaluation budget and archive of real evaluations.
class BudgetLedger {
public:
    explicit BudgetLedger(int fes_max);

    int fes() const { return fes_; }
    int fes_max() const { return fes_max_; }
    int remaining() const { return fes_max_ - fes_; }

    // Archive hit: cached sample, fes unchanged. Miss: oracle evaluation,
    // fes + 1. Throws BudgetExhausted on a miss with no budget left.
    LabeledSample query(const FitnessOracle& oracle, const Architecture& arch);

    bool archived(const ArchHash& h) const { return index_.contains(h); }
    bool archived(const Architecture& arch) const { return archived(arch_hash(arch)); }
    // Evaluated samples in evaluation order.
    const std::vector<LabeledSample>& archive() const { return archive_; }
    const std::vector<ArchHash>& hashes() const { return hashes_; }

private:
    int fes_max_;
    int fes_ = 0;
    std::vector<LabeledSample> archive_;
    std::vector<ArchHash> hashes_;
    std::unordered_map<ArchHash, std::size_t, ArchHashHasher> index_;
};

}  // namespace dclnas
