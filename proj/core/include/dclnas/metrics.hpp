#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dclnas/losses.hpp"
#include "dclnas/nn.hpp"
#include "dclnas/oracle.hpp"

namespace dclnas {

struct SweepSpec {
    std::vector<int> label_budgets{78, 156, 469};
    int validation_budget = 200;
    int repeats = 10;
    std::optional<int> test_size;  // nullopt: every remaining labeled architecture
};

void check_spec(const SweepSpec& spec);  // throws ConfigError

struct SweepConfig {
    FinetuneConfig finetune;
    // Starting weights for every cell; a fresh seeded model when null.
    const PredictorModel* pretrained = nullptr;
    int d_e = 128;
    std::uint64_t seed = 0;
};

struct SweepRow {
    int budget = 0;
    int test_size = 0;
    double mean_tau = 0.0;
    double std_tau = 0.0;     // sample standard deviation; 0 for one repeat
    double mean_val_tau = 0.0;
    std::vector<double> taus;  // per repeat
    std::vector<std::uint64_t> seeds;
};

// Per budget and repeat: disjoint train / validation / test draws from
// `labeled`, fine-tune a copy of the starting predictor on train, Kendall-tau
// of predicted vs true val_acc on test (and on validation for reference).
// Throws ParameterError naming the counts when `labeled` is too small.
std::vector<SweepRow> run_sweep(const SearchSpace& space, const PathTable& table,
                                const std::vector<LabeledSample>& labeled, const SweepSpec& spec,
                                const SweepConfig& cfg);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

}  // namespace dclnas
