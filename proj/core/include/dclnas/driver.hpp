#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dclnas/evo.hpp"
#include "dclnas/losses.hpp"
#include "dclnas/nn.hpp"
#include "dclnas/oracle.hpp"

namespace dclnas {

struct AblationFlags {
    bool no_pretrain = false;
    bool mse_finetune = false;
    bool no_crossover = false;

    bool operator==(const AblationFlags&) const = default;
};

// Comma separated: none, no-pretrain, mse, no-crossover, blank (all three).
// Throws ConfigError on unknown names.
AblationFlags parse_ablation(std::string_view text);
std::string ablation_name(const AblationFlags& flags);

enum class OracleKind { synthetic, tabular };

struct OracleConfig {
    OracleKind kind = OracleKind::synthetic;
    std::string tabular_path;
    std::uint64_t landscape_seed = 0;
};

struct SearchConfig {
    std::string space = "nasbench201";
    int n = 20;
    int r = 6;
    int t_gap = 5;
    int n_infill = 10;
    int fes_max = 100;
    int c_a = 6;
    EvoConfig evo;
    FinetuneConfig finetune;
    PretrainConfig pretrain;
    // Used when no checkpoint is given and pretraining is not ablated away.
    bool pretrain_inline = false;
    std::optional<std::string> pretrain_checkpoint;
    AblationFlags ablation;
    OracleConfig oracle;
    int d_e = 128;
    int uncertainty_passes = 8;
    double uncertainty_sigma = 0.05;
    std::uint64_t seed = 0;
};

// Throws ConfigError listing every violated invariant.
void check_config(const SearchConfig& cfg);
// Missing keys keep their defaults; unknown keys are an error.
SearchConfig search_config_from_json(std::string_view text);
std::string to_json(const SearchConfig& cfg);

struct HistoryPoint {
    int iteration = 0;
    int fes = 0;
    double best_val = 0.0;
};

struct SearchResult {
    LabeledSample best;
    std::vector<HistoryPoint> history;  // after the initial sample, then after every infill round
    std::vector<LabeledSample> archive; // evaluation order
    int fes = 0;
    int iterations = 0;
    std::vector<std::string> run_log;   // one JSON object per line
    TrainLog train_log;
    double wall_ms = 0.0;
};

// The full surrogate-assisted loop. `pretrained` (if given) takes precedence
// over cfg.pretrain_checkpoint; both are ignored under no_pretrain.
SearchResult run_search(const SearchSpace& space, const PathTable& table, const FitnessOracle& oracle,
                        const SearchConfig& cfg, const PredictorModel* pretrained = nullptr);

// fes_max distinct uniformly sampled architectures, best by val_acc.
SearchResult random_search(const SearchSpace& space, const FitnessOracle& oracle, int fes_max, std::uint64_t seed);

// Tau-b over all unordered pairs; 0 when either side is constant.
// Throws ParameterError on unequal lengths or fewer than two items.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

// config.json, run_log.jsonl, archive.jsonl, best.json and history.csv;
// wall-clock data goes under timing/ so the rest is reproducible byte for byte.
void write_artifacts(const std::filesystem::path& out_dir, const SearchSpace& space, const SearchConfig& cfg,
                     const SearchResult& result);

}  // namespace dclnas
