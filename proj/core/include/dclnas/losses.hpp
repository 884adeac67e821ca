#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dclnas/nn.hpp"
#include "dclnas/oracle.hpp"

namespace dclnas {

struct PretrainConfig {
    int batch_size = 512;
    int epochs = 100;
    std::vector<int> cluster_sizes{10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    bool include_positive_in_denominator = false;
    double beta = 10.0;
};

enum class FinetuneObjective { pairwise, mse };

struct FinetuneConfig {
    int batch_size = 128;
    int epochs = 50;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    FinetuneObjective objective = FinetuneObjective::pairwise;
};

// Throw ConfigError listing every violated invariant.
void check_config(const PretrainConfig& cfg);
void check_config(const FinetuneConfig& cfg);

// Summed contrastive prototype loss. Row i of `queries` belongs to cluster
// assignment[i]; logits are dot(query, prototype_k) / taus[k] and, unless
// `include_positive` is set, the normalizer runs over the other clusters
// only. Optional outputs receive d(loss)/d(queries) and d(loss)/d(prototypes).
// Throws ParameterError when fewer than two prototypes are given.
double pretrain_loss(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& prototypes,
                     const std::vector<int>& assignment, const std::vector<double>& taus,
                     bool include_positive = false, Eigen::MatrixXd* d_queries = nullptr,
                     Eigen::MatrixXd* d_prototypes = nullptr);

// Sum over ordered pairs i != j of |pred_i - pred_j| when the predicted and
// true orders disagree. Pairs with tied targets contribute 0.
// Throws ParameterError for fewer than two samples or unequal lengths.
double finetune_loss(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                     Eigen::VectorXd* d_preds = nullptr);
// Per ordered pair terms, row-major over (i, j) with i != j.
std::vector<double> finetune_loss_terms(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

double mse_loss(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets, Eigen::VectorXd* d_preds = nullptr);

class Adam {
public:
    Adam(const PredictorModel& model, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // Updates the slots in [first, last); gradients outside are ignored.
    void step(PredictorModel& model, const ad::Grads& grads, int first, int last);
    void step(PredictorModel& model, const ad::Grads& grads) {
        step(model, grads, 0, static_cast<int>(model.num_params()));
    }
    int steps() const { return t_; }

private:
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<ad::Mat> m_, v_;
};

struct TrainRecord {
    std::string stage;
    int epoch = 0;
    int step = 0;
    double loss = 0.0;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    void write_jsonl(std::ostream& out) const;
    std::vector<double> losses(const std::string& stage) const;
};

// Shared view of the space for training helpers.
struct EncodingContext {
    const SearchSpace& space;
    const PathTable& table;
};

// Soft-encodes `batch`, clusters its hard encodings once per K and returns
// the multi-K averaged loss; `grads` (if given) receives its gradient.
double pretrain_batch_loss(const PredictorModel& model, const EncodingContext& ctx,
                           const std::vector<Architecture>& batch, const PretrainConfig& cfg, std::uint64_t cluster_seed,
                           ad::Grads* grads = nullptr);

// One fresh batch and one optimizer step per epoch; encoder parameters only.
void pretrain(PredictorModel& model, const EncodingContext& ctx, const PretrainConfig& cfg, TrainLog* log = nullptr);

// Minibatch training over seeded shuffles of `labeled`; all parameters.
// Throws ParameterError for fewer than two samples.
void finetune(PredictorModel& model, const EncodingContext& ctx, const std::vector<LabeledSample>& labeled,
              const FinetuneConfig& cfg, TrainLog* log = nullptr);

}  // namespace dclnas
