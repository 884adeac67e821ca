#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dclnas/autodiff.hpp"
#include "dclnas/paths.hpp"
#include "dclnas/space.hpp"

namespace dclnas {

struct ModelDims {
    int num_ops = 0;      // node features are one-hot over num_ops + Input + Output
    int gin_dim = 8;      // GIN embedding and MLP hidden width
    int gin_layers = 3;
    int d = 16;           // soft feature dim after the lift; equals d_fm
    int d_e = 128;        // path-token embedding dim
    int heads = 4;
    int ff_mult = 4;      // feed-forward width = ff_mult * d_e
    int d_fm = 16;
    int l_seq = 0;
    int table_rows = 0;   // |PathTable| + 1; the last row is the PAD token
    int head_hidden = 16;

    int node_features() const { return num_ops + 2; }
    int soft_length() const { return 2 * d_fm; }
    bool operator==(const ModelDims&) const = default;
};

// Default widths for a space and its table.
ModelDims default_dims(const SearchSpace& space, const PathTable& table);

// Throws ConfigError listing every violated constraint.
void check_dims(const ModelDims& dims);

class PredictorModel {
public:
    PredictorModel() = default;
    PredictorModel(ModelDims dims, std::uint64_t seed);

    const ModelDims& dims() const { return dims_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t num_params() const { return params_.size(); }

    ad::Mat& param(int slot) { return params_[static_cast<std::size_t>(slot)]; }
    const ad::Mat& param(int slot) const { return params_[static_cast<std::size_t>(slot)]; }
    ad::Mat& param(std::string_view name) { return param(slot(name)); }
    const ad::Mat& param(std::string_view name) const { return param(slot(name)); }
    const std::vector<ad::Mat>& params() const { return params_; }
    std::vector<ad::Mat>& params() { return params_; }
    const std::vector<std::string>& names() const { return names_; }
    int slot(std::string_view name) const;  // throws LookupError

    // Slots [0, encoder_end) belong to the soft encoder; the rest is the head.
    int encoder_end() const { return encoder_end_; }
    bool is_head(int slot) const { return slot >= encoder_end_; }

    ad::Grads zero_grads() const;
    std::size_t scalar_count() const;
    bool all_finite() const;

    // JSON container: format tag, version, dims, seed, then every parameter
    // in slot order as {name, rows, cols, data (row-major)}.
    std::string to_json() const;
    static PredictorModel from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static PredictorModel load(const std::filesystem::path& path);

    bool operator==(const PredictorModel& o) const {
        return dims_ == o.dims_ && seed_ == o.seed_ && names_ == o.names_ && params_ == o.params_;
    }

private:
    void add(std::string name, int rows, int cols);

    ModelDims dims_;
    std::uint64_t seed_ = 0;
    std::vector<std::string> names_;
    std::vector<ad::Mat> params_;
    int encoder_end_ = 0;
};

// Model-ready view of one architecture.
struct EncodedArch {
    std::vector<int> features;              // feature index per node
    std::vector<std::uint8_t> adjacency;    // n x n, row-major
    std::vector<int> token_rows;            // token-table row per path slot, PAD last row
};

// Throws CapacityError when the architecture has more than L_seq paths.
EncodedArch prepare(const Architecture& arch, const SearchSpace& space, const PathTable& table);
// Token rows from explicit (sorted, padded) path ids; throws LookupError for
// ids that are neither in the table nor PAD.
std::vector<int> token_rows(const std::vector<PathId>& ids, const PathTable& table);

// One batched forward pass with its recorded tape.
class ForwardPass {
public:
    ForwardPass() = default;

    bool empty() const { return !score_.valid(); }
    std::size_t batch() const { return batch_; }

    const ad::Mat& node_embeddings() const { return tape_.value(gin_out_); }  // stacked GIN output
    const ad::Mat& lifted_nodes() const { return tape_.value(lifted_); }
    const ad::Mat& fm_n() const { return tape_.value(fm_n_); }
    const ad::Mat& fm_p() const { return tape_.value(fm_p_); }
    const ad::Mat& node_attention() const { return tape_.value(node_att_); }
    const ad::Mat& soft_encoding() const { return tape_.value(soft_); }  // batch x soft_length
    const ad::Mat& hidden() const { return tape_.value(hidden_); }       // input of the Score layer
    const ad::Mat& logits() const { return tape_.value(logit_); }
    const ad::Mat& scores() const { return tape_.value(score_); }         // batch x 1
    const std::vector<double>& path_attention() const { return tape_.last_attention(); }

    // Exact reverse-mode gradients for a loss whose adjoint is given at the
    // soft encoding or at the scores. Throws StateError on an empty pass.
    void backward_soft(const ad::Mat& adjoint, ad::Grads& grads) const;
    void backward_scores(const ad::Mat& adjoint, ad::Grads& grads) const;

private:
    friend ForwardPass forward(const PredictorModel&, const std::vector<EncodedArch>&);
    ad::Tape tape_;
    std::size_t batch_ = 0;
    ad::Var gin_out_, lifted_, fm_n_, fm_p_, node_att_, soft_, hidden_, logit_, score_;
};

ForwardPass forward(const PredictorModel& model, const std::vector<EncodedArch>& batch);

// Single-architecture conveniences.
ad::Mat gin_forward(const PredictorModel& model, const EncodedArch& arch);  // n x gin_dim
// Context vector and attention pooling over already lifted n x d embeddings.
Eigen::VectorXd node_attention_pool(const PredictorModel& model, const ad::Mat& node_embeds);
Eigen::VectorXd path_attention_forward(const PredictorModel& model, const std::vector<PathId>& ids,
                                       const PathTable& table);
Eigen::VectorXd forward_embedding(const PredictorModel& model, const Architecture& arch, const SearchSpace& space,
                                  const PathTable& table);
double forward_score(const PredictorModel& model, const Architecture& arch, const SearchSpace& space,
                     const PathTable& table);

// Scores for many architectures, processed in chunks of `chunk`.
Eigen::VectorXd score_batch(const PredictorModel& model, const std::vector<EncodedArch>& archs,
                            std::size_t chunk = 1024);

}  // namespace dclnas
