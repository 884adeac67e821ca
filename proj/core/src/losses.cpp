#include "dclnas/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dclnas/cluster.hpp"
#include "dclnas/error.hpp"
#include "dclnas/rng.hpp"
#include "json_io.hpp"

namespace dclnas {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_config(const PretrainConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.batch_size < 2) problems.emplace_back("pretrain batch_size must be >= 2");
    if (cfg.epochs < 1) problems.emplace_back("pretrain epochs must be >= 1");
    if (cfg.cluster_sizes.empty()) problems.emplace_back("cluster_sizes must not be empty");
    for (int k : cfg.cluster_sizes)
        if (k < 2 || k > cfg.batch_size)
            problems.push_back("cluster size " + std::to_string(k) + " must lie in [2, batch_size]");
    if (!(cfg.learning_rate >= 0.0)) problems.emplace_back("pretrain learning_rate must be >= 0");
    if (!(cfg.beta > 0.0)) problems.emplace_back("beta must be > 0");
    if (!problems.empty()) {
        std::string msg = "invalid pretrain config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

void check_config(const FinetuneConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.batch_size < 2) problems.emplace_back("finetune batch_size must be >= 2");
    if (cfg.epochs < 1) problems.emplace_back("finetune epochs must be >= 1");
    if (!(cfg.learning_rate >= 0.0)) problems.emplace_back("finetune learning_rate must be >= 0");
    if (!problems.empty()) {
        std::string msg = "invalid finetune config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

double pretrain_loss(const MatrixXd& queries, const MatrixXd& prototypes, const std::vector<int>& assignment,
                     const std::vector<double>& taus, bool include_positive, MatrixXd* d_queries,
                     MatrixXd* d_prototypes) {
    const auto k = prototypes.rows();
    if (k < 2) throw ParameterError("pretrain_loss needs at least two prototypes");
    if (static_cast<Eigen::Index>(taus.size()) != k) throw ParameterError("pretrain_loss: one tau per prototype");
    if (static_cast<Eigen::Index>(assignment.size()) != queries.rows())
        throw ParameterError("pretrain_loss: one assignment per query");
    if (queries.cols() != prototypes.cols()) throw StructuralError("pretrain_loss: query/prototype width differs");

    if (d_queries) *d_queries = MatrixXd::Zero(queries.rows(), queries.cols());
    if (d_prototypes) *d_prototypes = MatrixXd::Zero(prototypes.rows(), prototypes.cols());

    VectorXd inv_tau(k);
    for (Eigen::Index c = 0; c < k; ++c) inv_tau(c) = 1.0 / taus[static_cast<std::size_t>(c)];
    const MatrixXd logits = (queries * prototypes.transpose()).array().rowwise() * inv_tau.transpose().array();

    double total = 0.0;
    VectorXd w(k);
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const int j = assignment[static_cast<std::size_t>(i)];
        if (j < 0 || j >= k) throw ParameterError("pretrain_loss: assignment out of range");
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < k; ++c)
            if (include_positive || c != j) mx = std::max(mx, logits(i, c));
        double z = 0.0;
        for (Eigen::Index c = 0; c < k; ++c) {
            w(c) = (include_positive || c != j) ? std::exp(logits(i, c) - mx) : 0.0;
            z += w(c);
        }
        total += -logits(i, j) + mx + std::log(z);
        if (!d_queries && !d_prototypes) continue;
        // d/dlogit: softmax over the normalizer set, minus one at the positive.
        w /= z;
        w(j) -= 1.0;
        for (Eigen::Index c = 0; c < k; ++c) {
            const double g = w(c) * inv_tau(c);
            if (g == 0.0) continue;
            if (d_queries) d_queries->row(i) += g * prototypes.row(c);
            if (d_prototypes) d_prototypes->row(c) += g * queries.row(i);
        }
    }
    return total;
}

namespace {

void check_pairs(const VectorXd& preds, const VectorXd& targets) {
    if (preds.size() != targets.size()) throw ParameterError("prediction and target lengths differ");
    if (preds.size() < 2) throw ParameterError("ranking loss needs at least two samples");
}

double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

}  // namespace

double finetune_loss(const VectorXd& preds, const VectorXd& targets, VectorXd* d_preds) {
    check_pairs(preds, targets);
    const auto n = preds.size();
    if (d_preds) *d_preds = VectorXd::Zero(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dy = targets(i) - targets(j);
            if (dy == 0.0) continue;
            const double dp = preds(i) - preds(j);
            if (sgn(dp) == sgn(dy)) continue;
            total += std::abs(dp);
            if (d_preds) {
                const double s = sgn(dp);
                (*d_preds)(i) += s;
                (*d_preds)(j) -= s;
            }
        }
    }
    return total;
}

std::vector<double> finetune_loss_terms(const VectorXd& preds, const VectorXd& targets) {
    check_pairs(preds, targets);
    const auto n = preds.size();
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dy = targets(i) - targets(j);
            const double dp = preds(i) - preds(j);
            terms.push_back(dy != 0.0 && sgn(dp) != sgn(dy) ? std::abs(dp) : 0.0);
        }
    }
    return terms;
}

double mse_loss(const VectorXd& preds, const VectorXd& targets, VectorXd* d_preds) {
    if (preds.size() != targets.size() || preds.size() < 1)
        throw ParameterError("mse_loss needs equal, non-empty inputs");
    const VectorXd r = preds - targets;
    const double n = static_cast<double>(preds.size());
    if (d_preds) *d_preds = (2.0 / n) * r;
    return r.squaredNorm() / n;
}

Adam::Adam(const PredictorModel& model, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : model.params()) {
        m_.emplace_back(ad::Mat::Zero(p.rows(), p.cols()));
        v_.emplace_back(ad::Mat::Zero(p.rows(), p.cols()));
    }
}

void Adam::step(PredictorModel& model, const ad::Grads& grads, int first, int last) {
    if (grads.size() != model.num_params()) throw StructuralError("gradient bundle does not match the model");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (int s = first; s < last; ++s) {
        const auto su = static_cast<std::size_t>(s);
        const ad::Mat& g = grads[su];
        if (g.size() == 0) continue;
        m_[su] = b1_ * m_[su] + (1.0 - b1_) * g;
        v_[su] = b2_ * v_[su] + (1.0 - b2_) * g.cwiseProduct(g);
        auto& p = model.param(s);
        p.array() -= lr_ * (m_[su].array() / c1) / ((v_[su].array() / c2).sqrt() + eps_);
    }
}

void TrainLog::write_jsonl(std::ostream& out) const {
    for (const auto& r : records) {
        io::ojson j;
        j["stage"] = r.stage;
        j["epoch"] = r.epoch;
        j["step"] = r.step;
        j["loss"] = r.loss;
        j["seed"] = r.seed;
        j["wall_ms"] = r.wall_ms;
        out << j.dump() << '\n';
    }
}

std::vector<double> TrainLog::losses(const std::string& stage) const {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.stage == stage) out.push_back(r.loss);
    return out;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double pretrain_batch_loss(const PredictorModel& model, const EncodingContext& ctx,
                           const std::vector<Architecture>& batch, const PretrainConfig& cfg, std::uint64_t cluster_seed,
                           ad::Grads* grads) {
    const int n = static_cast<int>(batch.size());
    std::vector<HardEncoding> hard;
    std::vector<EncodedArch> enc;
    hard.reserve(batch.size());
    enc.reserve(batch.size());
    for (const auto& a : batch) {
        hard.push_back(encode_architecture(a, ctx.space, ctx.table));
        enc.push_back(prepare(a, ctx.space, ctx.table));
    }
    const auto dist = distance_matrix(hard);
    const auto fp = forward(model, enc);
    const MatrixXd& soft = fp.soft_encoding();

    MatrixXd adjoint = MatrixXd::Zero(soft.rows(), soft.cols());
    double total = 0.0;
    for (int k : cfg.cluster_sizes) {
        const auto cl = k_medoids(dist, n, k, derive_seed(cluster_seed, {static_cast<std::uint64_t>(k)}));
        std::vector<double> taus(static_cast<std::size_t>(k));
        std::vector<long> sums(static_cast<std::size_t>(k), 0);
        std::vector<int> sizes(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(cl.assignment[static_cast<std::size_t>(i)]);
            sums[c] += dist[static_cast<std::size_t>(i * n + cl.medoid_indices[c])];
            ++sizes[c];
        }
        for (std::size_t c = 0; c < taus.size(); ++c) {
            const double gs = sizes[c];
            taus[c] = std::max(kTauFloor, static_cast<double>(sums[c]) / (gs * std::log(gs + cfg.beta)));
        }
        MatrixXd protos(k, soft.cols());
        for (int c = 0; c < k; ++c) protos.row(c) = soft.row(cl.medoid_indices[static_cast<std::size_t>(c)]);
        MatrixXd dq, dp;
        total += pretrain_loss(soft, protos, cl.assignment, taus, cfg.include_positive_in_denominator,
                               grads ? &dq : nullptr, grads ? &dp : nullptr);
        if (grads) {
            adjoint += dq;
            for (int c = 0; c < k; ++c) adjoint.row(cl.medoid_indices[static_cast<std::size_t>(c)]) += dp.row(c);
        }
    }
    const double nk = static_cast<double>(cfg.cluster_sizes.size());
    if (grads) fp.backward_soft(adjoint / nk, *grads);
    return total / nk;
}

void pretrain(PredictorModel& model, const EncodingContext& ctx, const PretrainConfig& cfg, TrainLog* log) {
    check_config(cfg);
    Adam opt(model, cfg.learning_rate);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        Rng rng = make_rng(derive_seed(cfg.seed, {0xBA7C, static_cast<std::uint64_t>(epoch)}));
        std::vector<Architecture> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch_size));
        try {
            for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(random_architecture(ctx.space, rng));
        } catch (const SamplingExhausted& e) {
            throw SamplingExhausted("pretrain epoch " + std::to_string(epoch) + ": " + e.what());
        }
        auto grads = model.zero_grads();
        double loss = 0.0;
        try {
            loss = pretrain_batch_loss(model, ctx, batch, cfg,
                                       derive_seed(cfg.seed, {0xC1u, static_cast<std::uint64_t>(epoch)}), &grads);
        } catch (const ParameterError& e) {
            throw ParameterError("pretrain epoch " + std::to_string(epoch) + ": " + e.what());
        }
        opt.step(model, grads, 0, model.encoder_end());
        if (log) log->records.push_back({"pretrain", epoch, opt.steps(), loss, cfg.seed, elapsed_ms(start)});
    }
}

void finetune(PredictorModel& model, const EncodingContext& ctx, const std::vector<LabeledSample>& labeled,
              const FinetuneConfig& cfg, TrainLog* log) {
    check_config(cfg);
    if (labeled.size() < 2) throw ParameterError("finetune needs at least two labeled samples");
    std::vector<EncodedArch> enc;
    enc.reserve(labeled.size());
    for (const auto& s : labeled) enc.push_back(prepare(s.arch, ctx.space, ctx.table));

    Adam opt(model, cfg.learning_rate);
    std::vector<std::size_t> order(labeled.size());
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = make_rng(derive_seed(cfg.seed, {0xF17E, static_cast<std::uint64_t>(epoch)}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        for (std::size_t s = 0; s < order.size();) {
            const auto start = std::chrono::steady_clock::now();
            std::size_t e = std::min(order.size(), s + bs);
            // A trailing singleton has no pairs; fold it into this batch.
            if (order.size() - e == 1) e = order.size();
            std::vector<EncodedArch> part;
            VectorXd y(static_cast<Eigen::Index>(e - s));
            for (std::size_t i = s; i < e; ++i) {
                part.push_back(enc[order[i]]);
                y(static_cast<Eigen::Index>(i - s)) = labeled[order[i]].val_acc;
            }
            const auto fp = forward(model, part);
            const VectorXd pred = fp.scores().col(0);
            VectorXd dpred;
            const double loss = cfg.objective == FinetuneObjective::pairwise ? finetune_loss(pred, y, &dpred)
                                                                             : mse_loss(pred, y, &dpred);
            auto grads = model.zero_grads();
            fp.backward_scores(dpred, grads);
            opt.step(model, grads);
            if (log) log->records.push_back({"finetune", epoch, opt.steps(), loss, cfg.seed, elapsed_ms(start)});
            s = e;
        }
    }
}

}  // namespace dclnas
