#include <gtest/gtest.h>

#include <cmath>

#include "dclnas/cluster.hpp"
#include "dclnas/error.hpp"
#include "dclnas/losses.hpp"
#include "reference.hpp"

using namespace dclnas;

namespace {

Eigen::MatrixXd random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
    return m;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ModelDims small_dims(const SearchSpace& s, const PathTable& t) {
    auto d = default_dims(s, t);
    d.gin_dim = 4;
    d.d = 4;
    d.d_fm = 4;
    d.head_hidden = 4;
    d.d_e = 8;
    d.heads = 2;
    d.ff_mult = 2;
    return d;
}

}  // namespace

TEST(Losses, RankingWorkedPair) {
    Eigen::VectorXd y(2), p(2);
    y << 0.90, 0.91;
    p << 0.91, 0.90;
    const double l = finetune_loss(p, y);
    // Two ordered pairs, each |0.91 - 0.90|, evaluated in double precision.
    EXPECT_EQ(l, 2.0 * std::abs(0.91 - 0.90));
    EXPECT_NEAR(l, 0.02, 1e-15);
    EXPECT_EQ(finetune_loss(y, y), 0.0);
    Eigen::VectorXd q(2);
    q << 0.1, 0.7;
    EXPECT_EQ(finetune_loss(q, y), 0.0);
}

TEST(Losses, RankingMatchesDirectTranscription) {
    Rng rng = make_rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + uniform_index(rng, 30));
        Eigen::VectorXd p(n), y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = uniform01(rng);
            // Coarse targets so ties occur.
            y(i) = std::round(uniform01(rng) * 10.0) / 10.0;
        }
        EXPECT_NEAR(finetune_loss(p, y), ref::pairwise_loss(to_std(p), to_std(y)), 1e-12);
    }
}

TEST(Losses, RankingTermsSumToLoss) {
    Eigen::VectorXd p = Eigen::VectorXd::Random(8), y = Eigen::VectorXd::Random(8);
    const auto terms = finetune_loss_terms(p, y);
    EXPECT_EQ(terms.size(), 56u);
    double s = 0.0;
    for (double t : terms) s += t;
    EXPECT_NEAR(s, finetune_loss(p, y), 1e-12);
}

TEST(Losses, RankingGradientMatchesDifferences) {
    Rng rng = make_rng(3);
    Eigen::VectorXd p(10), y(10);
    for (int i = 0; i < 10; ++i) p(i) = uniform01(rng), y(i) = uniform01(rng);
    Eigen::VectorXd g;
    finetune_loss(p, y, &g);
    for (int i = 0; i < 10; ++i) {
        Eigen::VectorXd up = p, down = p;
        up(i) += 1e-7;
        down(i) -= 1e-7;
        EXPECT_NEAR(g(i), (finetune_loss(up, y) - finetune_loss(down, y)) / 2e-7, 1e-6);
    }
}

TEST(Losses, RankingArgumentErrors) {
    EXPECT_THROW(finetune_loss(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)), ParameterError);
    EXPECT_THROW(finetune_loss(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2)), ParameterError);
}

TEST(Losses, ContrastiveMatchesDirectTranscription) {
    Rng rng = make_rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto k = static_cast<Eigen::Index>(2 + uniform_index(rng, 8));
        const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 20));
        const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
        const auto q = random_mat(rng, n, d, 0.5);
        const auto p = random_mat(rng, k, d, 0.5);
        std::vector<int> assign;
        for (Eigen::Index i = 0; i < n; ++i) assign.push_back(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k))));
        std::vector<double> taus;
        for (Eigen::Index c = 0; c < k; ++c) taus.push_back(0.5 + 2.0 * uniform01(rng));
        const double want = ref::contrastive_loss(q, p, assign, taus);
        EXPECT_NEAR(pretrain_loss(q, p, assign, taus), want, 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST(Losses, ContrastiveIncludePositiveVariant) {
    Rng rng = make_rng(5);
    const auto q = random_mat(rng, 5, 3);
    const auto p = random_mat(rng, 3, 3);
    const std::vector<int> assign{0, 1, 2, 1, 0};
    const std::vector<double> taus{1.0, 0.7, 1.3};
    double want = 0.0;
    for (int i = 0; i < 5; ++i) {
        double den = 0.0;
        for (int c = 0; c < 3; ++c) den += std::exp(q.row(i).dot(p.row(c)) / taus[static_cast<std::size_t>(c)]);
        const int j = assign[static_cast<std::size_t>(i)];
        want -= std::log(std::exp(q.row(i).dot(p.row(j)) / taus[static_cast<std::size_t>(j)]) / den);
    }
    EXPECT_NEAR(pretrain_loss(q, p, assign, taus, true), want, 1e-12);
    EXPECT_GT(pretrain_loss(q, p, assign, taus, true), 0.0);
}

TEST(Losses, ContrastiveStableForLargeLogits) {
    Rng rng = make_rng(6);
    const auto q = random_mat(rng, 4, 3, 40.0);
    const auto p = random_mat(rng, 3, 3, 40.0);
    const double l = pretrain_loss(q, p, {0, 1, 2, 0}, {kTauFloor, kTauFloor, kTauFloor});
    EXPECT_TRUE(std::isfinite(l));
}

TEST(Losses, ContrastiveGradientsMatchDifferences) {
    Rng rng = make_rng(7);
    const auto q = random_mat(rng, 6, 4);
    const auto p = random_mat(rng, 3, 4);
    const std::vector<int> a{0, 2, 1, 1, 0, 2};
    const std::vector<double> t{0.8, 1.1, 1.7};
    Eigen::MatrixXd dq, dp;
    pretrain_loss(q, p, a, t, false, &dq, &dp);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        auto up = q, down = q;
        up.data()[i] += 1e-6;
        down.data()[i] -= 1e-6;
        EXPECT_NEAR(dq.data()[i], (pretrain_loss(up, p, a, t) - pretrain_loss(down, p, a, t)) / 2e-6, 1e-6);
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        auto up = p, down = p;
        up.data()[i] += 1e-6;
        down.data()[i] -= 1e-6;
        EXPECT_NEAR(dp.data()[i], (pretrain_loss(q, up, a, t) - pretrain_loss(q, down, a, t)) / 2e-6, 1e-6);
    }
}

TEST(Losses, ContrastiveArgumentErrors) {
    const Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, 2);
    EXPECT_THROW(pretrain_loss(q, Eigen::MatrixXd::Zero(1, 2), {0, 0}, {1.0}), ParameterError);
    EXPECT_THROW(pretrain_loss(q, Eigen::MatrixXd::Zero(2, 2), {0, 5}, {1.0, 1.0}), ParameterError);
    EXPECT_THROW(pretrain_loss(q, Eigen::MatrixXd::Zero(2, 3), {0, 1}, {1.0, 1.0}), StructuralError);
}

TEST(Losses, MseAndGradient) {
    Eigen::VectorXd p(3), y(3), g;
    p << 0.2, 0.5, 0.9;
    y << 0.1, 0.5, 1.0;
    const double l = mse_loss(p, y, &g);
    EXPECT_NEAR(l, (0.01 + 0.0 + 0.01) / 3.0, 1e-15);
    EXPECT_NEAR(g(0), 2.0 * 0.1 / 3.0, 1e-15);
}

TEST(Losses, ConfigChecksListEveryProblem) {
    PretrainConfig pc;
    pc.batch_size = 1;
    pc.epochs = 0;
    pc.beta = 0.0;
    try {
        check_config(pc);
        FAIL();
    } catch (const ConfigError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("batch_size"), std::string::npos);
        EXPECT_NE(m.find("epochs"), std::string::npos);
        EXPECT_NE(m.find("beta"), std::string::npos);
    }
    FinetuneConfig fc;
    fc.epochs = 0;
    EXPECT_THROW(check_config(fc), ConfigError);
}

TEST(Losses, AdamOnlyTouchesRequestedSlots) {
    const auto s = ref::tiny_space(4);
    const auto t = PathTable::build(s);
    PredictorModel m(small_dims(s, t), 1);
    const auto before = m;
    auto g = m.zero_grads();
    for (auto& x : g) x.setOnes();
    Adam opt(m, 0.01);
    opt.step(m, g, 0, m.encoder_end());
    EXPECT_EQ(opt.steps(), 1);
    for (int sl = 0; sl < static_cast<int>(m.num_params()); ++sl) {
        if (m.is_head(sl)) {
            EXPECT_EQ(m.param(sl), before.param(sl));
        } else {
            // The first Adam step moves every coordinate by lr.
            EXPECT_NEAR((m.param(sl) - before.param(sl)).cwiseAbs().maxCoeff(), 0.01, 1e-9);
        }
    }
}

TEST(Losses, FullModelGradientsMatchDifferences) {
    const auto s = ref::tiny_space(4);
    const auto t = PathTable::build(s);
    const EncodingContext ctx{s, t};
    PredictorModel model(small_dims(s, t), 11);
    Rng rng = make_rng(12);
    std::vector<Architecture> batch;
    for (int i = 0; i < 12; ++i) batch.push_back(random_architecture(s, rng));

    PretrainConfig pc;
    pc.cluster_sizes = {2, 3};
    auto g = model.zero_grads();
    pretrain_batch_loss(model, ctx, batch, pc, 5, &g);
    const auto num = ref::finite_difference(
        model, [&](const PredictorModel& m) { return pretrain_batch_loss(m, ctx, batch, pc, 5); }, 1e-5);
    std::string worst;
    EXPECT_LE(ref::max_relative_error(g, num, 1e-6, &worst, &model.names()), 1e-4) << worst;

    std::vector<EncodedArch> enc;
    Eigen::VectorXd y(12);
    for (int i = 0; i < 12; ++i) {
        enc.push_back(prepare(batch[static_cast<std::size_t>(i)], s, t));
        y(i) = uniform01(rng);
    }
    auto ft = [&](const PredictorModel& m) { return finetune_loss(forward(m, enc).scores().col(0), y); };
    const auto fp = forward(model, enc);
    Eigen::VectorXd dp;
    finetune_loss(fp.scores().col(0), y, &dp);
    auto g2 = model.zero_grads();
    fp.backward_scores(dp, g2);
    const auto num2 = ref::finite_difference(model, ft, 1e-5);
    EXPECT_LE(ref::max_relative_error(g2, num2, 1e-6, &worst, &model.names()), 1e-4) << worst;
    for (std::size_t sl = 0; sl < g2.size(); ++sl) EXPECT_GT(g2[sl].cwiseAbs().maxCoeff() + g[sl].cwiseAbs().maxCoeff(), 0.0)
        << model.names()[sl];
}

TEST(Losses, PretrainReducesLossAndLogs) {
    const auto s = nasbench201_space();
    const auto t = PathTable::build(s);
    const EncodingContext ctx{s, t};
    auto d = default_dims(s, t);
    d.d_e = 16;
    PredictorModel m(d, 3);
    const auto frozen_head = m.param("head.score.w");
    PretrainConfig pc;
    pc.batch_size = 64;
    pc.epochs = 30;
    pc.cluster_sizes = {4, 6};
    pc.learning_rate = 3e-3;
    TrainLog log;
    pretrain(m, ctx, pc, &log);
    const auto losses = log.losses("pretrain");
    ASSERT_EQ(losses.size(), 30u);
    double first = 0, last = 0;
    for (int i = 0; i < 5; ++i) first += losses[static_cast<std::size_t>(i)], last += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
    EXPECT_LT(last, first);
    EXPECT_EQ(m.param("head.score.w"), frozen_head);
}

TEST(Losses, FinetuneImprovesRanking) {
    const auto s = nasbench201_space();
    const auto t = PathTable::build(s);
    const EncodingContext ctx{s, t};
    auto d = default_dims(s, t);
    d.d_e = 16;
    PredictorModel m(d, 4);
    const SyntheticLandscape land(s, 0);
    Rng rng = make_rng(5);
    std::vector<LabeledSample> train;
    for (int i = 0; i < 60; ++i) train.push_back(land.evaluate(random_architecture(s, rng)));
    std::vector<EncodedArch> enc;
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
        enc.push_back(prepare(train[static_cast<std::size_t>(i)].arch, s, t));
        y(i) = train[static_cast<std::size_t>(i)].val_acc;
    }
    const double before = finetune_loss(score_batch(m, enc), y);
    FinetuneConfig fc;
    fc.epochs = 40;
    fc.batch_size = 32;
    fc.learning_rate = 3e-3;
    fc.seed = 1;
    TrainLog log;
    finetune(m, ctx, train, fc, &log);
    EXPECT_LT(finetune_loss(score_batch(m, enc), y), before);
    EXPECT_FALSE(log.losses("finetune").empty());
    EXPECT_THROW(finetune(m, ctx, {train[0]}, fc), ParameterError);
}
