#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gradient_audit.hpp"
#include "megae/errors.hpp"
#include "megae/model.hpp"
#include "megae/rng.hpp"
#include "test_support.hpp"

using namespace megae;

namespace {

struct Fixture {
    Graph graph;
    Laplacian lap;
    FilterBank bank;
    Matrix x;
};

Fixture make_fixture(int n, int d, int m, unsigned seed) {
    Fixture f;
    f.graph = testkit::erdos_renyi(n, 0.3, seed);
    f.lap = normalized_laplacian(f.graph);
    FilterBankOptions opts;
    opts.order = 12;
    opts.grid = 400;
    f.bank = build_filter_bank(build_frame(FrameSpec::with_channels(m)), opts);
    f.x = testkit::gaussian(n, d, seed + 1).cwiseAbs();
    return f;
}

double lrelu(double v, double s) { return v > 0.0 ? v : s * v; }

Matrix act(const Matrix& p, double s) { return p.unaryExpr([s](double v) { return lrelu(v, s); }); }

// Straight-line forward pass using dense filter matrices.
Matrix dense_filter(const PolyFilter& pf, const Laplacian& l) {
    const int n = l.dimension();
    const Matrix shifted = l.dense() - pf.center * Matrix::Identity(n, n);
    Matrix power = Matrix::Identity(n, n);
    Matrix out = Matrix::Zero(n, n);
    for (double c : pf.coefficients) {
        out += c * power;
        power = power * shifted;
    }
    return out;
}

}  // namespace

TEST(ModelParams, ShapesInitAndValidation) {
    const ModelShape s{4, 3, 5, 6, 7};
    const ModelParams p = ModelParams::initialize(s, 9);
    EXPECT_EQ(p.shape(), s);
    EXPECT_EQ(p.parameter_count(), static_cast<std::size_t>(4 * (3 * 5 + 5 * 6 + 6 * 7) + 4 * 7 * 3));
    const double limit = std::sqrt(6.0 / (3 + 5));
    EXPECT_LE(p.w0[0].cwiseAbs().maxCoeff(), limit);
    EXPECT_GT(p.w0[0].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(ModelParams::initialize(s, 9).w3, p.w3);
    EXPECT_NE(ModelParams::initialize(s, 10).w3, p.w3);
    ModelParams broken = p;
    broken.w1[2].resize(4, 6);
    EXPECT_THROW(broken.validate(), ConfigError);
}

TEST(Encode, ZeroInputGivesZeroLatents) {
    const Fixture f = make_fixture(10, 3, 4, 1);
    const ModelParams p = ModelParams::initialize({4, 3, 5, 5, 5}, 2);
    for (const auto& z : encode(p, f.lap, f.bank, Matrix::Zero(10, 3))) EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
    const std::vector<Matrix> zeros(4, Matrix::Zero(10, 5));
    EXPECT_EQ(decode(p, f.lap, f.bank, zeros).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encode, IdentityWeightsAllPassKernelPassThrough) {
    const Fixture f = make_fixture(8, 3, 3, 3);
    FilterBank bank;
    bank.analysis = {PolyFilter{1, 0.0, {1.0}, 0.0}};
    bank.synthesis = {PolyFilter{1, 0.0, {1.0}, 0.0}};
    ModelParams p = ModelParams::zeros({1, 3, 3, 3, 3});
    p.w0[0] = p.w1[0] = p.w2[0] = Matrix::Identity(3, 3);
    p.w3 = Matrix::Identity(3, 3);
    const auto z2 = encode(p, f.lap, bank, f.x);
    EXPECT_LT((z2[0] - f.x).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((decode(p, f.lap, bank, z2) - z2[0]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, MatchesStraightLineReimplementation) {
    const Fixture f = make_fixture(14, 3, 5, 4);
    const ModelParams p = ModelParams::initialize({5, 3, 4, 6, 5}, 5);
    const Matrix r = generate_mask(14, 3, Mechanism::MCAR, 0.3, 6);
    const Matrix z0 = (f.x.array() * r.array()).matrix();
    Matrix agg(14, 5 * 5);
    std::vector<Matrix> z2_ref;
    for (int m = 0; m < 5; ++m) {
        const auto um = static_cast<std::size_t>(m);
        const Matrix z1 = act(dense_filter(f.bank.analysis[um], f.lap) * z0 * p.w0[um], 0.2);
        const Matrix z2 = act(z1 * p.w1[um], 0.2);
        z2_ref.push_back(z2);
        agg.middleCols(5 * m, 5) = act(dense_filter(f.bank.synthesis[um], f.lap) * z2 * p.w2[um], 0.2);
    }
    const Matrix x_ref = act(agg * p.w3, 0.2);
    const auto z2 = encode(p, f.lap, f.bank, z0);
    for (int m = 0; m < 5; ++m) EXPECT_LT((z2[static_cast<std::size_t>(m)] - z2_ref[static_cast<std::size_t>(m)]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((decode(p, f.lap, f.bank, z2) - x_ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((forward(p, f.lap, f.bank, z0).x_tilde - x_ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Losses, ReconstructionExamples) {
    const Matrix x = Matrix::Constant(3, 2, 1.0);
    EXPECT_EQ(reconstruction_loss(x, x, Matrix::Zero(3, 2)), 0.0);
    EXPECT_EQ(reconstruction_loss(x * 5.0, x, Matrix::Ones(3, 2)), 0.0);
    Matrix xt = x;
    xt(1, 1) = 4.0;
    Matrix r = Matrix::Ones(3, 2);
    r(1, 1) = 0.0;
    EXPECT_DOUBLE_EQ(reconstruction_loss(xt, x, r), 3.0);
    EXPECT_DOUBLE_EQ(masked_reconstruction_loss(xt, x, (1.0 - r.array()).matrix(), ReconstructionLossKind::Squared), 9.0);
}

TEST(Losses, EntropyExamplesAndBruteForce) {
    std::vector<Matrix> equal(4, Matrix::Constant(5, 3, 0.5));
    EXPECT_NEAR(entropy_loss(equal), std::log(4.0), 1e-15);
    std::vector<Matrix> one(3, Matrix::Zero(5, 2));
    one[1].setConstant(2.0);
    EXPECT_EQ(entropy_loss(one), 0.0);
    std::vector<Matrix> dead(2, Matrix::Zero(4, 2));
    dead[0].col(0).setConstant(1.0);
    dead[1].col(0).setConstant(1.0);
    EXPECT_NEAR(entropy_loss(dead), std::log(2.0) / 2.0, 1e-15);  // zero-energy column contributes 0

    std::vector<Matrix> z;
    for (unsigned m = 0; m < 6; ++m) z.push_back(testkit::gaussian(7, 4, 200 + m));
    double h = 0.0;
    for (int d = 0; d < 4; ++d) {
        double total = 0.0;
        for (const auto& zm : z) total += zm.col(d).squaredNorm();
        for (const auto& zm : z) {
            const double pm = zm.col(d).squaredNorm() / total;
            h -= pm * std::log(pm);
        }
    }
    EXPECT_NEAR(entropy_loss(z), h / 4.0, 1e-14);
    const Matrix p = channel_energies(z);
    for (int d = 0; d < 4; ++d) EXPECT_NEAR(p.col(d).sum(), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(total_loss(1.0, std::log(2.0), 1.0), 1.0 - std::log(2.0));
    EXPECT_DOUBLE_EQ(total_loss(0.75, 0.4, 0.0), 0.75);
    EXPECT_DOUBLE_EQ(total_loss(0.75, 0.4, 10.0), 0.75 - 4.0);
}

class GradientAudit : public ::testing::TestWithParam<std::tuple<double, ReconstructionLossKind>> {};

TEST_P(GradientAudit, FiniteDifferencesAgree) {
    const auto [gamma, kind] = GetParam();
    const Fixture f = make_fixture(12, 3, 4, 7);
    const ModelParams p = ModelParams::initialize({4, 3, 5, 5, 4}, 8);
    const Matrix r = generate_mask(12, 3, Mechanism::MCAR, 0.3, 9);
    const GraphBatch batch{&f.lap, f.x, r, (1.0 - r.array()).matrix()};
    const auto res = testkit::gradient_audit(p, f.bank, batch, gamma, kind, 10, 10);
    ASSERT_GT(res.probed, 0);
    for (int n : res.per_tensor_probed) EXPECT_GT(n, 0);
    EXPECT_EQ(res.agreed, res.probed) << "worst relative error " << res.worst;
}

INSTANTIATE_TEST_SUITE_P(Losses, GradientAudit,
                         ::testing::Values(std::make_tuple(0.0, ReconstructionLossKind::Norm),
                                           std::make_tuple(1.0, ReconstructionLossKind::Norm),
                                           std::make_tuple(10.0, ReconstructionLossKind::Squared)));

TEST(Gradients, ZeroInputGivesZeroHeadGradient) {
    const Fixture f = make_fixture(10, 2, 3, 11);
    const ModelParams p = ModelParams::initialize({3, 2, 4, 4, 4}, 12);
    const GraphBatch batch{&f.lap, f.x, Matrix::Zero(10, 2), Matrix::Ones(10, 2)};
    const ModelParams g = gradients(p, f.bank, batch, 1.0);
    EXPECT_EQ(g.w3.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, GammaZeroIsPureReconstruction) {
    const Fixture f = make_fixture(10, 2, 3, 13);
    const ModelParams p = ModelParams::initialize({3, 2, 4, 4, 4}, 14);
    const Matrix r = generate_mask(10, 2, Mechanism::MCAR, 0.4, 15);
    const GraphBatch batch{&f.lap, f.x, r, (1.0 - r.array()).matrix()};
    LossBreakdown lb;
    const ModelParams g0 = gradients(p, f.bank, batch, 0.0, ReconstructionLossKind::Norm, &lb);
    EXPECT_DOUBLE_EQ(lb.total, lb.reconstruction);
    const ModelParams g1 = gradients(p, f.bank, batch, 1.0);
    // The head only sees the reconstruction term.
    EXPECT_LT((g0.w3 - g1.w3).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GT((g0.w0[0] - g1.w0[0]).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Impute, PassesObservedEntriesThrough) {
    const Fixture f = make_fixture(12, 3, 3, 16);
    const ModelParams p = ModelParams::initialize({3, 3, 4, 4, 4}, 17);
    EXPECT_EQ(impute(p, f.lap, f.bank, f.x, Matrix::Ones(12, 3)), f.x);
    const Matrix none = Matrix::Zero(12, 3);
    EXPECT_LT((impute(p, f.lap, f.bank, f.x, none) - forward(p, f.lap, f.bank, Matrix::Zero(12, 3)).x_tilde).cwiseAbs().maxCoeff(), 1e-15);
    const Matrix r = generate_mask(12, 3, Mechanism::MCAR, 0.3, 18);
    const Matrix out = impute(p, f.lap, f.bank, f.x, r);
    const Matrix xt = forward(p, f.lap, f.bank, (f.x.array() * r.array()).matrix()).x_tilde;
    for (int i = 0; i < 12; ++i) {
        for (int c = 0; c < 3; ++c) {
            if (r(i, c) == 1.0) EXPECT_EQ(out(i, c), f.x(i, c));
        }
    }
    // Hidden-entry RMSE equals L_R / sqrt(#hidden).
    const double hidden = (1.0 - r.array()).sum();
    const double err = std::sqrt(((out - f.x).array().square() * (1.0 - r.array())).sum() / hidden);
    EXPECT_NEAR(err, reconstruction_loss(xt, f.x, r) / std::sqrt(hidden), 1e-14);
}

namespace {

std::vector<TrainingGraph> toy_graphs(int count, unsigned seed) {
    std::vector<TrainingGraph> out;
    for (int i = 0; i < count; ++i) {
        const Graph g = testkit::erdos_renyi(12 + i, 0.3, seed + static_cast<unsigned>(i));
        const Matrix x = testkit::gaussian(12 + i, 3, seed + 100 + static_cast<unsigned>(i)).cwiseAbs() * 0.3;
        out.push_back({normalized_laplacian(g), x, Matrix::Ones(12 + i, 3)});
    }
    return out;
}

TrainConfig toy_config() {
    TrainConfig c;
    c.channels = 4;
    c.order = 12;
    c.h1 = c.h2 = c.h3 = 6;
    c.epochs = 6;
    c.learning_rate = 5e-3;
    c.train_mask_rate = 0.3;
    return c;
}

FilterBank toy_bank() {
    FilterBankOptions o;
    o.order = 12;
    o.grid = 400;
    return build_filter_bank(build_frame(FrameSpec::with_channels(4)), o);
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialization) {
    TrainConfig c = toy_config();
    c.epochs = 0;
    const auto graphs = toy_graphs(3, 300);
    const auto res = train(graphs, {}, toy_bank(), c);
    const ModelParams init = ModelParams::initialize({4, 3, 6, 6, 6}, Rng::derive(c.seed, 1));
    EXPECT_EQ(res.params.w3, init.w3);
    EXPECT_EQ(res.params.w0[2], init.w0[2]);
    EXPECT_TRUE(res.trace.empty());
    EXPECT_EQ(res.best_epoch, 0);
}

TEST(Train, DeterministicAndDecreasing) {
    const auto graphs = toy_graphs(4, 310);
    const FilterBank bank = toy_bank();
    std::vector<EvalGraph> val;
    const Graph vg = testkit::erdos_renyi(15, 0.3, 320);
    val.push_back({normalized_laplacian(vg), testkit::gaussian(15, 3, 321).cwiseAbs() * 0.3,
                   generate_mask(15, 3, Mechanism::MCAR, 0.3, 322), Matrix()});
    TrainConfig c = toy_config();
    c.epochs = 15;
    const auto a = train(graphs, val, bank, c);
    const auto b = train(graphs, val, bank, c);
    ASSERT_EQ(a.trace.size(), 15u);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(nlohmann::json(a.trace[i]).dump(), nlohmann::json(b.trace[i]).dump());
    }
    EXPECT_EQ(a.params.w3, b.params.w3);
    EXPECT_LT(a.trace.back().reconstruction, a.trace.front().reconstruction);
    EXPECT_GT(a.trace.back().probe_spectral_entropy, 0.0);
    EXPECT_FALSE(a.diverged);
}

TEST(Train, EntropyRegularizationRaisesLatentEntropy) {
    const auto graphs = toy_graphs(4, 330);
    const FilterBank bank = toy_bank();
    TrainConfig c = toy_config();
    c.epochs = 10;
    c.gamma_entropy = 1.0;
    const auto with = train(graphs, {}, bank, c);
    c.gamma_entropy = 0.0;
    const auto without = train(graphs, {}, bank, c);
    double hw = 0.0, h0 = 0.0;
    for (const auto& r : with.trace) hw += r.entropy;
    for (const auto& r : without.trace) h0 += r.entropy;
    EXPECT_GE(hw, h0);
    for (const auto& r : with.trace) {
        EXPECT_GE(r.entropy, 0.0);
        EXPECT_LE(r.entropy, std::log(4.0) + 1e-12);
    }
}

TEST(Train, DivergenceIsReportedNotThrown) {
    const auto graphs = toy_graphs(2, 340);
    TrainConfig c = toy_config();
    c.optimizer = OptimizerKind::GradientDescent;
    c.learning_rate = 1e200;
    const auto res = train(graphs, {}, toy_bank(), c);
    EXPECT_TRUE(res.diverged);
    EXPECT_FALSE(res.diagnostics.empty());
    EXPECT_TRUE(res.params.all_finite());
}

TEST(TrainConfig, ValidationAndJson) {
    TrainConfig c;
    c.gamma_entropy = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.gamma_entropy = 2.5;
    c.optimizer = OptimizerKind::GradientDescent;
    c.inverse_policy = InverseKernelPolicy::Regularized;
    const nlohmann::json j = c;
    const auto back = j.get<TrainConfig>();
    EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
    EXPECT_THROW(parse_optimizer("lbfgs"), ConfigError);
}
