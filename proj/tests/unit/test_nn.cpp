#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nbeatstar/nn/adam.hpp"
#include "nbeatstar/nn/grad_check.hpp"
#include "nbeatstar/nn/ops.hpp"
#include "nbeatstar/nn/tape.hpp"

using namespace nbeatstar;
using namespace nbeatstar::nn;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

/// Sum of all entries as a 1x1 node.
Var sum_all(Tape& t, Var a) {
    Matrix v(1, 1);
    v(0, 0) = t.value(a).sum();
    return t.push(std::move(v), t.needs_grad(a), [a](Tape& tp, const Matrix& g) {
        tp.accumulate(a, Matrix::Constant(tp.value(a).rows(), tp.value(a).cols(), g(0, 0)));
    });
}

/// Sum of squares as a 1x1 node.
Var sum_squares(Tape& t, Var a) {
    Matrix v(1, 1);
    v(0, 0) = t.value(a).squaredNorm();
    return t.push(std::move(v), t.needs_grad(a), [a](Tape& tp, const Matrix& g) {
        tp.accumulate(a, Matrix(2.0 * g(0, 0) * tp.value(a)));
    });
}

}  // namespace

TEST(Dense, IdentityAndHandProduct) {
    Tape t(Tape::Mode::Inference);
    auto out = dense(t, t.constant(mat({{3, -1}})), t.constant(Matrix::Identity(2, 2)), t.constant(Matrix::Zero(1, 2)));
    EXPECT_EQ(t.value(out), mat({{3, -1}}));
    auto out2 = dense(t, t.constant(mat({{2, 3}})), t.constant(mat({{1, 1}})), t.constant(mat({{1}})));
    EXPECT_EQ(t.value(out2), mat({{6}}));
}

TEST(Dense, BatchRowsMatchSingleInputs) {
    std::mt19937_64 rng(1);
    Matrix W = random_matrix(5, 3, rng), b = random_matrix(1, 5, rng), X = random_matrix(4, 3, rng);
    Tape t(Tape::Mode::Inference);
    auto batch = t.value(dense(t, t.constant(X), t.constant(W), t.constant(b)));
    for (Eigen::Index r = 0; r < 4; ++r) {
        Tape s(Tape::Mode::Inference);
        Matrix row = X.row(r);
        auto single = s.value(dense(s, s.constant(row), s.constant(W), s.constant(b)));
        EXPECT_EQ(Matrix(batch.row(r)), single);
    }
}

TEST(Dense, ShapeMismatch) {
    Tape t;
    EXPECT_THROW(dense(t, t.constant(Matrix::Zero(1, 3)), t.constant(Matrix::Zero(2, 2)), t.constant(Matrix::Zero(1, 2))),
                 std::invalid_argument);
}

TEST(Relu, ValuesAndGradients) {
    Tape t(Tape::Mode::Inference);
    EXPECT_EQ(t.value(relu(t, t.constant(mat({{-1, 0, 2}})))), mat({{0, 0, 2}}));
    EXPECT_EQ(t.value(relu(t, t.constant(mat({{-1, -5, -0.5}})))), Matrix::Zero(1, 3));

    ParameterSet p;
    p.add("x", mat({{-1, 0, 2}}));
    Tape g;
    auto L = sum_all(g, relu(g, g.parameter(p, 0)));
    auto grads = g.backward(L);
    EXPECT_EQ(grads[0], mat({{0, 0, 1}}));  // subgradient 0 at exactly 0

    // central differences away from the kink agree
    for (double x0 : {-1.0, 2.0}) {
        const double h = 1e-5;
        const double fd = (std::max(0.0, x0 + h) - std::max(0.0, x0 - h)) / (2 * h);
        EXPECT_NEAR(fd, x0 > 0 ? 1.0 : 0.0, 1e-9);  // rounding of x0 +- h
    }
}

TEST(Backward, SumOfProductHandDerivative) {
    // loss = sum(x W^T) with fixed x -> dloss/dW_ij = x_j (batch of one)
    ParameterSet p;
    p.add("W", mat({{1, 2, 3}, {4, 5, 6}}));
    p.add("b", mat({{0.5, -0.5}}));
    p.add("unused", mat({{7}}));
    Tape t;
    Matrix x = mat({{0.25, -2, 3}});
    auto L = sum_all(t, dense(t, t.constant(x), t.parameter(p, 0), t.parameter(p, 1)));
    auto g = t.backward(L);
    EXPECT_EQ(g[0], mat({{0.25, -2, 3}, {0.25, -2, 3}}));
    EXPECT_EQ(g[1], mat({{1, 1}}));
    EXPECT_EQ(g[2], mat({{0}}));  // disconnected parameter: zero gradient
}

TEST(Backward, IndependentBiasHasZeroGradient) {
    ParameterSet p;
    p.add("W", mat({{2}}));
    p.add("b", mat({{3}}));
    Tape t;
    auto W = t.parameter(p, 0);
    t.parameter(p, 1);
    auto L = sum_squares(t, W);
    auto g = t.backward(L);
    EXPECT_EQ(g[0](0, 0), 4.0);
    EXPECT_EQ(g[1](0, 0), 0.0);
}

TEST(Backward, ErrorsOnSecondCallAndNonScalar) {
    ParameterSet p;
    p.add("W", mat({{1, 2}}));
    Tape t;
    auto W = t.parameter(p, 0);
    EXPECT_THROW(t.backward(W), std::invalid_argument);
    auto L = sum_all(t, W);
    t.backward(L);
    EXPECT_THROW(t.backward(L), std::logic_error);
    Tape inf(Tape::Mode::Inference);
    auto c = sum_all(inf, inf.constant(mat({{1}})));
    EXPECT_THROW(inf.backward(c), std::logic_error);
}

TEST(Backward, SharedParameterAccumulatesEveryUse) {
    ParameterSet p;
    p.add("w", mat({{3}}));
    Tape t;
    auto w = t.parameter(p, 0);
    auto L = sum_all(t, add(t, w, add(t, w, w)));  // 3w
    EXPECT_EQ(t.backward(L)[0](0, 0), 3.0);
}

namespace {

/// Random small graph touching every op: dense, relu, add, sub, scale_rows, destandardize.
Evaluation small_graph(const ParameterSet& p, bool want) {
    std::mt19937_64 rng(77);
    Matrix X = random_matrix(3, 4, rng, 0.1, 1.0);
    Vector s(3);
    s << 1.5, 0.5, 2.0;
    Tape t(want ? Tape::Mode::Record : Tape::Mode::Inference);
    auto x = t.constant(X);
    auto h = relu(t, dense(t, x, t.parameter(p, 0), t.parameter(p, 1)), true);
    auto back = destandardize(t, dense(t, h, t.parameter(p, 2), t.parameter(p, 3)), x);
    auto r = relu(t, sub(t, x, back), true);
    auto out = scale_rows(t, add(t, destandardize(t, dense(t, r, t.parameter(p, 4), t.parameter(p, 5)), r), back), s);
    auto L = sum_squares(t, out);
    Evaluation e{t.value(L)(0, 0), t.signature(), {}};
    if (want) e.gradients = t.backward(L);
    return e;
}

ParameterSet small_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ParameterSet p;
    p.add("fc.weight", random_matrix(5, 4, rng));
    p.add("fc.bias", random_matrix(1, 5, rng));
    p.add("back.weight", random_matrix(4, 5, rng));
    p.add("back.bias", random_matrix(1, 4, rng));
    p.add("fore.weight", random_matrix(4, 4, rng));
    p.add("fore.bias", random_matrix(1, 4, rng));
    return p;
}

}  // namespace

TEST(GradCheck, RandomSmallGraphsMatchFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto rep = grad_check(small_graph, small_params(seed), 1e-4);
        EXPECT_TRUE(rep.pass) << "seed " << seed << " max rel " << rep.max_rel_error;
        std::size_t checked = 0;
        for (const auto& b : rep.blocks) checked += b.checked;
        EXPECT_GT(checked, 30u);
    }
}

TEST(GradCheck, QuadraticDenseLossPassesTight) {
    std::mt19937_64 rng(3);
    ParameterSet p;
    p.add("W", random_matrix(3, 2, rng));
    p.add("b", random_matrix(1, 3, rng));
    Matrix X = random_matrix(4, 2, rng);
    Objective f = [&](const ParameterSet& ps, bool want) {
        Tape t(want ? Tape::Mode::Record : Tape::Mode::Inference);
        auto L = sum_squares(t, dense(t, t.constant(X), t.parameter(ps, 0), t.parameter(ps, 1)));
        Evaluation e{t.value(L)(0, 0), 0, {}};
        if (want) e.gradients = t.backward(L);
        return e;
    };
    auto rep = grad_check(f, p, 1e-6);
    EXPECT_TRUE(rep.pass) << rep.max_rel_error;
}

TEST(GradCheck, DeliberateBugIsReportedByBlock) {
    std::mt19937_64 rng(4);
    ParameterSet p;
    p.add("W", random_matrix(3, 2, rng));
    p.add("b", random_matrix(1, 3, rng));
    Matrix X = random_matrix(4, 2, rng);
    Objective f = [&](const ParameterSet& ps, bool want) {
        Tape t(want ? Tape::Mode::Record : Tape::Mode::Inference);
        auto L = sum_squares(t, dense(t, t.constant(X), t.parameter(ps, 0), t.parameter(ps, 1)));
        Evaluation e{t.value(L)(0, 0), 0, {}};
        if (want) {
            e.gradients = t.backward(L);
            e.gradients[1] *= 1.01;  // bias gradient off by 1%
        }
        return e;
    };
    auto rep = grad_check(f, p, 1e-4);
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.failing_blocks(), std::vector<std::string>{"b"});
}

TEST(GradCheck, NonFiniteObjectiveIsAnError) {
    ParameterSet p;
    p.add("w", mat({{1}}));
    Objective f = [](const ParameterSet&, bool want) {
        Evaluation e{std::nan(""), 0, {}};
        if (want) e.gradients = {Matrix::Zero(1, 1)};
        return e;
    };
    EXPECT_THROW(grad_check(f, p, 1e-4), NumericError);
}

TEST(Destandardize, ConstantRowsGiveTheMean) {
    Tape t(Tape::Mode::Inference);
    Matrix x = mat({{2, 2, 2}, {1, 2, 3}});
    Matrix raw = mat({{5, -7, 9}, {0, 0, 0}});
    auto out = t.value(destandardize(t, t.constant(raw), t.constant(x)));
    EXPECT_EQ(out, mat({{2, 2, 2}, {2, 2, 2}}));
}

TEST(Adam, ZeroGradientLeavesParamsButCountsStep) {
    ParameterSet p;
    p.add("w", mat({{1, -2}}));
    auto s = AdamState::init(p);
    adam_step(p, {Matrix::Zero(1, 2)}, s);
    EXPECT_EQ(p.value(0), mat({{1, -2}}));
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParameterSet p;
    p.add("w", mat({{0.5}}));
    auto s = AdamState::init(p, AdamOptions{0.001});
    adam_step(p, {mat({{1.0}})}, s);
    // m_hat = 1, v_hat = 1 -> step = lr * 1 / (1 + eps)
    EXPECT_NEAR(p.value(0)(0, 0), 0.5 - 0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ConstantGradientDescends) {
    ParameterSet p;
    p.add("w", mat({{0.0, 0.0}}));
    auto s = AdamState::init(p);
    for (int i = 0; i < 100; ++i) adam_step(p, {mat({{2.0, -3.0}})}, s);
    EXPECT_LT(p.value(0)(0, 0), 0.0);
    EXPECT_GT(p.value(0)(0, 1), 0.0);
    EXPECT_TRUE((s.v[0].array() >= 0.0).all());
}

TEST(Adam, FirstUpdateInvariantToGradientScale) {
    ParameterSet a, b;
    a.add("w", mat({{0.3, -0.2, 1.0}}));
    b.add("w", mat({{0.3, -0.2, 1.0}}));
    auto sa = AdamState::init(a), sb = AdamState::init(b);
    Matrix g = mat({{0.4, -1.5, 2.0}});
    adam_step(a, {g}, sa);
    adam_step(b, {Matrix(10.0 * g)}, sb);
    EXPECT_LT((a.value(0) - b.value(0)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Adam, NonFiniteGradientNamesParameterAndChangesNothing) {
    ParameterSet p;
    p.add("good", mat({{1}}));
    p.add("block0.fc1.weight", mat({{1}}));
    auto s = AdamState::init(p);
    try {
        adam_step(p, {mat({{1}}), mat({{std::numeric_limits<double>::infinity()}})}, s);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("block0.fc1.weight"), std::string::npos);
    }
    EXPECT_EQ(p.value(0)(0, 0), 1.0);
    EXPECT_EQ(s.step, 0u);
}

TEST(Determinism, IdenticalStepsGiveBitIdenticalParams) {
    auto run = [] {
        ParameterSet p = small_params(11);
        auto s = AdamState::init(p);
        for (int i = 0; i < 20; ++i) adam_step(p, small_graph(p, true).gradients, s);
        return p;
    };
    EXPECT_TRUE(run() == run());
}
