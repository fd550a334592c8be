#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nbeatstar/ensemble/ensemble.hpp"

using namespace nbeatstar;
using namespace nbeatstar::ensemble;
using nn::Matrix;

namespace {

std::vector<data::Window> windows(std::size_t n, std::size_t H, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(50, 150);
    std::vector<data::Window> out;
    for (std::size_t i = 0; i < n; ++i) {
        data::Window w;
        w.series_id = "S" + std::to_string(i % 3);
        w.series_index = i % 3;
        for (std::size_t j = 0; j < H; ++j) w.y.push_back(u(rng));
        w.x = w.y;
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Matrix> noisy_members(const std::vector<data::Window>& wins, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, 5.0);
    const auto H = static_cast<Eigen::Index>(wins.front().y.size());
    std::vector<Matrix> out;
    for (std::size_t m = 0; m < k; ++m) {
        Matrix f(static_cast<Eigen::Index>(wins.size()), H);
        for (std::size_t i = 0; i < wins.size(); ++i) {
            for (Eigen::Index j = 0; j < H; ++j) f(static_cast<Eigen::Index>(i), j) = wins[i].y[static_cast<std::size_t>(j)] + e(rng);
        }
        out.push_back(f);
    }
    return out;
}

}  // namespace

TEST(Draw, SingleMemberPoolRepeats) {
    EnsembleSpec s;
    s.ensemble_size = 64;
    auto d = draw_ensemble(1, s, 0);
    EXPECT_EQ(d, std::vector<std::size_t>(64, 0));
    EXPECT_THROW(draw_ensemble(0, s, 0), Error);
}

TEST(Draw, ReproducibleFromSeedAndTrial) {
    EnsembleSpec s;
    EXPECT_EQ(draw_ensemble(16, s, 3), draw_ensemble(16, s, 3));
    EXPECT_NE(draw_ensemble(16, s, 3), draw_ensemble(16, s, 4));
    EnsembleSpec t = s;
    t.seed = s.seed + 1;
    EXPECT_NE(draw_ensemble(16, s, 3), draw_ensemble(16, t, 3));
}

TEST(Draw, BootstrapMultiplicityBinomialBound) {
    // pool 16, size 64, 1000 trials: each member appears Binomial(64000, 1/16) times in total
    EnsembleSpec s;
    s.ensemble_size = 64;
    std::vector<double> count(16, 0.0);
    bool repeat_seen = false;
    for (std::size_t t = 0; t < 1000; ++t) {
        auto d = draw_ensemble(16, s, t);
        std::vector<int> c(16, 0);
        for (auto i : d) {
            count[i] += 1.0;
            if (++c[i] > 1) repeat_seen = true;
        }
    }
    EXPECT_TRUE(repeat_seen);  // with replacement
    const double n = 64000, p = 1.0 / 16.0;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (double c : count) {
        EXPECT_LT(std::abs(c - n * p), 3.0 * sigma);
        EXPECT_NEAR(c / 1000.0, 4.0, 3.0 * sigma / 1000.0);
    }
}

TEST(Aggregate, HandExamples) {
    std::vector<std::vector<double>> m{{1, 1}, {2, 2}, {10, 10}};
    EXPECT_EQ(aggregate_forecasts(m, Aggregation::Median), (std::vector<double>{2, 2}));
    auto mean = aggregate_forecasts(m, Aggregation::Mean);
    EXPECT_DOUBLE_EQ(mean[0], 13.0 / 3.0);
    EXPECT_DOUBLE_EQ(mean[1], 13.0 / 3.0);
    std::vector<std::vector<double>> one{{4, 5, 6}};
    EXPECT_EQ(aggregate_forecasts(one, Aggregation::Median), one[0]);
    EXPECT_EQ(aggregate_forecasts(one, Aggregation::Mean), one[0]);
    std::vector<std::vector<double>> same(5, {3.5, 7.25});
    EXPECT_EQ(aggregate_forecasts(same, Aggregation::Median), same[0]);
    EXPECT_EQ(aggregate_forecasts(same, Aggregation::Mean), same[0]);
    std::vector<std::vector<double>> ragged{{1, 2}, {1}};
    EXPECT_THROW(aggregate_forecasts(ragged, Aggregation::Mean), Error);
    std::vector<std::vector<double>> even{{1}, {4}};
    EXPECT_EQ(aggregate_forecasts(even, Aggregation::Median)[0], 2.5);
}

TEST(Aggregate, MedianIsMonotone) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 10), bump(0, 3);
    for (int k = 0; k < 500; ++k) {
        std::vector<std::vector<double>> m(7, std::vector<double>(4));
        for (auto& v : m) {
            for (auto& x : v) x = u(rng);
        }
        auto base = aggregate_forecasts(m, Aggregation::Median);
        m[k % 7][k % 4] += bump(rng);
        auto raised = aggregate_forecasts(m, Aggregation::Median);
        for (std::size_t j = 0; j < 4; ++j) EXPECT_GE(raised[j], base[j]);
    }
}

TEST(Trials, SingleTrialEqualsAverage) {
    auto wins = windows(9, 12, 1);
    auto members = noisy_members(wins, 8, 2);
    EnsembleSpec s;
    s.ensemble_size = 5;
    s.trials = 1;
    auto r = run_trials(members, s, wins);
    ASSERT_EQ(r.trials.size(), 1u);
    EXPECT_EQ(r.mean.aggregate.mape, r.trials[0].aggregate.mape);
    EXPECT_EQ(r.mean.aggregate.rmse, r.trials[0].aggregate.rmse);
    EXPECT_EQ(r.mape.std, 0.0);
}

TEST(Trials, IdenticalMembersHaveZeroSpread) {
    auto wins = windows(6, 12, 3);
    auto one = noisy_members(wins, 1, 4);
    std::vector<Matrix> pool(10, one[0]);
    EnsembleSpec s;
    s.ensemble_size = 4;
    s.trials = 7;
    auto r = run_trials(pool, s, wins);
    EXPECT_EQ(r.mape.std, 0.0);
    EXPECT_EQ(r.rmse.iqr, 0.0);
    EXPECT_EQ(r.medape.std, 0.0);
}

TEST(Trials, MeanIsArithmeticMeanOfTrials) {
    auto wins = windows(12, 12, 5);
    auto members = noisy_members(wins, 16, 6);
    EnsembleSpec s;
    s.ensemble_size = 8;
    s.trials = 10;
    auto r = run_trials(members, s, wins);
    ASSERT_EQ(r.trials.size(), 10u);
    double mape = 0.0, rmse = 0.0;
    for (const auto& t : r.trials) {
        mape += t.aggregate.mape;
        rmse += t.aggregate.rmse;
    }
    EXPECT_NEAR(r.mean.aggregate.mape, mape / 10.0, 1e-12);
    EXPECT_NEAR(r.mean.aggregate.rmse, rmse / 10.0, 1e-12);
    EXPECT_GT(r.mape.std, 0.0);
    EXPECT_TRUE(std::isfinite(r.mean.aggregate.mape));
    // trials are reproducible
    auto again = run_trials(members, s, wins);
    EXPECT_EQ(to_json(r).dump(), to_json(again).dump());
    // ensemble members of each trial are the recorded bootstrap draw
    EXPECT_EQ(r.draws[3], draw_ensemble(16, s, 3));
}

TEST(Trials, ScoresPerSeriesGroups) {
    auto wins = windows(6, 4, 7);
    std::vector<Matrix> perfect;
    Matrix f(6, 4);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 4; ++j) f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wins[i].y[j];
    }
    perfect.push_back(f);
    EnsembleSpec s;
    s.ensemble_size = 1;
    s.trials = 2;
    auto r = run_trials(perfect, s, wins);
    EXPECT_EQ(r.mean.per_series.size(), 3u);
    EXPECT_EQ(r.mean.aggregate.mape, 0.0);
    EXPECT_EQ(r.mean.per_series[0].count, 8u);
}

TEST(Spec, JsonAndValidation) {
    EnsembleSpec s;
    EXPECT_EQ(s.ensemble_size, 64u);
    EXPECT_EQ(s.aggregation, Aggregation::Median);
    s.aggregation = Aggregation::Mean;
    nlohmann::json j = s;
    EnsembleSpec t;
    from_json(j, t);
    EXPECT_EQ(s, t);
    EXPECT_THROW(from_json(nlohmann::json{{"aggregation", "mode"}}, t), ConfigError);
    t.trials = 0;
    EXPECT_THROW(t.validate(), ConfigError);
}
