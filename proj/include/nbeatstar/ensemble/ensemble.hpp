#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/data/windows.hpp"
#include "nbeatstar/eval/metrics.hpp"
#include "nbeatstar/model/nbeats_star.hpp"
#include "nbeatstar/util/hash.hpp"

namespace nbeatstar::ensemble {

using nn::Matrix;

enum class Aggregation { Median, Mean };

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "median") return Aggregation::Median;
    if (s == "mean") return Aggregation::Mean;
    throw ConfigError("ensemble.aggregation: expected 'median' or 'mean', got '" + s + "'");
}

inline std::string to_string(Aggregation a) { return a == Aggregation::Median ? "median" : "mean"; }

struct EnsembleSpec {
    std::size_t ensemble_size = 64;
    std::size_t trials = 10;
    Aggregation aggregation = Aggregation::Median;
    std::uint64_t seed = 7;

    void validate() const {
        if (ensemble_size < 1) throw ConfigError("ensemble.ensemble_size must be >= 1");
        if (trials < 1) throw ConfigError("ensemble.trials must be >= 1");
    }
    bool operator==(const EnsembleSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const EnsembleSpec& s) {
    j = nlohmann::json{{"ensemble_size", s.ensemble_size},
                       {"trials", s.trials},
                       {"aggregation", to_string(s.aggregation)},
                       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, EnsembleSpec& s) {
    if (!j.is_object()) throw ConfigError("ensemble: expected an object");
    const std::string p = "ensemble.";
    model::detail::reject_unknown(j, {"ensemble_size", "trials", "aggregation", "seed"}, p);
    model::detail::read_field(j, "ensemble_size", s.ensemble_size, p);
    model::detail::read_field(j, "trials", s.trials, p);
    model::detail::read_field(j, "seed", s.seed, p);
    if (j.contains("aggregation")) {
        std::string a;
        model::detail::read_field(j, "aggregation", a, p);
        s.aggregation = parse_aggregation(a);
    }
}

/// Bootstrap draw (with replacement) of member indices; reproducible from (seed, trial_index).
inline std::vector<std::size_t> draw_ensemble(std::size_t pool_size, const EnsembleSpec& spec, std::size_t trial_index) {
    if (pool_size == 0) throw Error("draw_ensemble: empty pool");
    spec.validate();
    std::mt19937_64 rng(util::derive_seed(spec.seed, trial_index));
    std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
    std::vector<std::size_t> out(spec.ensemble_size);
    for (auto& i : out) i = pick(rng);
    return out;
}

/// Elementwise median (mean of the two middle values for even counts) or mean.
inline std::vector<double> aggregate_forecasts(std::span<const std::vector<double>> members, Aggregation agg) {
    if (members.empty()) throw Error("aggregate_forecasts: no member forecasts");
    const std::size_t H = members.front().size();
    for (const auto& m : members) {
        if (m.size() != H) throw Error("aggregate_forecasts: member forecasts differ in length");
    }
    std::vector<double> out(H);
    std::vector<double> column(members.size());
    for (std::size_t j = 0; j < H; ++j) {
        for (std::size_t k = 0; k < members.size(); ++k) column[k] = members[k][j];
        if (agg == Aggregation::Mean) {
            double s = 0.0;
            for (double v : column) s += v;
            out[j] = s / static_cast<double>(column.size());
        } else {
            out[j] = eval::median(column);
        }
    }
    return out;
}

/// Spread of one aggregate metric across trials.
struct Spread {
    double std = 0.0;  // population standard deviation
    double iqr = 0.0;
};

struct TrialsReport {
    std::vector<eval::MetricsReport> trials;
    eval::MetricsReport mean;  // arithmetic mean of every metric across trials
    Spread medape, mape, iqr_ape, rmse, mpe;
    std::vector<std::vector<std::size_t>> draws;  // member indices per trial
    Matrix first_trial_forecasts;                 // windows x H, ensemble forecasts of trial 0
};

namespace detail {

inline Spread spread_of(const std::vector<double>& v) {
    const double m = eval::mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return Spread{std::sqrt(s / static_cast<double>(v.size())), eval::quantile(v, 0.75) - eval::quantile(v, 0.25)};
}

inline void accumulate(eval::SeriesMetrics& dst, const eval::SeriesMetrics& src, double w) {
    dst.medape += w * src.medape;
    dst.mape += w * src.mape;
    dst.iqr_ape += w * src.iqr_ape;
    dst.rmse += w * src.rmse;
    dst.mpe += w * src.mpe;
}

/// Groups windows by series id, preserving first-seen order.
inline eval::MetricsReport score(std::span<const data::Window> windows, const Matrix& forecasts) {
    std::vector<eval::SeriesErrors> groups;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.id == w.series_id; });
        if (it == groups.end()) {
            groups.push_back({w.series_id, {}});
            it = groups.end() - 1;
        }
        std::vector<double> f(forecasts.row(static_cast<Eigen::Index>(i)).data(),
                              forecasts.row(static_cast<Eigen::Index>(i)).data() + forecasts.cols());
        auto errs = eval::point_errors(w.y, f);
        it->errors.insert(it->errors.end(), errs.begin(), errs.end());
    }
    return eval::aggregate_metrics(groups);
}

}  // namespace detail

/// Scores fixed forecasts (windows x H) against the windows' targets.
inline eval::MetricsReport score_forecasts(std::span<const data::Window> windows, const Matrix& forecasts) {
    if (forecasts.rows() != static_cast<Eigen::Index>(windows.size())) throw Error("score_forecasts: row count mismatch");
    return detail::score(windows, forecasts);
}

/// Runs `spec.trials` bootstrap ensembles over precomputed member forecasts
/// (member_forecasts[k] is windows x H for pool member k).
inline TrialsReport run_trials(const std::vector<Matrix>& member_forecasts, const EnsembleSpec& spec,
                               std::span<const data::Window> windows) {
    spec.validate();
    if (member_forecasts.empty()) throw Error("run_trials: empty pool");
    if (windows.empty()) throw Error("run_trials: no evaluation windows");
    const auto n = static_cast<Eigen::Index>(windows.size());
    const Eigen::Index H = member_forecasts.front().cols();
    for (const auto& m : member_forecasts) {
        if (m.rows() != n || m.cols() != H) throw Error("run_trials: member forecast shape mismatch");
    }

    TrialsReport rep;
    std::vector<std::vector<double>> members(spec.ensemble_size);
    for (std::size_t t = 0; t < spec.trials; ++t) {
        auto draw = draw_ensemble(member_forecasts.size(), spec, t);
        Matrix agg(n, H);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < draw.size(); ++k) {
                const auto& row = member_forecasts[draw[k]].row(i);
                members[k].assign(row.data(), row.data() + H);
            }
            auto f = aggregate_forecasts(members, spec.aggregation);
            for (Eigen::Index j = 0; j < H; ++j) agg(i, j) = f[static_cast<std::size_t>(j)];
        }
        if (t == 0) rep.first_trial_forecasts = agg;
        rep.trials.push_back(detail::score(windows, agg));
        rep.draws.push_back(std::move(draw));
    }

    const double w = 1.0 / static_cast<double>(spec.trials);
    rep.mean = rep.trials.front();
    for (auto& s : rep.mean.per_series) s = eval::SeriesMetrics{s.id, 0, 0, 0, 0, 0, s.count};
    rep.mean.aggregate = eval::SeriesMetrics{"ALL", 0, 0, 0, 0, 0, rep.mean.aggregate.count};
    rep.mean.mpe_skewness = 0.0;
    rep.mean.mpe_kurtosis = 0.0;
    std::vector<double> medape, mape, iqr, rmse, mpe;
    for (const auto& tr : rep.trials) {
        for (std::size_t s = 0; s < tr.per_series.size(); ++s) detail::accumulate(rep.mean.per_series[s], tr.per_series[s], w);
        detail::accumulate(rep.mean.aggregate, tr.aggregate, w);
        rep.mean.mpe_skewness += w * tr.mpe_skewness;
        rep.mean.mpe_kurtosis += w * tr.mpe_kurtosis;
        medape.push_back(tr.aggregate.medape);
        mape.push_back(tr.aggregate.mape);
        iqr.push_back(tr.aggregate.iqr_ape);
        rmse.push_back(tr.aggregate.rmse);
        mpe.push_back(tr.aggregate.mpe);
    }
    if (spec.trials == 1) rep.mean = rep.trials.front();
    rep.medape = detail::spread_of(medape);
    rep.mape = detail::spread_of(mape);
    rep.iqr_ape = detail::spread_of(iqr);
    rep.rmse = detail::spread_of(rmse);
    rep.mpe = detail::spread_of(mpe);
    return rep;
}

/// Forecasts of every pool member for every window (original scale).
inline std::vector<Matrix> member_forecasts(std::span<const model::NBeatsStar> pool, std::span<const data::Window> windows) {
    if (windows.empty()) throw Error("member_forecasts: no windows");
    const std::size_t w = windows.front().x.size();
    Matrix X(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(w));
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].x.size() != w) throw Error("member_forecasts: lookback lengths differ");
        for (std::size_t j = 0; j < w; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = windows[i].x[j];
    }
    std::vector<Matrix> out;
    out.reserve(pool.size());
    for (const auto& m : pool) out.push_back(model::predict(m, X));
    return out;
}

inline TrialsReport run_trials(std::span<const model::NBeatsStar> pool, const EnsembleSpec& spec,
                               std::span<const data::Window> windows) {
    return run_trials(member_forecasts(pool, windows), spec, windows);
}

inline nlohmann::json to_json(const Spread& s) { return {{"std", s.std}, {"iqr", s.iqr}}; }

inline nlohmann::json to_json(const TrialsReport& r) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : r.trials) trials.push_back(eval::to_json(t));
    return {{"mean", eval::to_json(r.mean)},
            {"spread",
             {{"MedAPE", to_json(r.medape)},
              {"MAPE", to_json(r.mape)},
              {"IQR_APE", to_json(r.iqr_ape)},
              {"RMSE", to_json(r.rmse)},
              {"MPE", to_json(r.mpe)}}},
            {"trials", trials},
            {"draws", r.draws}};
}

}  // namespace nbeatstar::ensemble
