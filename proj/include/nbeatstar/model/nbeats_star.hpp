#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nbeatstar/model/config.hpp"
#include "nbeatstar/nn/ops.hpp"
#include "nbeatstar/nn/tape.hpp"

namespace nbeatstar::model {

using nn::Matrix;
using nn::Tape;
using nn::Var;
using nn::Vector;

/// Parameter slots of one block: the hidden MLP and the two linear heads.
struct BlockLayout {
    std::vector<std::size_t> fc_weight;
    std::vector<std::size_t> fc_bias;
    std::size_t backcast_weight = 0;
    std::size_t backcast_bias = 0;
    std::size_t forecast_weight = 0;
    std::size_t forecast_bias = 0;
};

/// Stacked residual forecaster with per-block destandardization.
///
/// Every block sees x^(m), runs a ReLU MLP, and emits backcast and forecast heads
/// that are rescaled by Std(x^(m)) and shifted by Mean(x^(m)). The next block
/// receives ReLU(x^(m) - backcast). The final forecast is max(x) times the sum of
/// block forecasts. With sharing on, all blocks use one parameter set.
class NBeatsStar {
public:
    explicit NBeatsStar(ModelConfig config) : config_(std::move(config)) {
        config_.validate();
        const std::size_t sets = config_.sharing ? 1 : config_.blocks;
        const auto W = static_cast<Eigen::Index>(config_.fc_width);
        for (std::size_t s = 0; s < sets; ++s) {
            BlockLayout l;
            const std::string prefix = "block" + std::to_string(s) + ".";
            auto in = static_cast<Eigen::Index>(config_.lookback);
            for (std::size_t k = 0; k < config_.fc_layers; ++k) {
                l.fc_weight.push_back(params_.add(prefix + "fc" + std::to_string(k) + ".weight", Matrix::Zero(W, in)));
                l.fc_bias.push_back(params_.add(prefix + "fc" + std::to_string(k) + ".bias", Matrix::Zero(1, W)));
                in = W;
            }
            const auto w = static_cast<Eigen::Index>(config_.lookback);
            const auto H = static_cast<Eigen::Index>(config_.horizon);
            l.backcast_weight = params_.add(prefix + "backcast.weight", Matrix::Zero(w, W));
            l.backcast_bias = params_.add(prefix + "backcast.bias", Matrix::Zero(1, w));
            l.forecast_weight = params_.add(prefix + "forecast.weight", Matrix::Zero(H, W));
            l.forecast_bias = params_.add(prefix + "forecast.bias", Matrix::Zero(1, H));
            layouts_.push_back(std::move(l));
        }
    }

    /// Hidden layers: uniform with fan-in (He) bound sqrt(6 / fan_in); heads: uniform +-0.01; biases zero.
    static NBeatsStar initialize(const ModelConfig& config, std::uint64_t seed) {
        NBeatsStar m(config);
        std::mt19937_64 rng(seed);
        auto fill = [&](Matrix& M, double bound) {
            std::uniform_real_distribution<double> u(-bound, bound);
            for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = u(rng);
        };
        for (auto& l : m.layouts_) {
            for (std::size_t k = 0; k < l.fc_weight.size(); ++k) {
                Matrix& W = m.params_.value(l.fc_weight[k]);
                fill(W, std::sqrt(6.0 / static_cast<double>(W.cols())));
            }
            fill(m.params_.value(l.backcast_weight), 0.01);
            fill(m.params_.value(l.forecast_weight), 0.01);
        }
        return m;
    }

    [[nodiscard]] const ModelConfig& config() const { return config_; }
    [[nodiscard]] const nn::ParameterSet& params() const { return params_; }
    nn::ParameterSet& params() { return params_; }

    /// Layout used by block m (0-based).
    [[nodiscard]] const BlockLayout& block(std::size_t m) const { return layouts_.at(config_.sharing ? 0 : m); }
    [[nodiscard]] std::size_t parameter_sets() const { return layouts_.size(); }

    /// Zeros both heads of every block (weights and biases).
    void zero_heads() {
        for (const auto& l : layouts_) {
            for (auto i : {l.backcast_weight, l.backcast_bias, l.forecast_weight, l.forecast_bias}) params_.value(i).setZero();
        }
    }

private:
    ModelConfig config_;
    nn::ParameterSet params_;
    std::vector<BlockLayout> layouts_;
};

/// x / max(x). Throws unless max(x) > 0.
inline std::pair<std::vector<double>, double> normalize_input(std::span<const double> x) {
    if (x.empty()) throw DataError("normalize_input: empty lookback");
    const double scale = *std::max_element(x.begin(), x.end());
    if (!(scale > 0.0)) throw DataError("normalize_input: max(x) must be positive");
    std::vector<double> out(x.begin(), x.end());
    for (auto& v : out) v /= scale;
    return {out, scale};
}

/// Row-wise normalize_input for a batch.
inline std::pair<Matrix, Vector> normalize_batch(const Matrix& x) {
    Vector scale = x.rowwise().maxCoeff();
    Matrix out = x;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (!(scale(r) > 0.0)) throw DataError("normalize_input: row " + std::to_string(r) + " has max(x) <= 0");
        out.row(r) /= scale(r);
    }
    return {out, scale};
}

/// Tape handles for one batched forward pass.
struct ForwardNodes {
    Var forecast;                 // original scale, batch x H
    Vector scale;                 // per-row max(x)
    std::vector<Var> inputs;      // x^(m), m = 1..M
    std::vector<Var> backcasts;   // destandardized backcast of block m
    std::vector<Var> forecasts;   // destandardized forecast of block m
};

namespace detail {

struct BoundBlock {
    std::vector<Var> fc_weight, fc_bias;
    Var backcast_weight, backcast_bias, forecast_weight, forecast_bias;
};

inline std::pair<Var, Var> run_block(Tape& t, const BoundBlock& b, Var x, const Ablation& ablation, bool track) {
    Var h = x;
    for (std::size_t k = 0; k < b.fc_weight.size(); ++k) h = nn::relu(t, nn::dense(t, h, b.fc_weight[k], b.fc_bias[k]), track);
    Var back = nn::dense(t, h, b.backcast_weight, b.backcast_bias);
    Var fore = nn::dense(t, h, b.forecast_weight, b.forecast_bias);
    if (!ablation.no_destd) {
        back = nn::destandardize(t, back, x);
        fore = nn::destandardize(t, fore, x);
    }
    return {back, fore};
}

}  // namespace detail

/// Records the full forward graph for a batch of raw lookbacks (rows).
inline ForwardNodes forward(Tape& t, const NBeatsStar& model, const Matrix& x, bool track_kinks = false) {
    const auto& cfg = model.config();
    if (x.cols() != static_cast<Eigen::Index>(cfg.lookback)) {
        throw DataError("forward: lookback has " + std::to_string(x.cols()) + " values, model expects " +
                        std::to_string(cfg.lookback));
    }
    auto [x_norm, scale] = normalize_batch(x);

    std::vector<detail::BoundBlock> bound;
    for (std::size_t s = 0; s < model.parameter_sets(); ++s) {
        const auto& l = model.block(s);
        detail::BoundBlock b;
        for (auto i : l.fc_weight) b.fc_weight.push_back(t.parameter(model.params(), i));
        for (auto i : l.fc_bias) b.fc_bias.push_back(t.parameter(model.params(), i));
        b.backcast_weight = t.parameter(model.params(), l.backcast_weight);
        b.backcast_bias = t.parameter(model.params(), l.backcast_bias);
        b.forecast_weight = t.parameter(model.params(), l.forecast_weight);
        b.forecast_bias = t.parameter(model.params(), l.forecast_bias);
        bound.push_back(std::move(b));
    }

    ForwardNodes out;
    out.scale = scale;
    Var xm = t.constant(std::move(x_norm));
    Var total{};
    for (std::size_t m = 0; m < cfg.blocks; ++m) {
        const auto& b = bound[cfg.sharing ? 0 : m];
        auto [back, fore] = detail::run_block(t, b, xm, cfg.ablation, track_kinks);
        out.inputs.push_back(xm);
        out.backcasts.push_back(back);
        out.forecasts.push_back(fore);
        total = m == 0 ? fore : nn::add(t, total, fore);
        if (m + 1 < cfg.blocks) {
            Var resid = nn::sub(t, xm, back);
            xm = cfg.ablation.no_relu ? resid : nn::relu(t, resid, track_kinks);
        }
    }
    out.forecast = nn::scale_rows(t, total, out.scale);
    return out;
}

/// Backcast and forecast of one block, normalized-input scale.
struct BlockOutput {
    std::vector<double> backcast;
    std::vector<double> forecast;
};

/// Every intermediate of a single forward pass.
struct Diagnostics {
    double scale = 1.0;
    std::vector<std::vector<double>> inputs;     // x^(m)
    std::vector<std::vector<double>> backcasts;  // x-hat^(m)
    std::vector<std::vector<double>> forecasts;  // y-hat^(m)
};

struct Prediction {
    std::vector<double> forecast;  // original scale
    Diagnostics diagnostics;
};

inline std::vector<double> to_vector(const Matrix& m, Eigen::Index row = 0) {
    return std::vector<double>(m.row(row).data(), m.row(row).data() + m.cols());
}

/// Runs block `m` (0-based) on an already-normalized input x^(m).
inline BlockOutput block_forward(const NBeatsStar& model, std::span<const double> x_m, std::size_t m = 0) {
    const auto& cfg = model.config();
    if (x_m.size() != cfg.lookback) throw DataError("block_forward: input length does not match lookback");
    Tape t(Tape::Mode::Inference);
    const auto& l = model.block(m);
    detail::BoundBlock b;
    for (auto i : l.fc_weight) b.fc_weight.push_back(t.parameter(model.params(), i));
    for (auto i : l.fc_bias) b.fc_bias.push_back(t.parameter(model.params(), i));
    b.backcast_weight = t.parameter(model.params(), l.backcast_weight);
    b.backcast_bias = t.parameter(model.params(), l.backcast_bias);
    b.forecast_weight = t.parameter(model.params(), l.forecast_weight);
    b.forecast_bias = t.parameter(model.params(), l.forecast_bias);
    Matrix x(1, static_cast<Eigen::Index>(x_m.size()));
    for (std::size_t j = 0; j < x_m.size(); ++j) x(0, static_cast<Eigen::Index>(j)) = x_m[j];
    auto [back, fore] = detail::run_block(t, b, t.constant(std::move(x)), cfg.ablation, false);
    return {to_vector(t.value(back)), to_vector(t.value(fore))};
}

/// Forecast for one raw lookback, with per-block diagnostics.
inline Prediction model_forward(const NBeatsStar& model, std::span<const double> x) {
    Matrix xb(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) xb(0, static_cast<Eigen::Index>(j)) = x[j];
    Tape t(Tape::Mode::Inference);
    ForwardNodes f = forward(t, model, xb);
    Prediction p;
    p.forecast = to_vector(t.value(f.forecast));
    p.diagnostics.scale = f.scale(0);
    for (std::size_t m = 0; m < f.inputs.size(); ++m) {
        p.diagnostics.inputs.push_back(to_vector(t.value(f.inputs[m])));
        p.diagnostics.backcasts.push_back(to_vector(t.value(f.backcasts[m])));
        p.diagnostics.forecasts.push_back(to_vector(t.value(f.forecasts[m])));
    }
    return p;
}

/// Original-scale forecasts for a batch of raw lookbacks.
inline Matrix predict(const NBeatsStar& model, const Matrix& x) {
    Tape t(Tape::Mode::Inference);
    ForwardNodes f = forward(t, model, x);
    return t.value(f.forecast);
}

/// Per-block additive contributions in original scale: scale * y-hat^(m).
inline std::vector<std::vector<double>> decompose(const Diagnostics& d) {
    std::vector<std::vector<double>> out;
    for (const auto& f : d.forecasts) {
        std::vector<double> c(f);
        for (auto& v : c) v *= d.scale;
        out.push_back(std::move(c));
    }
    return out;
}

inline nlohmann::json to_json(const Diagnostics& d) {
    return {{"scale", d.scale}, {"inputs", d.inputs}, {"backcasts", d.backcasts}, {"forecasts", d.forecasts}};
}

}  // namespace nbeatstar::model
