#pragma once

#include <cmath>
#include <string>

#include "nbeatstar/nn/tape.hpp"
#include "nbeatstar/util/error.hpp"

namespace nbeatstar::loss {

using nn::Matrix;

/// Weights of the pinball-MAPE + normalized-MSE objective.
struct LossConfig {
    double tau = 0.35;     // pinball quantile
    double lambda = 0.35;  // nMSE weight
    bool no_l2 = false;    // drop the nMSE term entirely
    bool no_var = false;   // do not divide squared errors by the target variance

    void validate() const {
        if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1), got " + std::to_string(tau));
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    }
    /// True when the nMSE term takes part in the total.
    [[nodiscard]] bool uses_nmse() const { return !no_l2 && lambda > 0.0; }
};

struct LossBreakdown {
    double pmape = 0.0;
    double nmse = 0.0;  // 0 whenever the term is disabled
    double total = 0.0;
};

namespace detail {

inline void check_shapes(const Matrix& y, const Matrix& y_hat) {
    if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols() || y.size() == 0) {
        throw Error("loss: target and forecast shapes differ or are empty");
    }
}

inline void check_positive(const Matrix& y) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            if (!(y(r, c) > 0.0)) {
                throw DataError("loss: target row " + std::to_string(r) + ", step " + std::to_string(c) +
                                " is not strictly positive");
            }
        }
    }
}

/// Population variance per row; throws when a row is constant.
inline nn::Vector row_variance(const Matrix& y) {
    nn::Vector var(y.rows());
    const double H = static_cast<double>(y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        double v = 0.0;
        if (!(row.array() == row(0)).all()) {
            const double m = row.sum() / H;
            v = (row.array() - m).square().sum() / H;
        }
        if (!(v > 0.0)) throw DataError("nmse: target row " + std::to_string(r) + " has zero variance");
        var(r) = v;
    }
    return var;
}

}  // namespace detail

/// Mean pinball loss on percentage errors. Ties (y == y_hat) take the y >= y_hat branch.
inline double pmape(const Matrix& y, const Matrix& y_hat, double tau) {
    detail::check_shapes(y, y_hat);
    detail::check_positive(y);
    double sum = 0.0;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            const double a = y(r, c), f = y_hat(r, c);
            sum += a >= f ? tau * (a - f) / a : (1.0 - tau) * (f - a) / a;
        }
    }
    return sum / static_cast<double>(y.size());
}

/// Mean squared error divided by each target row's population variance
/// (or by 1 with `no_var`).
inline double nmse(const Matrix& y, const Matrix& y_hat, bool no_var = false) {
    detail::check_shapes(y, y_hat);
    const nn::Vector var = no_var ? nn::Vector::Ones(y.rows()) : detail::row_variance(y);
    double sum = 0.0;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        sum += (y.row(r) - y_hat.row(r)).squaredNorm() / var(r);
    }
    return sum / static_cast<double>(y.size());
}

inline LossBreakdown combined_loss(const Matrix& y, const Matrix& y_hat, const LossConfig& cfg) {
    LossBreakdown out;
    out.pmape = pmape(y, y_hat, cfg.tau);
    out.total = out.pmape;
    if (cfg.uses_nmse()) {
        out.nmse = nmse(y, y_hat, cfg.no_var);
        out.total = out.pmape + cfg.lambda * out.nmse;
    }
    return out;
}

/// d(combined_loss)/d(y_hat).
inline Matrix loss_gradients(const Matrix& y, const Matrix& y_hat, const LossConfig& cfg) {
    detail::check_shapes(y, y_hat);
    detail::check_positive(y);
    const double n = static_cast<double>(y.size());
    Matrix g(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            const double a = y(r, c);
            g(r, c) = (a >= y_hat(r, c) ? -cfg.tau : 1.0 - cfg.tau) / (n * a);
        }
    }
    if (cfg.uses_nmse()) {
        const nn::Vector var = cfg.no_var ? nn::Vector::Ones(y.rows()) : detail::row_variance(y);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            g.row(r) += cfg.lambda * (-2.0) * (y.row(r) - y_hat.row(r)) / (n * var(r));
        }
    }
    return g;
}

/// Records the combined loss of `y_hat` against constant targets `y` as a 1x1 node.
inline nn::Var loss_node(nn::Tape& t, nn::Var y_hat, const Matrix& y, const LossConfig& cfg,
                         LossBreakdown* breakdown = nullptr, bool track_kinks = false) {
    const Matrix& f = t.value(y_hat);
    LossBreakdown b = combined_loss(y, f, cfg);
    if (breakdown) *breakdown = b;
    if (track_kinks) {
        Matrix side = (y.array() >= f.array()).cast<double>();
        for (Eigen::Index i = 0; i < side.size(); ++i) t.mix_signature(static_cast<std::uint64_t>(side.data()[i]) + 2 * i);
    }
    Matrix value(1, 1);
    value(0, 0) = b.total;
    return t.push(std::move(value), t.needs_grad(y_hat), [y_hat, y, cfg](nn::Tape& tp, const Matrix& g) {
        Matrix d = loss_gradients(y, tp.value(y_hat), cfg) * g(0, 0);
        tp.accumulate(y_hat, d);
    });
}

}  // namespace nbeatstar::loss
