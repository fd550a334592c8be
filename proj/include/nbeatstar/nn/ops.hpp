#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "nbeatstar/nn/tape.hpp"

namespace nbeatstar::nn {

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    }
}

inline std::uint64_t mask_hash(const Matrix& m) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    std::uint64_t word = 0;
    int bits = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        word = (word << 1) | (m.data()[i] > 0.0 ? 1u : 0u);
        if (++bits == 64) {
            h = util::mix(h, word);
            word = 0;
            bits = 0;
        }
    }
    return util::mix(h, word ^ static_cast<std::uint64_t>(bits));
}

}  // namespace detail

/// Per-row mean and population standard deviation. Rows whose entries are all
/// identical get exactly that value as mean and exactly zero deviation.
inline std::pair<Vector, Vector> row_mean_std(const Matrix& x) {
    const Eigen::Index n = x.rows();
    const double w = static_cast<double>(x.cols());
    Vector mean(n), sd(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        auto row = x.row(r);
        if ((row.array() == row(0)).all()) {
            mean(r) = row(0);
            sd(r) = 0.0;
            continue;
        }
        const double m = row.sum() / w;
        mean(r) = m;
        sd(r) = std::sqrt((row.array() - m).square().sum() / w);
    }
    return {mean, sd};
}

/// out = x * W^T + b, with x: batch x in, W: out x in, b: 1 x out.
inline Var dense(Tape& t, Var x, Var W, Var b) {
    const Matrix& xv = t.value(x);
    const Matrix& Wv = t.value(W);
    const Matrix& bv = t.value(b);
    if (xv.cols() != Wv.cols()) {
        throw std::invalid_argument("dense: input width " + std::to_string(xv.cols()) + " does not match layer in-dimension " +
                                    std::to_string(Wv.cols()));
    }
    if (bv.rows() != 1 || bv.cols() != Wv.rows()) throw std::invalid_argument("dense: bias shape mismatch");
    Matrix out(xv.rows(), Wv.rows());
    out.noalias() = xv * Wv.transpose();
    out.rowwise() += bv.row(0);
    bool need = t.needs_grad(x) || t.needs_grad(W) || t.needs_grad(b);
    return t.push(std::move(out), need, [x, W, b](Tape& tp, const Matrix& g) {
        if (tp.needs_grad(x)) {
            Matrix dx(g.rows(), tp.value(W).cols());
            dx.noalias() = g * tp.value(W);
            tp.accumulate(x, std::move(dx));
        }
        if (tp.needs_grad(W)) {
            Matrix dW(g.cols(), tp.value(x).cols());
            dW.noalias() = g.transpose() * tp.value(x);
            tp.accumulate(W, std::move(dW));
        }
        if (tp.needs_grad(b)) tp.accumulate(b, g.colwise().sum());
    });
}

/// Elementwise max(0, x); the subgradient at exactly 0 is 0.
inline Var relu(Tape& t, Var x, bool track_kinks = false) {
    Matrix out = t.value(x).cwiseMax(0.0);
    if (track_kinks) t.mix_signature(detail::mask_hash(out));
    return t.push(std::move(out), t.needs_grad(x), [x](Tape& tp, const Matrix& g) {
        Matrix d = (tp.value(x).array() > 0.0).select(g, 0.0);
        tp.accumulate(x, std::move(d));
    });
}

inline Var add(Tape& t, Var a, Var b) {
    detail::require_same_shape(t.value(a), t.value(b), "add");
    Matrix out = t.value(a) + t.value(b);
    return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

inline Var sub(Tape& t, Var a, Var b) {
    detail::require_same_shape(t.value(a), t.value(b), "sub");
    Matrix out = t.value(a) - t.value(b);
    return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        if (tp.needs_grad(b)) tp.accumulate(b, -g);
    });
}

/// Multiplies row r by the constant s(r).
inline Var scale_rows(Tape& t, Var a, const Vector& s) {
    if (s.size() != t.value(a).rows()) throw std::invalid_argument("scale_rows: scale length mismatch");
    Matrix out = s.asDiagonal() * t.value(a);
    return t.push(std::move(out), t.needs_grad(a), [a, s](Tape& tp, const Matrix& g) {
        Matrix d = s.asDiagonal() * g;
        tp.accumulate(a, std::move(d));
    });
}

/// out[r, j] = raw[r, j] * Std(x[r, :]) + Mean(x[r, :]).
/// Gradient flows into both `raw` and `x`; at Std = 0 the Std path contributes nothing.
inline Var destandardize(Tape& t, Var raw, Var x) {
    const Matrix& rv = t.value(raw);
    const Matrix& xv = t.value(x);
    if (rv.rows() != xv.rows()) throw std::invalid_argument("destandardize: batch size mismatch");
    auto [mean, sd] = row_mean_std(xv);
    Matrix out = sd.asDiagonal() * rv;
    out.colwise() += mean;
    bool need = t.needs_grad(raw) || t.needs_grad(x);
    return t.push(std::move(out), need, [raw, x, mean = std::move(mean), sd = std::move(sd)](Tape& tp, const Matrix& g) {
        if (tp.needs_grad(raw)) {
            Matrix d = sd.asDiagonal() * g;
            tp.accumulate(raw, std::move(d));
        }
        if (!tp.needs_grad(x)) return;
        const Matrix& rv2 = tp.value(raw);
        const Matrix& xv2 = tp.value(x);
        const double w = static_cast<double>(xv2.cols());
        Matrix dx(xv2.rows(), xv2.cols());
        for (Eigen::Index r = 0; r < xv2.rows(); ++r) {
            const double dmean = g.row(r).sum();
            dx.row(r).setConstant(dmean / w);
            if (sd(r) > 0.0) {
                const double dsd = g.row(r).dot(rv2.row(r));
                dx.row(r).array() += dsd * (xv2.row(r).array() - mean(r)) / (w * sd(r));
            }
        }
        tp.accumulate(x, std::move(dx));
    });
}

}  // namespace nbeatstar::nn
