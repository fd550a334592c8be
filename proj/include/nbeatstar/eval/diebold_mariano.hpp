#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nbeatstar/util/error.hpp"

namespace nbeatstar::eval {

enum class DmLoss { Absolute, Squared };

struct DmResult {
    double statistic = 0.0;
    double p_value = 1.0;  // two-sided
    double mean_differential = 0.0;
    double long_run_variance = 0.0;
    std::size_t n = 0;
    bool degenerate = false;
    std::string note;
};

/// Standard normal upper-tail probability.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Inverse of the standard normal CDF by bisection (|error| < 1e-12).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must lie in (0, 1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        (1.0 - normal_sf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Equal-accuracy test on d_t = g(e1_t) - g(e2_t). The long-run variance is the
/// truncated autocovariance sum gamma_0 + 2 sum_{k=1}^{h-1} gamma_k (divisor n).
/// Negative DM favours model A. A constant differential or a non-positive
/// long-run variance yields a flagged degenerate result.
inline DmResult diebold_mariano(std::span<const double> e1, std::span<const double> e2, DmLoss loss = DmLoss::Absolute,
                                std::size_t horizon = 1) {
    if (e1.size() != e2.size()) throw Error("diebold_mariano: error series differ in length");
    if (e1.size() < 8) throw Error("diebold_mariano: needs at least 8 paired errors");
    if (horizon < 1) throw Error("diebold_mariano: horizon must be >= 1");
    const std::size_t n = e1.size();
    auto g = [loss](double e) { return loss == DmLoss::Absolute ? std::abs(e) : e * e; };
    std::vector<double> d(n);
    for (std::size_t t = 0; t < n; ++t) d[t] = g(e1[t]) - g(e2[t]);

    DmResult r;
    r.n = n;
    double sum = 0.0;
    for (double v : d) sum += v;
    r.mean_differential = sum / static_cast<double>(n);

    bool constant = true;
    for (double v : d) constant = constant && v == d.front();
    if (constant) {
        r.degenerate = true;
        r.note = d.front() == 0.0 ? "identical losses: zero differential" : "constant loss differential";
        return r;
    }

    auto gamma = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = k; t < n; ++t) s += (d[t] - r.mean_differential) * (d[t - k] - r.mean_differential);
        return s / static_cast<double>(n);
    };
    double lrv = gamma(0);
    for (std::size_t k = 1; k < horizon && k < n; ++k) lrv += 2.0 * gamma(k);
    r.long_run_variance = lrv;
    if (!(lrv > 0.0)) {
        r.degenerate = true;
        r.note = "non-positive long-run variance";
        return r;
    }
    r.statistic = r.mean_differential / std::sqrt(lrv / static_cast<double>(n));
    r.p_value = 2.0 * normal_sf(std::abs(r.statistic));
    return r;
}

struct DmDecision {
    double alpha = 0.01;
    double critical = 0.0;  // positive two-sided critical value
    bool reject = false;
    std::string text;
};

/// Two-sided decision at level alpha: reject equal accuracy when |DM| exceeds z_{1 - alpha/2}.
inline DmDecision dm_decision(double statistic, double alpha = 0.01) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("dm_decision: alpha must lie in (0, 1)");
    DmDecision d;
    d.alpha = alpha;
    d.critical = normal_quantile(1.0 - alpha / 2.0);
    d.reject = std::abs(statistic) > d.critical;
    if (!d.reject) {
        d.text = "do not reject equal accuracy";
    } else {
        d.text = statistic < 0.0 ? "reject equal accuracy: model A more accurate" : "reject equal accuracy: model B more accurate";
    }
    return d;
}

}  // namespace nbeatstar::eval
