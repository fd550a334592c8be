#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nbeatstar/nn/tensor.hpp"

namespace nbeatstar::nn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment accumulators shaped like the parameters.
struct AdamState {
    AdamOptions options;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::uint64_t step = 0;

    static AdamState init(const ParameterSet& params, AdamOptions options = {}) {
        AdamState s;
        s.options = options;
        s.m = zero_gradients(params);
        s.v = zero_gradients(params);
        return s;
    }
};

/// One bias-corrected Adam update. Gradients are validated before anything is
/// modified, so a NumericError leaves params and state untouched.
inline void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error("adam_step: gradient/state count does not match parameter count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params.value(i);
        if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols()) {
            throw Error("adam_step: gradient shape mismatch for '" + params.name(i) + "'");
        }
        if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient for parameter '" + params.name(i) + "'");
    }
    const auto& o = state.options;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto g = grads[i].array();
        state.m[i].array() = o.beta1 * state.m[i].array() + (1.0 - o.beta1) * g;
        state.v[i].array() = o.beta2 * state.v[i].array() + (1.0 - o.beta2) * g.square();
        params.value(i).array() -= o.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + o.eps);
    }
}

}  // namespace nbeatstar::nn
