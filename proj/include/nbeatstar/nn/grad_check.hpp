#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nbeatstar/nn/tensor.hpp"

namespace nbeatstar::nn {

/// Result of evaluating a scalar objective at one parameter point.
struct Evaluation {
    double value = 0.0;
    /// Branch signature (see Tape::signature); differing values mean a kink lies in between.
    std::uint64_t signature = 0;
    Gradients gradients;  // filled only when requested
};

using Objective = std::function<Evaluation(const ParameterSet&, bool want_gradients)>;

struct GradCheckOptions {
    double rel_step = 1e-5;        // h = rel_step * max(1, |theta|)
    double denom_floor = 1e-6;     // relative error denominator floor
};

struct BlockCheck {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // entries whose +-h probe crossed a kink
    bool pass = true;
};

struct GradCheckReport {
    std::vector<BlockCheck> blocks;
    double max_rel_error = 0.0;
    bool pass = true;

    [[nodiscard]] std::vector<std::string> failing_blocks() const {
        std::vector<std::string> out;
        for (const auto& b : blocks) {
            if (!b.pass) out.push_back(b.name);
        }
        return out;
    }
};

/// Compares the objective's analytic gradients with central differences, entry by entry.
inline GradCheckReport grad_check(const Objective& f, ParameterSet params, double tolerance,
                                  GradCheckOptions opts = {}) {
    Evaluation base = f(params, true);
    if (!std::isfinite(base.value)) throw NumericError("grad_check: objective is not finite at the base point");
    if (base.gradients.size() != params.size()) throw Error("grad_check: objective returned wrong gradient count");

    GradCheckReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        BlockCheck block;
        block.name = params.name(i);
        Matrix& theta = params.value(i);
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            const double orig = theta.data()[k];
            const double h = opts.rel_step * std::max(1.0, std::abs(orig));
            theta.data()[k] = orig + h;
            Evaluation plus = f(params, false);
            theta.data()[k] = orig - h;
            Evaluation minus = f(params, false);
            theta.data()[k] = orig;
            if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
                throw NumericError("grad_check: objective is not finite near '" + block.name + "'");
            }
            if (plus.signature != base.signature || minus.signature != base.signature) {
                ++block.skipped;
                continue;
            }
            const double numeric = (plus.value - minus.value) / (2.0 * h);
            const double analytic = base.gradients[i].data()[k];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.denom_floor});
            block.max_rel_error = std::max(block.max_rel_error, std::abs(numeric - analytic) / denom);
            ++block.checked;
        }
        block.pass = block.max_rel_error < tolerance;
        report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
        report.pass = report.pass && block.pass;
        report.blocks.push_back(std::move(block));
    }
    return report;
}

}  // namespace nbeatstar::nn
