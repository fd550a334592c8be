#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/data/sampler.hpp"
#include "nbeatstar/data/windows.hpp"
#include "nbeatstar/loss/loss.hpp"
#include "nbeatstar/model/nbeats_star.hpp"
#include "nbeatstar/nn/adam.hpp"
#include "nbeatstar/util/alloc.hpp"
#include "nbeatstar/util/hash.hpp"

namespace nbeatstar::train {

using data::Window;
using model::ModelConfig;
using model::NBeatsStar;
using nn::Matrix;

/// Optimization budget. Defaults are the reference settings except pool_size.
struct TrainSchedule {
    std::size_t epochs = 20;
    std::size_t batches_per_epoch = 100;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::size_t pool_size = 16;
    std::uint64_t seed = 1;  // master seed for the pool

    void validate() const {
        auto at_least_one = [](std::size_t v, const char* field) {
            if (v < 1) throw ConfigError(std::string("schedule.") + field + " must be >= 1");
        };
        at_least_one(epochs, "epochs");
        at_least_one(batches_per_epoch, "batches_per_epoch");
        at_least_one(batch_size, "batch_size");
        at_least_one(pool_size, "pool_size");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("schedule.learning_rate must be > 0");
    }

    [[nodiscard]] std::size_t total_steps() const { return epochs * batches_per_epoch; }
    bool operator==(const TrainSchedule&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainSchedule& s) {
    j = nlohmann::json{{"epochs", s.epochs},
                       {"batches_per_epoch", s.batches_per_epoch},
                       {"batch_size", s.batch_size},
                       {"learning_rate", s.learning_rate},
                       {"pool_size", s.pool_size},
                       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, TrainSchedule& s) {
    if (!j.is_object()) throw ConfigError("schedule: expected an object");
    const std::string p = "schedule.";
    model::detail::reject_unknown(j, {"epochs", "batches_per_epoch", "batch_size", "learning_rate", "pool_size", "seed"}, p);
    model::detail::read_field(j, "epochs", s.epochs, p);
    model::detail::read_field(j, "batches_per_epoch", s.batches_per_epoch, p);
    model::detail::read_field(j, "batch_size", s.batch_size, p);
    model::detail::read_field(j, "learning_rate", s.learning_rate, p);
    model::detail::read_field(j, "pool_size", s.pool_size, p);
    model::detail::read_field(j, "seed", s.seed, p);
}

/// Hash of everything that determines a member's weights besides its own seed.
inline std::string training_hash(const ModelConfig& cfg, const TrainSchedule& s) {
    ModelConfig c = cfg;
    c.seed = 0;
    nlohmann::json j{{"model", c},
                     {"schedule",
                      {{"epochs", s.epochs},
                       {"batches_per_epoch", s.batches_per_epoch},
                       {"batch_size", s.batch_size},
                       {"learning_rate", s.learning_rate}}}};
    return model::config_hash(j);
}

/// Loss components of one optimizer step.
struct StepLoss {
    double total = 0.0;
    double pmape = 0.0;
    double nmse = 0.0;
};

struct TrainedMember {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    NBeatsStar model;
    std::vector<StepLoss> trace;
    std::string config_hash;
    std::string checkpoint;  // path relative to the pool directory; empty if not persisted

    /// Mean total loss over the last epoch.
    [[nodiscard]] StepLoss final_loss(std::size_t batches_per_epoch) const {
        StepLoss m;
        if (trace.empty()) return m;
        const std::size_t n = std::min(batches_per_epoch, trace.size());
        for (std::size_t i = trace.size() - n; i < trace.size(); ++i) {
            m.total += trace[i].total;
            m.pmape += trace[i].pmape;
            m.nmse += trace[i].nmse;
        }
        m.total /= static_cast<double>(n);
        m.pmape /= static_cast<double>(n);
        m.nmse /= static_cast<double>(n);
        return m;
    }
};

/// Trains one model on stratified batches. Initialization uses a child of
/// `member_seed`, batch order another, so (config, schedule, member_seed)
/// determines the result bit for bit.
inline TrainedMember train_one(const std::vector<std::vector<Window>>& per_series, const ModelConfig& cfg,
                               const TrainSchedule& schedule, std::uint64_t member_seed) {
    cfg.validate();
    schedule.validate();
    std::size_t windows = 0;
    for (const auto& s : per_series) windows += s.size();
    if (windows == 0) throw DataError("train_one: datasets yield no training windows");
    util::keep_temporaries_on_heap();

    const auto w = static_cast<Eigen::Index>(cfg.lookback);
    const auto H = static_cast<Eigen::Index>(cfg.horizon);
    for (const auto& s : per_series) {
        for (const auto& win : s) {
            if (static_cast<Eigen::Index>(win.x.size()) != w || static_cast<Eigen::Index>(win.y.size()) != H) {
                throw DataError("train_one: window shape does not match model lookback/horizon");
            }
        }
    }

    TrainedMember member{0, member_seed, NBeatsStar::initialize(cfg, util::derive_seed(member_seed, 0)), {},
                         training_hash(cfg, schedule), {}};
    data::StratifiedSampler sampler(per_series, util::derive_seed(member_seed, 1));
    nn::AdamState adam = nn::AdamState::init(member.model.params(), nn::AdamOptions{schedule.learning_rate});
    const loss::LossConfig loss_cfg = cfg.loss_config();

    const auto B = static_cast<Eigen::Index>(schedule.batch_size);
    Matrix X(B, w), Y(B, H);
    std::vector<std::size_t> batch_series(schedule.batch_size);
    member.trace.reserve(schedule.total_steps());

    for (std::size_t step = 0; step < schedule.total_steps(); ++step) {
        for (Eigen::Index r = 0; r < B; ++r) {
            const Window& win = sampler.next();
            batch_series[static_cast<std::size_t>(r)] = win.series_index;
            for (Eigen::Index j = 0; j < w; ++j) X(r, j) = win.x[static_cast<std::size_t>(j)];
            for (Eigen::Index j = 0; j < H; ++j) Y(r, j) = win.y[static_cast<std::size_t>(j)];
        }
        nn::Tape tape;
        auto fwd = model::forward(tape, member.model, X);
        const Matrix& y_hat = tape.value(fwd.forecast);
        auto fail = [&](const std::string& what) {
            std::set<std::size_t> bad;
            for (Eigen::Index r = 0; r < B; ++r) {
                if (!y_hat.row(r).allFinite() || !Y.row(r).allFinite()) bad.insert(batch_series[static_cast<std::size_t>(r)]);
            }
            std::string ids;
            for (auto s : bad) {
                if (!ids.empty()) ids += ",";
                ids += per_series[s].empty() ? std::to_string(s) : per_series[s].front().series_id;
            }
            throw NumericError("training aborted at batch " + std::to_string(step) + ": " + what +
                               (ids.empty() ? std::string{} : " (offending series: " + ids + ")"));
        };
        if (!y_hat.allFinite()) fail("non-finite forecast");
        loss::LossBreakdown parts;
        nn::Var L = loss::loss_node(tape, fwd.forecast, Y, loss_cfg, &parts);
        if (!std::isfinite(parts.total)) fail("non-finite loss");
        member.trace.push_back(StepLoss{parts.total, parts.pmape, parts.nmse});
        nn::Gradients grads = tape.backward(L);
        try {
            nn::adam_step(member.model.params(), grads, adam);
        } catch (const NumericError& e) {
            fail(e.what());
        }
    }
    return member;
}

}  // namespace nbeatstar::train
