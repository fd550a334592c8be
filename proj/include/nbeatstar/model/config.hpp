#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/data/time_series.hpp"
#include "nbeatstar/loss/loss.hpp"
#include "nbeatstar/util/error.hpp"
#include "nbeatstar/util/hash.hpp"

namespace nbeatstar::model {

/// Components that can be switched off for ablation runs.
struct Ablation {
    bool no_l2 = false;     // drop the nMSE loss term
    bool no_var = false;    // nMSE without variance normalization
    bool no_destd = false;  // heads feed the residual chain directly, no Mean/Std restoration
    bool no_relu = false;   // identity instead of ReLU on the residual between blocks

    static constexpr const char* kNames[] = {"noL2", "noVar", "noDestd", "noReLU"};

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        if (no_l2) out.emplace_back("noL2");
        if (no_var) out.emplace_back("noVar");
        if (no_destd) out.emplace_back("noDestd");
        if (no_relu) out.emplace_back("noReLU");
        return out;
    }

    void enable(const std::string& name) {
        if (name == "noL2") no_l2 = true;
        else if (name == "noVar") no_var = true;
        else if (name == "noDestd") no_destd = true;
        else if (name == "noReLU") no_relu = true;
        else throw ConfigError("unknown ablation '" + name + "' (expected noL2, noVar, noDestd, noReLU)");
    }

    static Ablation parse(const std::vector<std::string>& names) {
        Ablation a;
        for (const auto& n : names) a.enable(n);
        return a;
    }

    bool operator==(const Ablation&) const = default;
};

/// Architecture and loss hyperparameters. Defaults are the reference settings.
struct ModelConfig {
    std::size_t lookback = 12;
    std::size_t horizon = 12;
    std::size_t blocks = 6;
    std::size_t fc_width = 512;
    std::size_t fc_layers = 3;
    bool sharing = true;
    double tau = 0.35;
    double lambda = 0.35;
    Ablation ablation;
    std::uint64_t seed = 0;

    void validate() const {
        auto at_least_one = [](std::size_t v, const char* field) {
            if (v < 1) throw ConfigError(std::string("model.") + field + " must be >= 1");
        };
        at_least_one(lookback, "lookback");
        at_least_one(horizon, "horizon");
        at_least_one(blocks, "blocks");
        at_least_one(fc_width, "fc_width");
        at_least_one(fc_layers, "fc_layers");
        loss_config().validate();
    }

    [[nodiscard]] data::WindowShape shape() const { return {lookback, horizon}; }

    [[nodiscard]] loss::LossConfig loss_config() const {
        return loss::LossConfig{tau, lambda, ablation.no_l2, ablation.no_var};
    }

    bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"lookback", c.lookback}, {"horizon", c.horizon},   {"blocks", c.blocks},
                       {"fc_width", c.fc_width}, {"fc_layers", c.fc_layers}, {"sharing", c.sharing},
                       {"tau", c.tau},           {"lambda", c.lambda},       {"ablation", c.ablation.names()},
                       {"seed", c.seed}};
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& prefix) {
    if (!j.contains(key)) return;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!j.at(key).is_number_unsigned()) throw ConfigError(prefix + key + ": must be a non-negative integer");
    }
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(prefix + key + ": wrong type");
    }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& prefix) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(prefix + it.key() + ": unknown field");
    }
}

}  // namespace detail

/// Missing fields keep their defaults; unknown fields are rejected.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (!j.is_object()) throw ConfigError("model: expected an object");
    const std::string p = "model.";
    detail::reject_unknown(j, {"lookback", "horizon", "blocks", "fc_width", "fc_layers", "sharing", "tau", "lambda",
                               "ablation", "seed"},
                           p);
    detail::read_field(j, "lookback", c.lookback, p);
    detail::read_field(j, "horizon", c.horizon, p);
    detail::read_field(j, "blocks", c.blocks, p);
    detail::read_field(j, "fc_width", c.fc_width, p);
    detail::read_field(j, "fc_layers", c.fc_layers, p);
    detail::read_field(j, "sharing", c.sharing, p);
    detail::read_field(j, "tau", c.tau, p);
    detail::read_field(j, "lambda", c.lambda, p);
    detail::read_field(j, "seed", c.seed, p);
    if (j.contains("ablation")) {
        std::vector<std::string> names;
        detail::read_field(j, "ablation", names, p);
        c.ablation = Ablation::parse(names);
    }
}

inline std::string config_hash(const nlohmann::json& canonical) { return util::to_hex(util::fnv1a(canonical.dump())); }

}  // namespace nbeatstar::model
