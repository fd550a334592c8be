#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "nbeatstar/model/nbeats_star.hpp"

namespace nbeatstar::model {

/// Checkpoint layout (JSON, version 1):
///
///   {
///     "format": "nbeatstar-checkpoint",
///     "version": 1,
///     "config_hash": "<16 hex digits>",
///     "model": { ModelConfig fields },
///     "provenance": { free-form: seeds, member index, ... },
///     "tensors": [ {"name": "block0.fc0.weight", "shape": [rows, cols], "data": [row-major values]}, ... ]
///   }
///
/// Doubles are written in shortest round-trip form, so save/load is bit-exact.
inline constexpr const char* kCheckpointFormat = "nbeatstar-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    NBeatsStar model;
    std::string config_hash;
    nlohmann::json provenance;
};

inline nlohmann::json checkpoint_to_json(const NBeatsStar& m, const std::string& config_hash,
                                         const nlohmann::json& provenance = nlohmann::json::object()) {
    nlohmann::json tensors = nlohmann::json::array();
    const auto& p = m.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& v = p.value(i);
        tensors.push_back({{"name", p.name(i)},
                           {"shape", {v.rows(), v.cols()}},
                           {"data", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"config_hash", config_hash},
            {"model", m.config()},        {"provenance", provenance},      {"tensors", tensors}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != kCheckpointFormat) throw Error("not a checkpoint: missing format tag");
    if (j.value("version", 0) != kCheckpointVersion) throw Error("unsupported checkpoint version");
    ModelConfig cfg = j.at("model").get<ModelConfig>();
    NBeatsStar m(cfg);
    const auto& tensors = j.at("tensors");
    if (tensors.size() != m.params().size()) throw Error("checkpoint tensor count does not match its model config");
    for (const auto& t : tensors) {
        const auto name = t.at("name").get<std::string>();
        auto idx = m.params().find(name);
        if (!idx) throw Error("checkpoint has unknown tensor '" + name + "'");
        Matrix& dst = m.params().value(*idx);
        auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
        auto data = t.at("data").get<std::vector<double>>();
        if (shape.size() != 2 || shape[0] != dst.rows() || shape[1] != dst.cols() ||
            data.size() != static_cast<std::size_t>(dst.size())) {
            throw Error("checkpoint tensor '" + name + "' has the wrong shape");
        }
        std::copy(data.begin(), data.end(), dst.data());
    }
    return Checkpoint{std::move(m), j.value("config_hash", ""), j.value("provenance", nlohmann::json::object())};
}

inline void save_checkpoint(const std::filesystem::path& path, const NBeatsStar& m, const std::string& config_hash,
                            const nlohmann::json& provenance = nlohmann::json::object()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out << checkpoint_to_json(m, config_hash, provenance).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("checkpoint '" + path.string() + "': " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace nbeatstar::model
