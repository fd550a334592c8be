#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "nbeatstar/data/windows.hpp"
#include "nbeatstar/ensemble/ensemble.hpp"
#include "nbeatstar/model/config.hpp"
#include "nbeatstar/train/trainer.hpp"

namespace nbeatstar::cli {

namespace fs = std::filesystem;

inline std::string to_string(data::Stage s) { return s == data::Stage::Final ? "final" : "tuning"; }

inline data::Stage parse_stage(const std::string& s) {
    if (s == "final") return data::Stage::Final;
    if (s == "tuning") return data::Stage::Tuning;
    throw ConfigError("stage: expected 'final' or 'tuning', got '" + s + "'");
}

/// Everything a batch run needs, loaded from one JSON document.
///
///   {
///     "dataset": "data.csv",
///     "output_dir": "out",
///     "stage": "final",                 // or "tuning"
///     "threads": 0,                     // 0 = all cores
///     "drop_short_series": false,
///     "model":    { lookback, horizon, blocks, fc_width, fc_layers, sharing, tau, lambda, ablation, seed },
///     "schedule": { epochs, batches_per_epoch, batch_size, learning_rate, pool_size, seed },
///     "ensemble": { ensemble_size, trials, aggregation, seed },
///     "split":    { test_months, val_months }
///   }
///
/// Omitted fields take the reference defaults. Relative paths resolve against the
/// directory holding the config file.
struct RunConfig {
    std::string dataset;
    std::string output_dir = "out";
    data::Stage stage = data::Stage::Final;
    std::size_t threads = 0;
    bool drop_short_series = false;
    model::ModelConfig model;
    train::TrainSchedule schedule;
    ensemble::EnsembleSpec ensemble;
    data::SplitSpec split;

    void validate(bool require_dataset = true) const {
        model.validate();
        schedule.validate();
        ensemble.validate();
        if (split.test_months != model.horizon) {
            throw ConfigError("split.test_months must equal model.horizon (" + std::to_string(model.horizon) + ")");
        }
        if (stage == data::Stage::Tuning && split.val_months != model.horizon) {
            throw ConfigError("split.val_months must equal model.horizon for the tuning stage");
        }
        if (require_dataset) {
            if (dataset.empty()) throw ConfigError("dataset: path is required");
            if (!fs::exists(dataset)) throw ConfigError("dataset: file '" + dataset + "' does not exist");
        }
    }

    /// Hash over everything that affects results (paths and thread count excluded).
    [[nodiscard]] std::string hash() const {
        nlohmann::json j{{"stage", to_string(stage)},
                         {"drop_short_series", drop_short_series},
                         {"model", model},
                         {"schedule", schedule},
                         {"ensemble", ensemble},
                         {"split", {{"test_months", split.test_months}, {"val_months", split.val_months}}}};
        return model::config_hash(j);
    }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"dataset", c.dataset},
                       {"output_dir", c.output_dir},
                       {"stage", to_string(c.stage)},
                       {"threads", c.threads},
                       {"drop_short_series", c.drop_short_series},
                       {"model", c.model},
                       {"schedule", c.schedule},
                       {"ensemble", c.ensemble},
                       {"split", {{"test_months", c.split.test_months}, {"val_months", c.split.val_months}}}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    model::detail::reject_unknown(j, {"dataset", "output_dir", "stage", "threads", "drop_short_series", "model", "schedule",
                                      "ensemble", "split"},
                                  "");
    model::detail::read_field(j, "dataset", c.dataset, "");
    model::detail::read_field(j, "output_dir", c.output_dir, "");
    model::detail::read_field(j, "threads", c.threads, "");
    model::detail::read_field(j, "drop_short_series", c.drop_short_series, "");
    if (j.contains("stage")) {
        std::string s;
        model::detail::read_field(j, "stage", s, "");
        c.stage = parse_stage(s);
    }
    if (j.contains("model")) model::from_json(j["model"], c.model);
    if (j.contains("schedule")) train::from_json(j["schedule"], c.schedule);
    if (j.contains("ensemble")) ensemble::from_json(j["ensemble"], c.ensemble);
    if (j.contains("split")) {
        const auto& s = j["split"];
        if (!s.is_object()) throw ConfigError("split: expected an object");
        model::detail::reject_unknown(s, {"test_months", "val_months"}, "split.");
        model::detail::read_field(s, "test_months", c.split.test_months, "split.");
        model::detail::read_field(s, "val_months", c.split.val_months, "split.");
    }
}

inline RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir = {}) {
    RunConfig c;
    from_json(j, c);
    if (!base_dir.empty()) {
        if (!c.dataset.empty() && fs::path(c.dataset).is_relative()) c.dataset = (base_dir / c.dataset).lexically_normal().string();
        if (fs::path(c.output_dir).is_relative()) c.output_dir = (base_dir / c.output_dir).lexically_normal().string();
    }
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

}  // namespace nbeatstar::cli
