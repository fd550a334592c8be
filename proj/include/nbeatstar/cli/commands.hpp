#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/cli/run_config.hpp"
#include "nbeatstar/data/dataset_io.hpp"
#include "nbeatstar/data/synthetic.hpp"
#include "nbeatstar/ensemble/ensemble.hpp"
#include "nbeatstar/eval/baseline.hpp"
#include "nbeatstar/eval/diebold_mariano.hpp"
#include "nbeatstar/eval/metrics.hpp"
#include "nbeatstar/train/pool.hpp"

namespace nbeatstar::cli {

using nlohmann::json;

/// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

inline std::string csv_stamp(const std::string& config_hash, std::uint64_t master_seed) {
    return "# config_hash=" + config_hash + ",master_seed=" + std::to_string(master_seed) + "\n";
}

inline std::string timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

/// Run metadata that varies between otherwise identical runs lives here, not in result files.
inline void write_run_info(const fs::path& dir, const std::string& command, const json& extra = json::object()) {
    json j{{"command", command}, {"generated_at", timestamp()}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_json(dir / "run_info.json", j);
}

}  // namespace detail

/// Dataset plus windows for a run configuration.
struct LoadedRun {
    RunConfig config;
    data::Dataset dataset;
    data::PreparedData prepared;
};

inline LoadedRun load_run(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    LoadedRun r{cfg, {}, {}};
    data::LoadOptions opts;
    opts.min_length = data::min_series_length(cfg.model.shape(), cfg.split.test_months);
    opts.drop_short = cfg.drop_short_series;
    r.dataset = data::load_dataset(cfg.dataset, data::DatasetFormat::Auto, opts);
    for (const auto& w : r.dataset.warnings) log << "warning: " << w << '\n';
    if (r.dataset.series.empty()) throw DataError("dataset '" + cfg.dataset + "' has no usable series");
    const bool need_var = cfg.model.loss_config().uses_nmse() && !cfg.model.ablation.no_var;
    r.prepared = data::prepare(r.dataset, cfg.split, cfg.model.shape(), cfg.stage, need_var);
    return r;
}

/// Trains the pool for `run` into `pool_dir`.
inline train::Pool train_pool(const LoadedRun& run, const fs::path& pool_dir, std::ostream& log) {
    const auto& c = run.config;
    std::size_t windows = 0;
    for (const auto& s : run.prepared.train) windows += s.size();
    log << "training " << c.schedule.pool_size << " member(s) on " << run.dataset.size() << " series, " << windows
        << " windows (" << to_string(c.stage) << " stage)\n";
    json run_json = c;
    run_json["dataset"] = fs::weakly_canonical(c.dataset).string();
    run_json.erase("output_dir");
    run_json.erase("threads");
    train::PoolOptions opts;
    opts.directory = pool_dir;
    opts.threads = c.threads;
    opts.extra = json{{"run_config", run_json}, {"run_config_hash", c.hash()}, {"stage", to_string(c.stage)}};
    return train::build_pool(run.prepared.train, c.model, c.schedule, opts);
}

inline std::vector<model::NBeatsStar> pool_models(const train::Pool& p) {
    std::vector<model::NBeatsStar> out;
    for (const auto& m : p.members) out.push_back(m.model);
    return out;
}

struct Evaluation {
    ensemble::TrialsReport trials;
    eval::MetricsReport baseline;  // seasonal naive on the same held-out block
};

/// Trial-averaged ensemble metrics on the held-out block of the run's stage.
/// With `perfect`, forecasts are replaced by the actuals (test hook).
inline Evaluation evaluate_pool(const LoadedRun& run, const train::Pool& pool, bool perfect = false) {
    const auto& windows = run.prepared.eval;
    std::vector<nn::Matrix> forecasts;
    if (perfect) {
        nn::Matrix y(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(run.config.model.horizon));
        for (std::size_t i = 0; i < windows.size(); ++i) {
            for (std::size_t j = 0; j < windows[i].y.size(); ++j) y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = windows[i].y[j];
        }
        forecasts.assign(pool.members.size(), y);
    } else {
        auto models = pool_models(pool);
        forecasts = ensemble::member_forecasts(models, windows);
    }
    Evaluation ev;
    ev.trials = ensemble::run_trials(forecasts, run.config.ensemble, windows);

    std::vector<eval::SeriesErrors> groups;
    for (std::size_t i = 0; i < run.dataset.size(); ++i) {
        const auto& s = run.dataset.series[i];
        auto sp = data::split(s, run.config.split, run.config.model.shape());
        auto target = run.config.stage == data::Stage::Final ? sp.test : sp.val;
        groups.push_back({s.id, eval::point_errors(windows[i].y, eval::seasonal_naive(s, target))});
    }
    ev.baseline = eval::aggregate_metrics(groups);
    return ev;
}

/// Writes metrics.json, metrics.csv, errors.csv and mpe_hist.csv into `dir`.
inline void write_evaluation(const fs::path& dir, const LoadedRun& run, const Evaluation& ev, const std::string& model_name) {
    const auto& c = run.config;
    const std::string hash = c.hash();
    json metrics{{"format", "nbeatstar-metrics"},
                 {"config_hash", hash},
                 {"master_seed", c.schedule.seed},
                 {"model_name", model_name},
                 {"stage", to_string(c.stage)},
                 {"ensemble", c.ensemble},
                 {"report", ensemble::to_json(ev.trials)},
                 {"baseline", {{"seasonal_naive", eval::to_json(ev.baseline)}}}};
    detail::write_json(dir / "metrics.json", metrics);

    detail::write_text(dir / "metrics.csv", detail::csv_stamp(hash, c.schedule.seed) +
                                                eval::to_csv(ev.trials.mean, model_name) +
                                                eval::to_csv(ev.baseline, "seasonal_naive", false));

    std::ostringstream err;
    err.precision(17);
    err << detail::csv_stamp(hash, c.schedule.seed) << "series_id,year,month,actual,forecast,error,pe\n";
    const auto& windows = run.prepared.eval;
    const auto& f = ev.trials.first_trial_forecasts;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& s = run.dataset.series[windows[i].series_index];
        for (std::size_t j = 0; j < windows[i].y.size(); ++j) {
            const auto m = s.month_at(windows[i].anchor + 1 + j);
            const double a = windows[i].y[j];
            const double p = f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            err << s.id << ',' << m.year << ',' << m.month << ',' << a << ',' << p << ',' << a - p << ','
                << 100.0 * (a - p) / a << '\n';
        }
    }
    detail::write_text(dir / "errors.csv", err.str());

    // Histogram of per-series MPE (trial-averaged), 10 equal-width bins.
    std::vector<double> mpe;
    for (const auto& s : ev.trials.mean.per_series) mpe.push_back(s.mpe);
    const double lo = *std::min_element(mpe.begin(), mpe.end());
    const double hi = *std::max_element(mpe.begin(), mpe.end());
    const int bins = 10;
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    std::vector<int> counts(bins, 0);
    for (double v : mpe) counts[std::min(bins - 1, static_cast<int>((v - lo) / width))]++;
    std::ostringstream hist;
    hist.precision(17);
    hist << detail::csv_stamp(hash, c.schedule.seed) << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < bins; ++b) hist << lo + b * width << ',' << lo + (b + 1) * width << ',' << counts[b] << '\n';
    detail::write_text(dir / "mpe_hist.csv", hist.str());
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    data::SynthSpec spec;
    fs::path output;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& log) {
    if (o.output.empty()) throw ConfigError("synth: --output is required");
    if (o.spec.series < 1 || o.spec.months < 1) throw ConfigError("synth: --series and --months must be >= 1");
    auto ds = data::make_synthetic(o.spec);
    if (o.output.extension() == ".json") {
        detail::write_json(o.output, data::to_json(ds));
    } else {
        std::ostringstream s;
        data::write_csv(s, ds);
        detail::write_text(o.output, s.str());
    }
    log << "wrote " << ds.size() << " series x " << o.spec.months << " months to " << o.output.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// train

/// Trains the pool into <output_dir>/pool; returns the manifest path.
inline fs::path cmd_train(const RunConfig& cfg, std::ostream& log) {
    auto run = load_run(cfg, log);
    const fs::path pool_dir = fs::path(cfg.output_dir) / "pool";
    auto pool = train_pool(run, pool_dir, log);
    detail::write_run_info(pool_dir, "train");
    log << "manifest: " << (pool_dir / "manifest.json").string() << '\n';
    return pool_dir / "manifest.json";
}

/// Run configuration stored in a pool manifest.
inline RunConfig manifest_run_config(const json& manifest) {
    if (!manifest.contains("run_config")) throw ConfigError("manifest has no run_config; was it written by 'train'?");
    return parse_run_config(manifest["run_config"]);
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    fs::path manifest;
    fs::path output;  // default: <manifest dir>/../eval
    std::string model_name = "nbeatstar";
    std::optional<std::size_t> trials;
    std::optional<std::size_t> ensemble_size;
    bool perfect = false;
};

inline Evaluation cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
    auto pool = train::load_pool(o.manifest);
    RunConfig cfg = manifest_run_config(pool.manifest);
    if (o.trials) cfg.ensemble.trials = *o.trials;
    if (o.ensemble_size) cfg.ensemble.ensemble_size = *o.ensemble_size;
    auto run = load_run(cfg, log);
    auto ev = evaluate_pool(run, pool, o.perfect);
    const fs::path dir = o.output.empty() ? o.manifest.parent_path().parent_path() / "eval" : o.output;
    write_evaluation(dir, run, ev, o.model_name);
    detail::write_run_info(dir, "evaluate", {{"manifest", o.manifest.string()}});
    log << std::setprecision(6) << "MAPE " << ev.trials.mean.aggregate.mape << " (spread std " << ev.trials.mape.std
        << "), RMSE " << ev.trials.mean.aggregate.rmse << ", MPE " << ev.trials.mean.aggregate.mpe
        << "; seasonal naive MAPE " << ev.baseline.aggregate.mape << '\n';
    return ev;
}

// ---------------------------------------------------------------------------
// forecast

struct ForecastOptions {
    fs::path manifest;
    fs::path output;  // directory; default <manifest dir>/../forecast
    std::vector<std::string> series;  // empty: all
    std::optional<data::YearMonth> anchor;  // last lookback month; default: last observed month
    std::optional<std::size_t> ensemble_size;
    std::optional<std::string> aggregation;
};

struct SeriesForecast {
    std::string id;
    data::YearMonth anchor;
    std::vector<double> forecast;                         // ensemble aggregate
    std::vector<double> decomposition_total;              // mean of members
    std::vector<std::vector<double>> contributions;       // mean per-block contribution, original scale
};

inline std::vector<SeriesForecast> cmd_forecast(const ForecastOptions& o, std::ostream& log) {
    auto pool = train::load_pool(o.manifest);
    RunConfig cfg = manifest_run_config(pool.manifest);
    if (o.ensemble_size) cfg.ensemble.ensemble_size = *o.ensemble_size;
    if (o.aggregation) cfg.ensemble.aggregation = ensemble::parse_aggregation(*o.aggregation);
    cfg.validate();
    data::LoadOptions lo;
    lo.drop_short = true;
    auto ds = data::load_dataset(cfg.dataset, data::DatasetFormat::Auto, lo);

    std::vector<std::string> ids = o.series;
    if (ids.empty()) {
        for (const auto& s : ds.series) ids.push_back(s.id);
    }
    const std::size_t w = cfg.model.lookback;
    const auto draw = ensemble::draw_ensemble(pool.members.size(), cfg.ensemble, 0);

    std::vector<SeriesForecast> out;
    json decomp = json::array();
    std::ostringstream csv;
    csv.precision(17);
    csv << detail::csv_stamp(cfg.hash(), cfg.schedule.seed) << "series_id,year,month,forecast\n";
    for (const auto& id : ids) {
        const auto* s = ds.find(id);
        if (!s) throw DataError("forecast: unknown series '" + id + "'");
        const data::YearMonth anchor = o.anchor.value_or(s->end());
        const long pos = s->position_of(anchor);
        if (pos < 0) throw DataError("forecast: anchor " + anchor.str() + " lies outside series '" + id + "'");
        if (static_cast<std::size_t>(pos) + 1 < w) {
            throw DataError("forecast: anchor " + anchor.str() + " leaves fewer than " + std::to_string(w) +
                            " months of history for '" + id + "'");
        }
        std::vector<double> x(s->values.begin() + (pos + 1 - static_cast<long>(w)), s->values.begin() + pos + 1);

        std::vector<std::vector<double>> member_f;
        SeriesForecast sf{id, anchor, {}, std::vector<double>(cfg.model.horizon, 0.0),
                          std::vector<std::vector<double>>(cfg.model.blocks, std::vector<double>(cfg.model.horizon, 0.0))};
        const double inv = 1.0 / static_cast<double>(draw.size());
        for (auto k : draw) {
            auto p = model::model_forward(pool.members[k].model, x);
            auto parts = model::decompose(p.diagnostics);
            for (std::size_t m = 0; m < parts.size(); ++m) {
                for (std::size_t j = 0; j < parts[m].size(); ++j) sf.contributions[m][j] += inv * parts[m][j];
            }
            member_f.push_back(std::move(p.forecast));
        }
        for (const auto& c : sf.contributions) {
            for (std::size_t j = 0; j < c.size(); ++j) sf.decomposition_total[j] += c[j];
        }
        sf.forecast = ensemble::aggregate_forecasts(member_f, cfg.ensemble.aggregation);
        for (std::size_t j = 0; j < sf.forecast.size(); ++j) {
            auto m = anchor.plus(static_cast<int>(j) + 1);
            csv << id << ',' << m.year << ',' << m.month << ',' << sf.forecast[j] << '\n';
        }
        decomp.push_back({{"series_id", id},
                          {"anchor", anchor.str()},
                          {"forecast", sf.decomposition_total},
                          {"ensemble_forecast", sf.forecast},
                          {"block_contributions", sf.contributions}});
        out.push_back(std::move(sf));
    }
    const fs::path dir = o.output.empty() ? o.manifest.parent_path().parent_path() / "forecast" : o.output;
    detail::write_text(dir / "forecast.csv", csv.str());
    detail::write_json(dir / "decomposition.json",
                       json{{"config_hash", cfg.hash()},
                            {"master_seed", cfg.schedule.seed},
                            {"aggregation", "mean"},
                            {"ensemble_aggregation", ensemble::to_string(cfg.ensemble.aggregation)},
                            {"members", draw},
                            {"series", decomp}});
    detail::write_run_info(dir, "forecast", {{"manifest", o.manifest.string()}});
    log << "wrote forecasts for " << out.size() << " series to " << dir.string() << '\n';
    return out;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationRow {
    std::string variant;
    double mape = 0.0;
    double rmse = 0.0;
    double nmse_logged_max = 0.0;  // largest |nMSE| in any member's loss trace
    double pmape_final = 0.0;
};

inline const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> v{"full", "noL2", "noVar", "noDestd", "noReLU"};
    return v;
}

/// Trains and evaluates the full model and each single-component ablation with shared seeds.
inline std::vector<AblationRow> cmd_ablate(const RunConfig& base, std::ostream& log) {
    base.validate();
    std::vector<AblationRow> rows;
    json jrows = json::array();
    const fs::path root = fs::path(base.output_dir) / "ablation";
    for (const auto& v : ablation_variants()) {
        RunConfig c = base;
        c.model.ablation = model::Ablation{};
        if (v != "full") c.model.ablation.enable(v);
        log << "== " << v << '\n';
        auto run = load_run(c, log);
        auto pool = train_pool(run, root / v / "pool", log);
        auto ev = evaluate_pool(run, pool);
        write_evaluation(root / v / "eval", run, ev, v);

        AblationRow r{v, ev.trials.mean.aggregate.mape, ev.trials.mean.aggregate.rmse, 0.0, 0.0};
        for (const auto& m : pool.members) {
            for (const auto& s : m.trace) r.nmse_logged_max = std::max(r.nmse_logged_max, std::abs(s.nmse));
            r.pmape_final += m.final_loss(c.schedule.batches_per_epoch).pmape / static_cast<double>(pool.members.size());
        }
        jrows.push_back({{"variant", v},
                         {"MAPE", r.mape},
                         {"RMSE", r.rmse},
                         {"config_hash", c.hash()},
                         {"loss_trace", {{"nmse_max_abs", r.nmse_logged_max}, {"pmape_final_mean", r.pmape_final}}}});
        rows.push_back(r);
    }
    std::ostringstream csv;
    csv.precision(17);
    csv << detail::csv_stamp(base.hash(), base.schedule.seed) << "variant,MAPE,RMSE\n";
    for (const auto& r : rows) csv << r.variant << ',' << r.mape << ',' << r.rmse << '\n';
    detail::write_text(root / "ablation.csv", csv.str());
    detail::write_json(root / "ablation.json",
                       json{{"config_hash", base.hash()}, {"master_seed", base.schedule.seed}, {"rows", jrows}});
    detail::write_run_info(root, "ablate");
    for (const auto& r : rows) log << std::left << std::setw(8) << r.variant << " MAPE " << r.mape << "  RMSE " << r.rmse << '\n';
    return rows;
}

// ---------------------------------------------------------------------------
// sweep

/// Grid fields a sweep may vary, and where they live in the run config.
inline const std::map<std::string, std::string>& sweep_fields() {
    static const std::map<std::string, std::string> f{
        {"tau", "model"},      {"lambda", "model"},   {"fc_width", "model"},          {"blocks", "model"},
        {"fc_layers", "model"}, {"sharing", "model"}, {"lookback", "model"},          {"epochs", "schedule"},
        {"batch_size", "schedule"}, {"batches_per_epoch", "schedule"}, {"learning_rate", "schedule"}};
    return f;
}

struct SweepRow {
    json params;
    eval::SeriesMetrics metrics;
    bool best = false;
};

/// Parses a grid document {"field": [v1, v2, ...], ...} into its cartesian product.
inline std::vector<json> expand_grid(const json& grid) {
    if (!grid.is_object() || grid.empty()) throw ConfigError("grid: expected a non-empty object of arrays");
    std::vector<std::pair<std::string, json>> axes;
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        if (!sweep_fields().count(it.key())) throw ConfigError("grid." + it.key() + ": not a sweepable field");
        if (!it.value().is_array() || it.value().empty()) throw ConfigError("grid." + it.key() + ": expected a non-empty array");
        for (std::size_t i = 0; i < it.value().size(); ++i) {
            const auto& v = it.value()[i];
            if (!v.is_number() && !v.is_boolean()) {
                throw ConfigError("grid." + it.key() + "[" + std::to_string(i) + "]: expected a number or boolean");
            }
        }
        axes.emplace_back(it.key(), it.value());
    }
    std::vector<json> combos{json::object()};
    for (const auto& [key, values] : axes) {
        std::vector<json> next;
        for (const auto& c : combos) {
            for (const auto& v : values) {
                json n = c;
                n[key] = v;
                next.push_back(std::move(n));
            }
        }
        combos = std::move(next);
    }
    return combos;
}

/// Trains and scores every grid combination on the validation block (tuning stage).
inline std::vector<SweepRow> cmd_sweep(const RunConfig& base, const json& grid, std::ostream& log) {
    auto combos = expand_grid(grid);
    const fs::path root = fs::path(base.output_dir) / "sweep";
    std::vector<SweepRow> rows;
    for (std::size_t k = 0; k < combos.size(); ++k) {
        json cj = base;
        cj["stage"] = "tuning";
        for (auto it = combos[k].begin(); it != combos[k].end(); ++it) {
            cj[sweep_fields().at(it.key())][it.key()] = it.value();
        }
        RunConfig c = parse_run_config(cj);
        try {
            c.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("grid combination " + std::to_string(k) + " " + combos[k].dump() + ": " + e.what());
        }
        log << "== combination " << k << ": " << combos[k].dump() << '\n';
        auto run = load_run(c, log);
        char name[32];
        std::snprintf(name, sizeof(name), "combo_%03zu", k);
        auto pool = train_pool(run, root / name / "pool", log);
        auto ev = evaluate_pool(run, pool);
        write_evaluation(root / name / "eval", run, ev, name);
        rows.push_back(SweepRow{combos[k], ev.trials.mean.aggregate, false});
    }
    auto best = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.metrics.mape < b.metrics.mape; });
    best->best = true;

    std::ostringstream csv;
    csv.precision(17);
    csv << detail::csv_stamp(base.hash(), base.schedule.seed) << "combination";
    std::vector<std::string> keys;
    for (auto it = grid.begin(); it != grid.end(); ++it) keys.push_back(it.key());
    for (const auto& key : keys) csv << ',' << key;
    csv << ",MedAPE,MAPE,IQR_APE,RMSE,MPE,best\n";
    json jrows = json::array();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        csv << k;
        for (const auto& key : keys) csv << ',' << rows[k].params[key].dump();
        const auto& m = rows[k].metrics;
        csv << ',' << m.medape << ',' << m.mape << ',' << m.iqr_ape << ',' << m.rmse << ',' << m.mpe << ','
            << (rows[k].best ? 1 : 0) << '\n';
        jrows.push_back({{"params", rows[k].params}, {"metrics", eval::to_json(m)}, {"best", rows[k].best}});
    }
    detail::write_text(root / "sweep.csv", csv.str());
    detail::write_json(root / "sweep.json", json{{"config_hash", base.hash()}, {"master_seed", base.schedule.seed}, {"rows", jrows}});
    detail::write_run_info(root, "sweep");
    log << "best combination: " << best->params.dump() << " MAPE " << best->metrics.mape << '\n';
    return rows;
}

// ---------------------------------------------------------------------------
// dm-test

struct ErrorRecord {
    std::string key;  // series_id,year,month
    double error = 0.0;
    double pe = 0.0;
};

/// Reads an errors.csv written by evaluate ('#' lines are comments).
inline std::vector<ErrorRecord> read_error_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open error file '" + path.string() + "'");
    std::string line;
    std::vector<std::string> header;
    std::vector<ErrorRecord> out;
    std::size_t row = 0;
    std::map<std::string, std::size_t> col;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        auto cells = data::detail::split_csv_line(line);
        if (col.empty()) {
            for (std::size_t i = 0; i < cells.size(); ++i) col[cells[i]] = i;
            for (const char* c : {"series_id", "year", "month", "error"}) {
                if (!col.count(c)) throw DataError(path.string() + ": header lacks column '" + c + "'");
            }
            continue;
        }
        if (cells.size() < col.size()) throw DataError(path.string() + ": row " + std::to_string(row) + " is short");
        ErrorRecord r;
        r.key = cells[col["series_id"]] + "," + cells[col["year"]] + "," + cells[col["month"]];
        r.error = data::detail::parse_number<double>(cells[col["error"]], row, "error");
        r.pe = col.count("pe") ? data::detail::parse_number<double>(cells[col["pe"]], row, "pe") : 0.0;
        out.push_back(std::move(r));
    }
    return out;
}

struct DmOptions {
    fs::path errors_a;
    fs::path errors_b;
    eval::DmLoss loss = eval::DmLoss::Absolute;
    std::size_t horizon = 1;
    double alpha = 0.01;
    bool use_percent = false;  // use the pe column instead of raw errors
    std::optional<double> statistic;  // decide on a given statistic, skip the files
    fs::path output;
};

struct DmReport {
    eval::DmResult result;
    eval::DmDecision decision;
    json payload;
};

inline DmReport cmd_dm_test(const DmOptions& o, std::ostream& log) {
    DmReport rep;
    if (o.statistic) {
        rep.result.statistic = *o.statistic;
        rep.result.p_value = 2.0 * eval::normal_sf(std::abs(*o.statistic));
    } else {
        auto a = read_error_file(o.errors_a);
        auto b = read_error_file(o.errors_b);
        if (a.size() != b.size()) {
            throw DataError("dm-test: error files have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " rows");
        }
        std::vector<double> ea, eb;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].key != b[i].key) throw DataError("dm-test: files misaligned at data row " + std::to_string(i + 1) + " (" + a[i].key + " vs " + b[i].key + ")");
            ea.push_back(o.use_percent ? a[i].pe : a[i].error);
            eb.push_back(o.use_percent ? b[i].pe : b[i].error);
        }
        rep.result = eval::diebold_mariano(ea, eb, o.loss, o.horizon);
    }
    rep.decision = eval::dm_decision(rep.result.statistic, o.alpha);
    rep.payload = json{{"statistic", rep.result.statistic},
                       {"p_value", rep.result.p_value},
                       {"n", rep.result.n},
                       {"mean_differential", rep.result.mean_differential},
                       {"long_run_variance", rep.result.long_run_variance},
                       {"degenerate", rep.result.degenerate},
                       {"note", rep.result.note},
                       {"alpha", o.alpha},
                       {"critical_value", rep.decision.critical},
                       {"reject", !rep.result.degenerate && rep.decision.reject},
                       {"decision", rep.result.degenerate ? std::string("degenerate: ") + rep.result.note : rep.decision.text}};
    if (!o.output.empty()) detail::write_json(o.output, rep.payload);
    log << rep.payload.dump(2) << '\n';
    return rep;
}

}  // namespace nbeatstar::cli
