// Batch command-line front end: synth, train, evaluate, forecast, ablate, sweep, dm-test.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nbeatstar/cli/commands.hpp"

namespace cli = nbeatstar::cli;
namespace fs = std::filesystem;

namespace {

/// Flags that override fields of the JSON run config.
struct Overrides {
    std::string config;
    std::optional<std::string> dataset, output, stage, aggregation;
    std::optional<std::uint64_t> seed, model_seed;
    std::optional<std::size_t> pool_size, epochs, batches, batch_size, fc_width, fc_layers, blocks, threads, ensemble_size,
        trials;
    std::optional<double> tau, lambda, lr;
    std::vector<std::string> ablation;
    bool drop_short = false;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "Run config JSON (defaults apply to omitted fields)")->check(CLI::ExistingFile);
        app->add_option("--dataset", dataset, "Dataset CSV or JSON");
        app->add_option("-o,--output", output, "Output directory");
        app->add_option("--stage", stage, "final (train+val -> test) or tuning (train -> val)");
        app->add_option("--seed", seed, "Master seed of the pool");
        app->add_option("--model-seed", model_seed, "Model config seed field");
        app->add_option("--pool-size", pool_size, "Number of pool members");
        app->add_option("--epochs", epochs);
        app->add_option("--batches", batches, "Batches per epoch");
        app->add_option("--batch-size", batch_size);
        app->add_option("--lr", lr, "Adam learning rate");
        app->add_option("--fc-width", fc_width);
        app->add_option("--fc-layers", fc_layers);
        app->add_option("--blocks", blocks);
        app->add_option("--tau", tau);
        app->add_option("--lambda", lambda);
        app->add_option("--ablation", ablation, "noL2, noVar, noDestd, noReLU");
        app->add_option("--threads", threads, "Training threads (0 = all cores)");
        app->add_option("--ensemble-size", ensemble_size);
        app->add_option("--trials", trials);
        app->add_option("--aggregation", aggregation, "median or mean");
        app->add_flag("--drop-short", drop_short, "Drop series too short for the split instead of failing");
    }

    [[nodiscard]] cli::RunConfig resolve() const {
        cli::RunConfig c = config.empty() ? cli::RunConfig{} : cli::load_run_config(config);
        if (dataset) c.dataset = *dataset;
        if (output) c.output_dir = *output;
        if (stage) c.stage = cli::parse_stage(*stage);
        if (seed) c.schedule.seed = *seed;
        if (model_seed) c.model.seed = *model_seed;
        if (pool_size) c.schedule.pool_size = *pool_size;
        if (epochs) c.schedule.epochs = *epochs;
        if (batches) c.schedule.batches_per_epoch = *batches;
        if (batch_size) c.schedule.batch_size = *batch_size;
        if (lr) c.schedule.learning_rate = *lr;
        if (fc_width) c.model.fc_width = *fc_width;
        if (fc_layers) c.model.fc_layers = *fc_layers;
        if (blocks) c.model.blocks = *blocks;
        if (tau) c.model.tau = *tau;
        if (lambda) c.model.lambda = *lambda;
        if (!ablation.empty()) c.model.ablation = nbeatstar::model::Ablation::parse(ablation);
        if (threads) c.threads = *threads;
        if (ensemble_size) c.ensemble.ensemble_size = *ensemble_size;
        if (trials) c.ensemble.trials = *trials;
        if (aggregation) c.ensemble.aggregation = nbeatstar::ensemble::parse_aggregation(*aggregation);
        if (drop_short) c.drop_short_series = true;
        c.validate();
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nbeatstar: stacked residual MLP forecaster for monthly load series"};
    app.require_subcommand(1);

    nbeatstar::cli::SynthOptions synth;
    std::string synth_start = "2010-01";
    auto* c_synth = app.add_subcommand("synth", "Generate the seeded synthetic benchmark dataset");
    c_synth->add_option("-o,--output", synth.output, "Output file (.csv or .json)")->required();
    c_synth->add_option("--series", synth.spec.series);
    c_synth->add_option("--months", synth.spec.months);
    c_synth->add_option("--amplitude", synth.spec.amplitude, "Seasonal amplitude as a fraction of level");
    c_synth->add_option("--trend", synth.spec.trend, "Growth per year");
    c_synth->add_option("--noise", synth.spec.noise, "Multiplicative noise std");
    c_synth->add_option("--start", synth_start, "First month, YYYY-MM");
    c_synth->add_option("--seed", synth.spec.seed);

    Overrides train_ov;
    auto* c_train = app.add_subcommand("train", "Train the model pool");
    train_ov.attach(c_train);

    cli::EvaluateOptions ev;
    std::size_t ev_trials = 0, ev_size = 0;
    auto* c_eval = app.add_subcommand("evaluate", "Score bootstrap ensembles on the held-out block");
    c_eval->add_option("-m,--manifest", ev.manifest, "Pool manifest")->required()->check(CLI::ExistingFile);
    c_eval->add_option("-o,--output", ev.output, "Output directory (default: <run>/eval)");
    c_eval->add_option("--name", ev.model_name, "Model name in metrics.csv");
    c_eval->add_option("--trials", ev_trials);
    c_eval->add_option("--ensemble-size", ev_size);

    cli::ForecastOptions fc;
    std::string anchor;
    std::size_t fc_size = 0;
    std::string fc_agg;
    auto* c_fc = app.add_subcommand("forecast", "Forecast the next horizon for chosen series");
    c_fc->add_option("-m,--manifest", fc.manifest, "Pool manifest")->required()->check(CLI::ExistingFile);
    c_fc->add_option("-o,--output", fc.output, "Output directory (default: <run>/forecast)");
    c_fc->add_option("--series", fc.series, "Series ids (default: all)");
    c_fc->add_option("--anchor", anchor, "Last observed month used as input, YYYY-MM (default: series end)");
    c_fc->add_option("--ensemble-size", fc_size);
    c_fc->add_option("--aggregation", fc_agg);

    Overrides ablate_ov;
    auto* c_ablate = app.add_subcommand("ablate", "Train and score full, noL2, noVar, noDestd, noReLU");
    ablate_ov.attach(c_ablate);

    Overrides sweep_ov;
    std::string grid_path;
    auto* c_sweep = app.add_subcommand("sweep", "Grid search on the validation block");
    sweep_ov.attach(c_sweep);
    c_sweep->add_option("-g,--grid", grid_path, "Grid JSON: {\"field\": [values...]}")->required()->check(CLI::ExistingFile);

    cli::DmOptions dm;
    std::string dm_loss = "absolute";
    std::optional<double> dm_stat;
    auto* c_dm = app.add_subcommand("dm-test", "Diebold-Mariano test on two errors.csv files");
    c_dm->add_option("--a", dm.errors_a, "errors.csv of model A");
    c_dm->add_option("--b", dm.errors_b, "errors.csv of model B");
    c_dm->add_option("--loss", dm_loss, "absolute or squared");
    c_dm->add_option("--horizon", dm.horizon, "Autocovariance lags kept: h-1");
    c_dm->add_option("--alpha", dm.alpha);
    c_dm->add_flag("--percent", dm.use_percent, "Use percentage errors");
    c_dm->add_option("--statistic", dm_stat, "Only apply the decision rule to this statistic");
    c_dm->add_option("-o,--output", dm.output, "Write the result JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kUsageError;
    }

    try {
        if (c_synth->parsed()) {
            synth.spec.start = nbeatstar::data::YearMonth::parse(synth_start);
            return cli::cmd_synth(synth, std::cout);
        }
        if (c_train->parsed()) {
            cli::cmd_train(train_ov.resolve(), std::cout);
            return cli::kOk;
        }
        if (c_eval->parsed()) {
            if (ev_trials) ev.trials = ev_trials;
            if (ev_size) ev.ensemble_size = ev_size;
            cli::cmd_evaluate(ev, std::cout);
            return cli::kOk;
        }
        if (c_fc->parsed()) {
            if (!anchor.empty()) fc.anchor = nbeatstar::data::YearMonth::parse(anchor);
            if (fc_size) fc.ensemble_size = fc_size;
            if (!fc_agg.empty()) fc.aggregation = fc_agg;
            cli::cmd_forecast(fc, std::cout);
            return cli::kOk;
        }
        if (c_ablate->parsed()) {
            cli::cmd_ablate(ablate_ov.resolve(), std::cout);
            return cli::kOk;
        }
        if (c_sweep->parsed()) {
            auto grid = cli::detail::read_json(grid_path);
            cli::cmd_sweep(sweep_ov.resolve(), grid, std::cout);
            return cli::kOk;
        }
        if (c_dm->parsed()) {
            if (dm_loss == "absolute") dm.loss = nbeatstar::eval::DmLoss::Absolute;
            else if (dm_loss == "squared") dm.loss = nbeatstar::eval::DmLoss::Squared;
            else throw nbeatstar::ConfigError("--loss: expected 'absolute' or 'squared'");
            dm.statistic = dm_stat;
            if (!dm.statistic && (dm.errors_a.empty() || dm.errors_b.empty())) {
                throw nbeatstar::ConfigError("dm-test: --a and --b are required unless --statistic is given");
            }
            cli::cmd_dm_test(dm, std::cout);
            return cli::kOk;
        }
    } catch (const nbeatstar::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kRuntimeError;
    }
    return cli::kUsageError;
}
