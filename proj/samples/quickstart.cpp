// Trains a small pool on synthetic data and prints ensemble metrics against seasonal naive.
//
//   ./quickstart [pool_size]

#include <cstdlib>
#include <iostream>

#include "nbeatstar/nbeatstar.hpp"

using namespace nbeatstar;

int main(int argc, char** argv) {
    const std::size_t pool_size = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 4;

    data::SynthSpec synth;
    auto ds = data::make_synthetic(synth);

    model::ModelConfig cfg;
    cfg.fc_width = 64;
    train::TrainSchedule sched;
    sched.epochs = 5;
    sched.pool_size = pool_size;

    auto prep = data::prepare(ds, data::SplitSpec{}, cfg.shape(), data::Stage::Final, true);
    auto pool = train::build_pool(prep.train, cfg, sched);

    std::vector<model::NBeatsStar> models;
    for (const auto& m : pool.members) models.push_back(m.model);
    ensemble::EnsembleSpec spec;
    spec.ensemble_size = pool_size;
    spec.trials = 5;
    auto report = ensemble::run_trials(models, spec, prep.eval);

    std::vector<eval::SeriesErrors> naive;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto sp = data::split(ds.series[i], data::SplitSpec{}, cfg.shape());
        naive.push_back({ds.series[i].id, eval::point_errors(prep.eval[i].y, eval::seasonal_naive(ds.series[i], sp.test))});
    }
    auto base = eval::aggregate_metrics(naive);

    std::cout << "ensemble MAPE " << report.mean.aggregate.mape << "% (std over trials " << report.mape.std << ")\n"
              << "seasonal naive MAPE " << base.aggregate.mape << "%\n";

    auto p = model::model_forward(models.front(), prep.eval.front().x);
    auto parts = model::decompose(p.diagnostics);
    std::cout << "member 0, " << ds.series.front().id << ": first-month forecast " << p.forecast.front() << " =";
    for (const auto& c : parts) std::cout << ' ' << c.front();
    std::cout << '\n';
}
