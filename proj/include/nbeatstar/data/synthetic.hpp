#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "nbeatstar/data/time_series.hpp"

namespace nbeatstar::data {

/// Seasonal sinusoid times a linear yearly trend times multiplicative Gaussian noise.
struct SynthSpec {
    std::size_t series = 8;
    std::size_t months = 60;
    double amplitude = 0.2;   // seasonal swing as a fraction of level
    double trend = 0.02;      // growth per year
    double noise = 0.01;      // noise std as a fraction of value
    double level_min = 1000.0;
    double level_max = 50000.0;
    YearMonth start{2010, 1};
    std::uint64_t seed = 42;
};

inline Dataset make_synthetic(const SynthSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> level_dist(std::log(spec.level_min), std::log(spec.level_max));
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> eps(0.0, 1.0);

    Dataset ds;
    for (std::size_t i = 0; i < spec.series; ++i) {
        TimeSeries s;
        char id[16];
        std::snprintf(id, sizeof(id), "S%02zu", i + 1);
        s.id = id;
        s.start = spec.start;
        const double level = std::exp(level_dist(rng));
        const double phase = phase_dist(rng);
        for (std::size_t t = 0; t < spec.months; ++t) {
            const double years = static_cast<double>(t) / 12.0;
            const double season = 1.0 + spec.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 12.0 + phase);
            double v = level * (1.0 + spec.trend * years) * season * (1.0 + spec.noise * eps(rng));
            s.values.push_back(std::max(v, 1e-6 * level));
        }
        ds.series.push_back(std::move(s));
    }
    return ds;
}

}  // namespace nbeatstar::data
