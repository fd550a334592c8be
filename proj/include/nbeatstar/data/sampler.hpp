#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "nbeatstar/data/windows.hpp"

namespace nbeatstar::data {

/// Draws windows so that every series with at least one window is equally likely,
/// independent of how many windows it has: series first, then a window within it.
/// Non-owning; the window collections must outlive the sampler.
class StratifiedSampler {
public:
    StratifiedSampler(std::span<const std::vector<Window>> per_series, std::uint64_t seed)
        : per_series_(per_series), rng_(seed) {
        for (std::size_t i = 0; i < per_series.size(); ++i) {
            if (!per_series[i].empty()) nonempty_.push_back(i);
        }
        if (nonempty_.empty()) throw DataError("stratified sampler: every series has zero training windows");
    }

    /// (series index, window index) of the next draw.
    std::pair<std::size_t, std::size_t> next_index() {
        std::uniform_int_distribution<std::size_t> pick_series(0, nonempty_.size() - 1);
        const std::size_t s = nonempty_[pick_series(rng_)];
        std::uniform_int_distribution<std::size_t> pick_window(0, per_series_[s].size() - 1);
        return {s, pick_window(rng_)};
    }

    const Window& next() {
        auto [s, w] = next_index();
        return per_series_[s][w];
    }

    [[nodiscard]] std::size_t active_series() const { return nonempty_.size(); }

private:
    std::span<const std::vector<Window>> per_series_;
    std::vector<std::size_t> nonempty_;
    std::mt19937_64 rng_;
};

}  // namespace nbeatstar::data
