#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nbeatstar/data/time_series.hpp"

namespace nbeatstar::data {

/// Sizes of the held-out blocks at the end of each series.
struct SplitSpec {
    std::size_t test_months = 12;
    std::size_t val_months = 12;  // 0 merges validation into training
};

/// Half-open index range [begin, end) into a series.
struct Region {
    std::size_t begin = 0;
    std::size_t end = 0;
    [[nodiscard]] std::size_t size() const { return end - begin; }
    [[nodiscard]] bool empty() const { return end == begin; }
};

struct SeriesSplit {
    Region train;
    Region val;
    Region test;
};

/// Partitions a series into train | val | test. Requires T >= w + H + test_months so that
/// the region preceding the test block holds at least one full window.
inline SeriesSplit split(const TimeSeries& s, const SplitSpec& spec, WindowShape shape) {
    const std::size_t T = s.length();
    const std::size_t need = std::max(min_series_length(shape, spec.test_months), spec.test_months + spec.val_months + 1);
    if (T < need) {
        throw DataError("series '" + s.id + "' is too short for the split: T=" + std::to_string(T) + ", needs " +
                        std::to_string(need));
    }
    SeriesSplit out;
    out.test = {T - spec.test_months, T};
    out.val = {out.test.begin - spec.val_months, out.test.begin};
    out.train = {0, out.val.begin};
    return out;
}

/// (lookback, target) pair cut from one series.
struct Window {
    std::vector<double> x;
    std::vector<double> y;
    std::string series_id;
    std::size_t series_index = 0;
    /// Position of the last lookback month in the source series.
    std::size_t anchor = 0;
};

/// Every stride-1 window whose lookback and target both lie inside `region`.
/// Yields region.size() - w - H + 1 windows, or none when the region is too short
/// (a DataError instead if `allow_empty` is false).
inline std::vector<Window> make_windows(const TimeSeries& s, Region region, WindowShape shape,
                                        std::size_t series_index = 0, bool allow_empty = true) {
    const std::size_t w = shape.lookback, H = shape.horizon;
    std::vector<Window> out;
    if (region.end > s.length() || region.begin > region.end) {
        throw DataError("series '" + s.id + "': region outside series bounds");
    }
    if (region.size() < w + H) {
        if (!allow_empty) {
            throw DataError("series '" + s.id + "': region of " + std::to_string(region.size()) +
                            " months cannot hold a window of " + std::to_string(w + H));
        }
        return out;
    }
    const std::size_t count = region.size() - w - H + 1;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t first = region.begin + k;
        Window win;
        win.x.assign(s.values.begin() + static_cast<long>(first), s.values.begin() + static_cast<long>(first + w));
        win.y.assign(s.values.begin() + static_cast<long>(first + w),
                     s.values.begin() + static_cast<long>(first + w + H));
        win.series_id = s.id;
        win.series_index = series_index;
        win.anchor = first + w - 1;
        out.push_back(std::move(win));
    }
    return out;
}

/// Window whose target is exactly `target` and whose lookback is the w months before it.
inline Window make_eval_window(const TimeSeries& s, Region target, std::size_t lookback, std::size_t series_index = 0) {
    if (target.begin < lookback || target.end > s.length()) {
        throw DataError("series '" + s.id + "': not enough history for a " + std::to_string(lookback) +
                        "-month lookback before " + s.month_at(std::min(target.begin, s.length() - 1)).str());
    }
    Window win;
    win.x.assign(s.values.begin() + static_cast<long>(target.begin - lookback),
                 s.values.begin() + static_cast<long>(target.begin));
    win.y.assign(s.values.begin() + static_cast<long>(target.begin), s.values.begin() + static_cast<long>(target.end));
    win.series_id = s.id;
    win.series_index = series_index;
    win.anchor = target.begin - 1;
    return win;
}

/// Which held-out block a run trains against.
enum class Stage {
    Tuning,  // train on the training region, evaluate on validation
    Final,   // train on training + validation, evaluate on test
};

/// Training windows and held-out evaluation windows for every series of a dataset.
struct PreparedData {
    std::vector<std::vector<Window>> train;  // per series
    std::vector<Window> eval;                // one per series
    std::vector<Region> train_regions;
};

/// Builds windows for `stage`. Training windows never reach into the held-out blocks.
/// With `require_target_variance`, a constant training target is a DataError (the
/// variance-normalized loss term is undefined for it).
inline PreparedData prepare(const Dataset& ds, const SplitSpec& spec, WindowShape shape, Stage stage,
                            bool require_target_variance = false) {
    PreparedData out;
    for (std::size_t i = 0; i < ds.series.size(); ++i) {
        const auto& s = ds.series[i];
        auto sp = split(s, spec, shape);
        Region train_region = stage == Stage::Final ? Region{sp.train.begin, sp.val.end} : sp.train;
        Region eval_region = stage == Stage::Final ? sp.test : sp.val;
        if (eval_region.size() != shape.horizon) {
            throw DataError("evaluation block of " + std::to_string(eval_region.size()) +
                            " months does not match horizon " + std::to_string(shape.horizon));
        }
        auto wins = make_windows(s, train_region, shape, i);
        if (require_target_variance) {
            for (const auto& w : wins) {
                bool constant = std::all_of(w.y.begin(), w.y.end(), [&](double v) { return v == w.y.front(); });
                if (constant) {
                    throw DataError("series '" + s.id + "': constant target after " + s.month_at(w.anchor).str() +
                                    " has zero variance");
                }
            }
        }
        out.train.push_back(std::move(wins));
        out.train_regions.push_back(train_region);
        out.eval.push_back(make_eval_window(s, eval_region, shape.lookback, i));
    }
    return out;
}

}  // namespace nbeatstar::data
