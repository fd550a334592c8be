#pragma once

#include <vector>

#include "nbeatstar/data/windows.hpp"

namespace nbeatstar::eval {

/// Repeats the value observed one season earlier: f_j = y[begin + j - season * (1 + j / season)].
inline std::vector<double> seasonal_naive(const data::TimeSeries& s, data::Region target, std::size_t season = 12) {
    if (target.begin < season) {
        throw DataError("seasonal_naive: series '" + s.id + "' needs a full season of history before the target");
    }
    std::vector<double> out;
    for (std::size_t j = 0; j < target.size(); ++j) out.push_back(s.values[target.begin + j - season * (1 + j / season)]);
    return out;
}

}  // namespace nbeatstar::eval
