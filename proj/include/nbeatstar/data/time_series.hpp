#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "nbeatstar/util/error.hpp"

namespace nbeatstar::data {

/// Calendar month; month is 1-based.
struct YearMonth {
    int year = 2000;
    int month = 1;

    /// Months since year 0, January.
    [[nodiscard]] constexpr int index() const { return year * 12 + (month - 1); }

    static constexpr YearMonth from_index(int idx) {
        int y = idx >= 0 ? idx / 12 : (idx - 11) / 12;
        return YearMonth{y, idx - y * 12 + 1};
    }

    [[nodiscard]] constexpr YearMonth plus(int months) const { return from_index(index() + months); }

    constexpr auto operator<=>(const YearMonth& o) const { return index() <=> o.index(); }
    constexpr bool operator==(const YearMonth& o) const = default;

    [[nodiscard]] std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
        return buf;
    }

    /// Parses "YYYY-MM".
    static YearMonth parse(const std::string& s) {
        int y = 0;
        int m = 0;
        char dash = 0;
        if (std::sscanf(s.c_str(), "%d%c%d", &y, &dash, &m) != 3 || dash != '-' || m < 1 || m > 12) {
            throw DataError("invalid month '" + s + "', expected YYYY-MM");
        }
        return YearMonth{y, m};
    }
};

/// Lookback length w and horizon H.
struct WindowShape {
    std::size_t lookback = 12;
    std::size_t horizon = 12;
};

/// One entity's monthly demand history.
struct TimeSeries {
    std::string id;
    YearMonth start;
    std::vector<double> values;

    [[nodiscard]] std::size_t length() const { return values.size(); }
    [[nodiscard]] YearMonth month_at(std::size_t i) const { return start.plus(static_cast<int>(i)); }
    [[nodiscard]] YearMonth end() const { return month_at(values.size() - 1); }

    /// Position of `m` inside the series, or -1 when outside.
    [[nodiscard]] long position_of(YearMonth m) const {
        long p = static_cast<long>(m.index()) - start.index();
        return (p >= 0 && p < static_cast<long>(values.size())) ? p : -1;
    }
};

/// Throws DataError unless every value is finite and strictly positive and T >= min_length.
inline void validate(const TimeSeries& s, std::size_t min_length = 1) {
    if (s.id.empty()) throw DataError("series with empty id");
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        double v = s.values[i];
        if (!std::isfinite(v) || v <= 0.0) {
            throw DataError("series '" + s.id + "' at " + s.month_at(i).str() +
                            ": value must be finite and strictly positive");
        }
    }
    if (s.values.size() < min_length) {
        throw DataError("series '" + s.id + "' has " + std::to_string(s.values.size()) +
                        " months, needs at least " + std::to_string(min_length));
    }
}

/// Minimum length so that one training window fits before the test block.
inline std::size_t min_series_length(WindowShape shape, std::size_t test_months) {
    return shape.lookback + shape.horizon + test_months;
}

/// A collection of series with unique ids, in load order.
struct Dataset {
    std::vector<TimeSeries> series;
    std::vector<std::string> warnings;

    [[nodiscard]] const TimeSeries* find(const std::string& id) const {
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.id == id; });
        return it == series.end() ? nullptr : &*it;
    }
    [[nodiscard]] std::size_t size() const { return series.size(); }
};

}  // namespace nbeatstar::data
