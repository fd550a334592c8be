#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/data/time_series.hpp"

namespace nbeatstar::data {

enum class DatasetFormat { Auto, Csv, Json };

struct LoadOptions {
    /// Series shorter than this are rejected (0 disables the check).
    std::size_t min_length = 0;
    /// Drop short series with a warning instead of failing.
    bool drop_short = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t row, const char* field) {
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
        char* end = nullptr;
        v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) {
            throw DataError("row " + std::to_string(row) + ": cannot parse " + field + " '" + s + "'");
        }
    } else {
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) {
            throw DataError("row " + std::to_string(row) + ": cannot parse " + field + " '" + s + "'");
        }
    }
    return v;
}

inline Dataset finalize(std::vector<TimeSeries> raw, const LoadOptions& opts) {
    Dataset ds;
    for (auto& s : raw) {
        if (opts.min_length > 0 && s.length() < opts.min_length) {
            std::string msg = "series '" + s.id + "' has " + std::to_string(s.length()) +
                              " months, needs at least " + std::to_string(opts.min_length);
            if (!opts.drop_short) throw DataError(msg);
            ds.warnings.push_back(msg + " (dropped)");
            continue;
        }
        validate(s);
        ds.series.push_back(std::move(s));
    }
    return ds;
}

}  // namespace detail

/// Parses long-form CSV `series_id,year,month,value`. Rows may be unsorted.
/// Row numbers in errors are 1-based file lines (the header is line 1).
inline Dataset parse_csv(std::istream& in, const LoadOptions& opts = {}) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset file: header required");
    auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : {"series_id", "year", "month", "value"}) {
        if (!col.count(name)) throw DataError(std::string("row 1: header is missing column '") + name + "'");
    }
    const std::size_t ci = col["series_id"], cy = col["year"], cm = col["month"], cv = col["value"];
    const std::size_t ncols = header.size();

    struct Obs {
        int month_index;
        double value;
        std::size_t row;
    };
    std::vector<std::string> order;
    std::map<std::string, std::vector<Obs>> by_id;

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != ncols) {
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(ncols) + " fields, got " +
                            std::to_string(cells.size()));
        }
        const std::string& id = cells[ci];
        if (id.empty()) throw DataError("row " + std::to_string(row) + ": empty series_id");
        int year = detail::parse_number<int>(cells[cy], row, "year");
        int month = detail::parse_number<int>(cells[cm], row, "month");
        if (month < 1 || month > 12) throw DataError("row " + std::to_string(row) + ": month must be in 1..12");
        double value = detail::parse_number<double>(cells[cv], row, "value");
        if (!std::isfinite(value) || value <= 0.0) {
            throw DataError("row " + std::to_string(row) + ": value " + cells[cv] + " violates rule: value > 0");
        }
        auto [it, inserted] = by_id.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(Obs{YearMonth{year, month}.index(), value, row});
    }

    std::vector<TimeSeries> raw;
    for (const auto& id : order) {
        auto& obs = by_id[id];
        std::stable_sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.month_index < b.month_index; });
        TimeSeries s;
        s.id = id;
        s.start = YearMonth::from_index(obs.front().month_index);
        for (std::size_t k = 0; k < obs.size(); ++k) {
            if (k > 0) {
                int d = obs[k].month_index - obs[k - 1].month_index;
                if (d == 0) {
                    throw DataError("row " + std::to_string(obs[k].row) + ": duplicate month " +
                                    YearMonth::from_index(obs[k].month_index).str() + " for series '" + id + "'");
                }
                if (d != 1) {
                    throw DataError("series '" + id + "': gap in month sequence between " +
                                    YearMonth::from_index(obs[k - 1].month_index).str() + " and " +
                                    YearMonth::from_index(obs[k].month_index).str());
                }
            }
            s.values.push_back(obs[k].value);
        }
        raw.push_back(std::move(s));
    }
    return detail::finalize(std::move(raw), opts);
}

/// JSON manifest: {"series": [{"id": "AT", "start": "2001-01", "values": [...]}, ...]}.
inline Dataset parse_json(const nlohmann::json& j, const LoadOptions& opts = {}) {
    if (!j.is_object() || !j.contains("series") || !j["series"].is_array()) {
        throw DataError("dataset manifest: expected object with array field 'series'");
    }
    std::vector<TimeSeries> raw;
    std::size_t k = 0;
    for (const auto& e : j["series"]) {
        std::string where = "dataset manifest series[" + std::to_string(k++) + "]";
        if (!e.contains("id") || !e.contains("start") || !e.contains("values")) {
            throw DataError(where + ": fields 'id', 'start', 'values' are required");
        }
        TimeSeries s;
        s.id = e["id"].get<std::string>();
        s.start = YearMonth::parse(e["start"].get<std::string>());
        for (const auto& v : e["values"]) {
            if (!v.is_number()) throw DataError(where + ": non-numeric value");
            double x = v.get<double>();
            if (!std::isfinite(x) || x <= 0.0) {
                throw DataError(where + " ('" + s.id + "') at " + s.month_at(s.values.size()).str() +
                                ": value violates rule: value > 0");
            }
            s.values.push_back(x);
        }
        for (const auto& prev : raw) {
            if (prev.id == s.id) throw DataError(where + ": duplicate id '" + s.id + "'");
        }
        raw.push_back(std::move(s));
    }
    return detail::finalize(std::move(raw), opts);
}

inline Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format = DatasetFormat::Auto,
                            const LoadOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file '" + path.string() + "'");
    if (format == DatasetFormat::Auto) format = path.extension() == ".json" ? DatasetFormat::Json : DatasetFormat::Csv;
    if (format == DatasetFormat::Json) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("dataset manifest '" + path.string() + "': " + e.what());
        }
        return parse_json(j, opts);
    }
    return parse_csv(in, opts);
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
    out << "series_id,year,month,value\n";
    out << std::setprecision(17);
    for (const auto& s : ds.series) {
        for (std::size_t i = 0; i < s.length(); ++i) {
            auto m = s.month_at(i);
            out << s.id << ',' << m.year << ',' << m.month << ',' << s.values[i] << '\n';
        }
    }
}

inline nlohmann::json to_json(const Dataset& ds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : ds.series) arr.push_back({{"id", s.id}, {"start", s.start.str()}, {"values", s.values}});
    return {{"series", arr}};
}

}  // namespace nbeatstar::data
