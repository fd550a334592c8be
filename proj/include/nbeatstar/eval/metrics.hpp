#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbeatstar/util/error.hpp"

namespace nbeatstar::eval {

/// Errors of one forecast point. PE > 0 means the forecast was too low.
struct PointError {
    double ape = 0.0;  // 100 |y - f| / y
    double pe = 0.0;   // 100 (y - f) / y
    double se = 0.0;   // (y - f)^2
};

inline std::vector<PointError> point_errors(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) throw Error("point_errors: actuals and forecasts differ in length");
    std::vector<PointError> out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0)) throw DataError("point_errors: actual at position " + std::to_string(i) + " is not positive");
        const double e = y[i] - y_hat[i];
        out.push_back(PointError{100.0 * std::abs(e) / y[i], 100.0 * e / y[i], e * e});
    }
    return out;
}

/// Quantile with linear interpolation between order statistics (position q * (n - 1)).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw Error("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double mean(std::span<const double> v) {
    if (v.empty()) throw Error("mean of an empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Moment skewness m3 / m2^1.5; 0 for a sample without spread.
inline double skewness(std::span<const double> v) {
    const double m = mean(v);
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

/// Non-excess moment kurtosis m4 / m2^2 (3 for a Gaussian); 0 for a sample without spread.
inline double kurtosis(std::span<const double> v) {
    const double m = mean(v);
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(v.size());
    m4 /= static_cast<double>(v.size());
    return m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
}

struct SeriesMetrics {
    std::string id;
    double medape = 0.0;
    double mape = 0.0;
    double iqr_ape = 0.0;
    double rmse = 0.0;
    double mpe = 0.0;
    std::size_t count = 0;
};

struct MetricsReport {
    std::vector<SeriesMetrics> per_series;
    SeriesMetrics aggregate;    // unweighted mean over series
    double mpe_skewness = 0.0;  // over per-series MPE values
    double mpe_kurtosis = 0.0;
    std::size_t series_count = 0;
    std::size_t point_count = 0;
};

struct SeriesErrors {
    std::string id;
    std::vector<PointError> errors;
};

inline SeriesMetrics series_metrics(const SeriesErrors& g) {
    if (g.errors.empty()) throw Error("aggregate_metrics: series '" + g.id + "' has no forecast points");
    std::vector<double> ape, pe;
    double se = 0.0;
    for (const auto& e : g.errors) {
        ape.push_back(e.ape);
        pe.push_back(e.pe);
        se += e.se;
    }
    SeriesMetrics m;
    m.id = g.id;
    m.mape = mean(ape);
    m.medape = median(ape);
    m.iqr_ape = quantile(ape, 0.75) - quantile(ape, 0.25);
    m.rmse = std::sqrt(se / static_cast<double>(g.errors.size()));
    m.mpe = mean(pe);
    m.count = g.errors.size();
    return m;
}

inline MetricsReport aggregate_metrics(std::span<const SeriesErrors> groups) {
    if (groups.empty()) throw Error("aggregate_metrics: no series");
    MetricsReport r;
    std::vector<double> mpes;
    for (const auto& g : groups) {
        r.per_series.push_back(series_metrics(g));
        mpes.push_back(r.per_series.back().mpe);
    }
    const double n = static_cast<double>(r.per_series.size());
    r.aggregate.id = "ALL";
    for (const auto& s : r.per_series) {
        r.aggregate.medape += s.medape / n;
        r.aggregate.mape += s.mape / n;
        r.aggregate.iqr_ape += s.iqr_ape / n;
        r.aggregate.rmse += s.rmse / n;
        r.aggregate.mpe += s.mpe / n;
        r.aggregate.count += s.count;
    }
    r.mpe_skewness = skewness(mpes);
    r.mpe_kurtosis = kurtosis(mpes);
    r.series_count = r.per_series.size();
    r.point_count = r.aggregate.count;
    return r;
}

inline nlohmann::json to_json(const SeriesMetrics& m) {
    return {{"id", m.id},     {"MedAPE", m.medape}, {"MAPE", m.mape}, {"IQR_APE", m.iqr_ape},
            {"RMSE", m.rmse}, {"MPE", m.mpe},       {"count", m.count}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& s : r.per_series) per.push_back(to_json(s));
    return {{"aggregate", to_json(r.aggregate)},
            {"per_series", per},
            {"mpe_skewness", r.mpe_skewness},
            {"mpe_kurtosis", r.mpe_kurtosis},
            {"series_count", r.series_count},
            {"point_count", r.point_count}};
}

/// Per-series table: model,country,MedAPE,MAPE,IQR_APE,RMSE,MPE.
inline std::string to_csv(const MetricsReport& r, const std::string& model_name, bool header = true) {
    std::ostringstream out;
    out.precision(17);
    if (header) out << "model,country,MedAPE,MAPE,IQR_APE,RMSE,MPE\n";
    auto row = [&](const SeriesMetrics& s) {
        out << model_name << ',' << s.id << ',' << s.medape << ',' << s.mape << ',' << s.iqr_ape << ',' << s.rmse << ','
            << s.mpe << '\n';
    };
    for (const auto& s : r.per_series) row(s);
    row(r.aggregate);
    return out.str();
}

}  // namespace nbeatstar::eval
