#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nbeatstar/data/dataset_io.hpp"
#include "nbeatstar/data/sampler.hpp"
#include "nbeatstar/data/synthetic.hpp"
#include "nbeatstar/data/windows.hpp"

using namespace nbeatstar;
using namespace nbeatstar::data;

namespace {

TimeSeries ramp(std::size_t T, const std::string& id = "S", double base = 100.0) {
    TimeSeries s{id, {2000, 1}, {}};
    for (std::size_t t = 0; t < T; ++t) s.values.push_back(base + static_cast<double>(t));
    return s;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(YearMonth, ArithmeticAndFormatting) {
    YearMonth m{2001, 11};
    EXPECT_EQ(m.plus(2), (YearMonth{2002, 1}));
    EXPECT_EQ(m.plus(-11), (YearMonth{2000, 12}));
    EXPECT_EQ(m.str(), "2001-11");
    EXPECT_EQ(YearMonth::parse("1991-03"), (YearMonth{1991, 3}));
    EXPECT_THROW(YearMonth::parse("1991-13"), Error);
}

TEST(LoadCsv, MinimalThreeRowFile) {
    std::istringstream in("series_id,year,month,value\nAT,2001,1,5000\nAT,2001,2,5200\nAT,2001,3,5100\n");
    auto ds = parse_csv(in);
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.series[0].id, "AT");
    EXPECT_EQ(ds.series[0].length(), 3u);
    EXPECT_EQ(ds.series[0].start, (YearMonth{2001, 1}));
    EXPECT_EQ(ds.series[0].values, (std::vector<double>{5000, 5200, 5100}));
    // the default configuration needs w + H + test months
    EXPECT_THROW(split(ds.series[0], SplitSpec{}, WindowShape{}), DataError);
}

TEST(LoadCsv, UnsortedRowsAndAnyColumnOrder) {
    std::istringstream in("value,month,series_id,year\n7,3,B,2001\n5,1,B,2001\n3,12,A,1999\n6,2,B,2001\n4,1,A,2000\n");
    auto ds = parse_csv(in);
    ASSERT_EQ(ds.size(), 2u);
    const auto* b = ds.find("B");
    ASSERT_NE(b, nullptr);
    EXPECT_EQ(b->values, (std::vector<double>{5, 6, 7}));
    const auto* a = ds.find("A");
    EXPECT_EQ(a->start, (YearMonth{1999, 12}));
    EXPECT_EQ(a->values, (std::vector<double>{3, 4}));
}

TEST(LoadCsv, NegativeValueNamesRowAndRule) {
    std::istringstream in("series_id,year,month,value\nAT,2001,1,5000\nAT,2001,2,-1\n");
    const auto msg = error_of([&] { parse_csv(in); });
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("value > 0"), std::string::npos) << msg;
}

TEST(LoadCsv, GapDuplicateAndParseErrors) {
    std::istringstream gap("series_id,year,month,value\nAT,2001,1,1\nAT,2001,3,1\n");
    EXPECT_NE(error_of([&] { parse_csv(gap); }).find("gap"), std::string::npos);
    std::istringstream dup("series_id,year,month,value\nAT,2001,1,1\nAT,2001,1,2\n");
    EXPECT_NE(error_of([&] { parse_csv(dup); }).find("duplicate"), std::string::npos);
    std::istringstream bad("series_id,year,month,value\nAT,2001,1,abc\n");
    EXPECT_NE(error_of([&] { parse_csv(bad); }).find("row 2"), std::string::npos);
    std::istringstream nohdr("AT,2001,1,5\n");
    EXPECT_THROW(parse_csv(nohdr), DataError);
}

TEST(LoadCsv, ShortSeriesDroppedWithWarningOrRejected) {
    std::ostringstream csv;
    csv << "series_id,year,month,value\n";
    for (int t = 0; t < 40; ++t) csv << "LONG," << 2000 + t / 12 << ',' << t % 12 + 1 << ",10" << t << '\n';
    for (int t = 0; t < 10; ++t) csv << "SHORT," << 2000 + t / 12 << ',' << t % 12 + 1 << ",10\n";
    LoadOptions strict{36, false};
    std::istringstream in1(csv.str());
    EXPECT_THROW(parse_csv(in1, strict), DataError);
    LoadOptions lenient{36, true};
    std::istringstream in2(csv.str());
    auto ds = parse_csv(in2, lenient);
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.series[0].id, "LONG");
    ASSERT_EQ(ds.warnings.size(), 1u);
    EXPECT_NE(ds.warnings[0].find("SHORT"), std::string::npos);
}

TEST(LoadDataset, CsvAndJsonProduceIdenticalSeries) {
    auto ds = make_synthetic(SynthSpec{});
    const auto dir = std::filesystem::temp_directory_path() / "nbeatstar_test_data";
    std::filesystem::create_directories(dir);
    {
        std::ofstream c(dir / "d.csv");
        write_csv(c, ds);
        std::ofstream j(dir / "d.json");
        j << to_json(ds).dump();
    }
    auto a = load_dataset(dir / "d.csv");
    auto b = load_dataset(dir / "d.json");
    ASSERT_EQ(a.size(), ds.size());
    ASSERT_EQ(b.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(a.series[i].id, b.series[i].id);
        EXPECT_EQ(a.series[i].start, b.series[i].start);
        EXPECT_EQ(a.series[i].values, b.series[i].values);  // bit-exact round trip
        EXPECT_EQ(a.series[i].values, ds.series[i].values);
    }
    std::filesystem::remove_all(dir);
}

TEST(LoadDataset, ReferenceCohortShape) {
    // 35 ids with the lengths of the reference cohort: 11x288, 6x204, 4x144, 2x96, 12x60.
    std::vector<std::size_t> lengths;
    for (auto [n, T] : std::vector<std::pair<int, std::size_t>>{{11, 288}, {6, 204}, {4, 144}, {2, 96}, {12, 60}}) {
        for (int i = 0; i < n; ++i) lengths.push_back(T);
    }
    std::ostringstream csv;
    csv << "series_id,year,month,value\n";
    for (std::size_t k = 0; k < lengths.size(); ++k) {
        const YearMonth start = YearMonth{2014, 12}.plus(1 - static_cast<int>(lengths[k]));
        for (std::size_t t = 0; t < lengths[k]; ++t) {
            auto m = start.plus(static_cast<int>(t));
            csv << "C" << k << ',' << m.year << ',' << m.month << ',' << 1000 + t << '\n';
        }
    }
    std::istringstream in(csv.str());
    auto ds = parse_csv(in, LoadOptions{36, false});
    ASSERT_EQ(ds.size(), 35u);
    std::map<std::size_t, int> hist;
    for (const auto& s : ds.series) {
        hist[s.length()]++;
        EXPECT_EQ(s.end(), (YearMonth{2014, 12}));
    }
    EXPECT_EQ(hist, (std::map<std::size_t, int>{{60, 12}, {96, 2}, {144, 4}, {204, 6}, {288, 11}}));
    EXPECT_EQ(ds.series[0].start, (YearMonth{1991, 1}));
}

TEST(Split, DefaultPartitions) {
    auto s60 = split(ramp(60), SplitSpec{}, WindowShape{});
    EXPECT_EQ(s60.train.size(), 36u);
    EXPECT_EQ(s60.val.size(), 12u);
    EXPECT_EQ(s60.test.size(), 12u);
    auto s288 = split(ramp(288), SplitSpec{}, WindowShape{});
    EXPECT_EQ(s288.train.size(), 264u);
    EXPECT_EQ(s288.val.size(), 12u);
    EXPECT_EQ(s288.test.size(), 12u);
    // the three regions tile the series in order
    EXPECT_EQ(s288.train.begin, 0u);
    EXPECT_EQ(s288.train.end, s288.val.begin);
    EXPECT_EQ(s288.val.end, s288.test.begin);
    EXPECT_EQ(s288.test.end, 288u);
}

TEST(Split, TooShortSeries) {
    EXPECT_THROW(split(ramp(35), SplitSpec{}, WindowShape{12, 12}), DataError);
    EXPECT_NO_THROW(split(ramp(36), SplitSpec{}, WindowShape{12, 12}));
}

TEST(Split, ZeroValidationMonths) {
    auto sp = split(ramp(40), SplitSpec{12, 0}, WindowShape{});
    EXPECT_TRUE(sp.val.empty());
    EXPECT_EQ(sp.train.size(), 28u);
}

TEST(MakeWindows, Counts) {
    auto s = ramp(60);
    EXPECT_EQ(make_windows(s, {0, 36}, {12, 12}).size(), 13u);
    EXPECT_EQ(make_windows(s, {10, 34}, {12, 12}).size(), 1u);
    EXPECT_EQ(make_windows(s, {0, 23}, {12, 12}).size(), 0u);
    EXPECT_THROW(make_windows(s, {0, 23}, {12, 12}, 0, false), DataError);
}

TEST(MakeWindows, RoundTripAtAnchor) {
    auto s = ramp(80);
    for (auto shape : {WindowShape{12, 12}, WindowShape{6, 3}, WindowShape{1, 1}}) {
        auto wins = make_windows(s, {5, 70}, shape);
        ASSERT_EQ(wins.size(), 65 - shape.lookback - shape.horizon + 1);
        for (const auto& w : wins) {
            for (std::size_t j = 0; j < shape.lookback; ++j) EXPECT_EQ(w.x[j], s.values[w.anchor + 1 - shape.lookback + j]);
            for (std::size_t j = 0; j < shape.horizon; ++j) EXPECT_EQ(w.y[j], s.values[w.anchor + 1 + j]);
        }
    }
}

TEST(Prepare, NoLeakageIntoHeldOutBlocks) {
    Dataset ds;
    for (std::size_t T : {36u, 48u, 60u, 100u}) ds.series.push_back(ramp(T, "S" + std::to_string(T)));
    for (auto stage : {Stage::Tuning, Stage::Final}) {
        auto prep = prepare(ds, SplitSpec{}, WindowShape{}, stage);
        ASSERT_EQ(prep.eval.size(), ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto sp = split(ds.series[i], SplitSpec{}, WindowShape{});
            const std::size_t limit = stage == Stage::Final ? sp.test.begin : sp.val.begin;
            for (const auto& w : prep.train[i]) EXPECT_LT(w.anchor + w.y.size(), limit + 1);
            const auto& e = prep.eval[i];
            EXPECT_EQ(e.anchor + 1, limit);
            EXPECT_EQ(e.y.front(), ds.series[i].values[limit]);
        }
    }
    // T = 36 in the tuning stage has a 12-month training region: no windows, but no error.
    auto tuning = prepare(ds, SplitSpec{}, WindowShape{}, Stage::Tuning);
    EXPECT_TRUE(tuning.train[0].empty());
    EXPECT_EQ(prepare(ds, SplitSpec{}, WindowShape{}, Stage::Final).train[0].size(), 1u);
}

TEST(Prepare, ConstantTargetRejectedWhenVarianceNeeded) {
    Dataset ds;
    TimeSeries s{"FLAT", {2000, 1}, std::vector<double>(40, 5.0)};
    ds.series.push_back(s);
    EXPECT_THROW(prepare(ds, SplitSpec{}, WindowShape{}, Stage::Final, true), DataError);
    EXPECT_NO_THROW(prepare(ds, SplitSpec{}, WindowShape{}, Stage::Final, false));
}

TEST(Sampler, EqualSeriesRepresentationBinomialBound) {
    auto s = ramp(200);
    std::vector<std::vector<Window>> per{make_windows(s, {0, 24}, {12, 12}, 0), make_windows(s, {0, 123}, {12, 12}, 1)};
    ASSERT_EQ(per[0].size(), 1u);
    ASSERT_EQ(per[1].size(), 100u);
    StratifiedSampler sampler(per, 2024);
    const int n = 10000;
    int first = 0;
    for (int i = 0; i < n; ++i) first += sampler.next_index().first == 0 ? 1 : 0;
    const double sigma = std::sqrt(n * 0.25);
    EXPECT_LT(std::abs(first - n / 2.0), 3.0 * sigma) << first;
}

TEST(Sampler, ChiSquareUniformOverSeries) {
    // 6 series of very different lengths; chi-square goodness of fit, 5 dof, alpha = 0.01 -> 15.086.
    auto s = ramp(300);
    std::vector<std::vector<Window>> per;
    for (std::size_t len : {24u, 30u, 60u, 100u, 200u, 300u}) per.push_back(make_windows(s, {0, len}, {12, 12}, per.size()));
    StratifiedSampler sampler(per, 99);
    const int n = 10000;
    std::vector<int> counts(per.size(), 0);
    for (int i = 0; i < n; ++i) counts[sampler.next_index().first]++;
    const double expected = static_cast<double>(n) / static_cast<double>(per.size());
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 15.086);
}

TEST(Sampler, WindowsUniformWithinSeries) {
    auto s = ramp(60);
    std::vector<std::vector<Window>> per{make_windows(s, {0, 33}, {12, 12})};  // 10 windows
    StratifiedSampler sampler(per, 5);
    std::vector<int> counts(10, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) counts[sampler.next_index().second]++;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    EXPECT_LT(chi2, 21.666);  // 9 dof, alpha = 0.01
}

TEST(Sampler, SingleSeriesDeterminismAndEmpty) {
    auto s = ramp(60);
    std::vector<std::vector<Window>> per{{}, make_windows(s, {0, 40}, {12, 12}), {}};
    StratifiedSampler a(per, 7), b(per, 7);
    EXPECT_EQ(a.active_series(), 1u);
    for (int i = 0; i < 500; ++i) {
        auto x = a.next_index();
        EXPECT_EQ(x.first, 1u);
        EXPECT_EQ(x, b.next_index());
    }
    std::vector<std::vector<Window>> empty(3);
    EXPECT_THROW(StratifiedSampler(empty, 1), DataError);
}

TEST(Synthetic, ShapeAndDeterminism) {
    SynthSpec spec;
    auto a = make_synthetic(spec);
    auto b = make_synthetic(spec);
    ASSERT_EQ(a.size(), 8u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.series[i].length(), 60u);
        EXPECT_EQ(a.series[i].values, b.series[i].values);
        for (double v : a.series[i].values) EXPECT_GT(v, 0.0);
    }
    spec.seed = 43;
    EXPECT_NE(make_synthetic(spec).series[0].values, a.series[0].values);
}

TEST(Synthetic, LinearTrend) {
    SynthSpec spec;
    spec.noise = 0.0;
    spec.amplitude = 0.0;
    auto ds = make_synthetic(spec);
    for (const auto& s : ds.series) {
        EXPECT_NEAR(s.values[12] / s.values[0], 1.02, 1e-12);
        for (std::size_t t = 2; t < s.length(); ++t) {
            EXPECT_NEAR(s.values[t] - 2 * s.values[t - 1] + s.values[t - 2], 0.0, 1e-9 * s.values[t]);
        }
    }
}

TEST(Synthetic, SeasonalAmplitude) {
    SynthSpec spec;
    spec.noise = 0.0;
    spec.trend = 0.0;
    auto ds = make_synthetic(spec);
    for (const auto& s : ds.series) {
        // 12 monthly samples of a sine are symmetric, so the midrange is the level
        const double hi = *std::max_element(s.values.begin(), s.values.begin() + 12);
        const double lo = *std::min_element(s.values.begin(), s.values.begin() + 12);
        const double swing = (hi - lo) / (hi + lo);
        EXPECT_LE(swing, 0.2 + 1e-12);
        EXPECT_GE(swing, 0.2 * std::cos(M_PI / 12.0) - 1e-12);
        for (std::size_t t = 12; t < s.length(); ++t) EXPECT_NEAR(s.values[t], s.values[t - 12], 1e-9 * s.values[t]);
    }
}
