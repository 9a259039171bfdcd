#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adasamp/rng.hpp"
#include "adasamp/timeseries.hpp"

using namespace adasamp;

namespace {

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Dataset two_series_fixture() {
    Dataset ds;
    ds.context_length = 4;
    ds.prediction_length = 3;
    ds.frequency = "H";
    for (int i = 0; i < 2; ++i) {
        TimeSeries s;
        s.id = "s" + std::to_string(i);
        s.start_index = 1;
        for (int t = 0; t < 20; ++t) s.values.push_back(0.5 * t + i);
        ds.series.push_back(s);
    }
    return ds;
}

}  // namespace

TEST_CASE("valid_start_range arithmetic", "[timeseries]") {
    const auto r = valid_start_range(100, 24, 24);
    REQUIRE(r.lo == 1);
    REQUIRE(r.hi == 53);
    REQUIRE(r.size() == 53);

    const auto single = valid_start_range(48, 24, 24);
    REQUIRE(single.lo == 1);
    REQUIRE(single.hi == 1);

    REQUIRE_THROWS_AS(valid_start_range(47, 24, 24), std::invalid_argument);
    REQUIRE_THROWS_WITH(valid_start_range(47, 24, 24, "elec-7"),
                        Catch::Matchers::ContainsSubstring("elec-7") &&
                            Catch::Matchers::ContainsSubstring("48"));
}

TEST_CASE("valid_start_range size matches its closed form", "[timeseries]") {
    for (int len = 48; len < 200; len += 7)
        for (int ctx = 1; ctx < 30; ctx += 5) {
            const int tau = 10;
            if (len < ctx + tau) continue;
            const auto r = valid_start_range(len, ctx, tau);
            REQUIRE(r.size() == len - ctx - tau + 1);
        }
}

TEST_CASE("split_for_adaptation peels the validation channel", "[timeseries]") {
    Dataset ds;
    ds.context_length = 24;
    ds.prediction_length = 24;
    TimeSeries s;
    s.id = "a";
    for (int t = 1; t <= 100; ++t) s.values.push_back(static_cast<double>(t));
    ds.series.push_back(s);

    const auto split = split_for_adaptation(ds);
    REQUIRE(split.ada_train.series[0].length() == 76);
    REQUIRE(split.validation_labels[0].size() == 24);
    REQUIRE(split.validation_labels[0].front() == 77.0);
    REQUIRE(split.validation_labels[0].back() == 100.0);
}

TEST_CASE("split then concatenation is the identity", "[timeseries]") {
    const auto ds = two_series_fixture();
    const auto split = split_for_adaptation(ds);
    for (int i = 0; i < ds.num_series(); ++i) {
        auto rebuilt = split.ada_train.series[i].values;
        rebuilt.insert(rebuilt.end(), split.validation_labels[i].begin(),
                       split.validation_labels[i].end());
        REQUIRE(rebuilt == ds.series[i].values);
    }
}

TEST_CASE("split spec pins the recent-window arithmetic", "[timeseries]") {
    const auto spec = SplitSpec::make(100, 24, 24);
    REQUIRE(spec.training_end == 100);
    REQUIRE(spec.tau == 24);
    REQUIRE(spec.recent_window == 48);
    REQUIRE_THROWS_AS(SplitSpec::make(100, 24, 0), std::invalid_argument);
    // T - tau must leave at least context + 1 steps
    REQUIRE_THROWS_AS(SplitSpec::make(48, 24, 24), std::invalid_argument);
    REQUIRE_NOTHROW(SplitSpec::make(49, 24, 24));
}

TEST_CASE("degenerate horizon is rejected", "[timeseries]") {
    auto ds = two_series_fixture();
    ds.prediction_length = 0;
    REQUIRE_THROWS_AS(split_for_adaptation(ds), std::invalid_argument);
}

TEST_CASE("mean_scale basics", "[timeseries]") {
    const auto r = mean_scale({2.0, 2.0, 2.0});
    REQUIRE(r.scale == 2.0);
    REQUIRE(r.values == std::vector<double>{1.0, 1.0, 1.0});

    const auto zero = mean_scale({0.0, 0.0});
    REQUIRE(zero.scale == 1e-10);
    REQUIRE(zero.values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("mean_scale round-trips within 1e-12 relative", "[timeseries]") {
    Rng rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> window(32);
        for (double& v : window) v = rng.normal(0.0, 10.0);
        const auto scaled = mean_scale(window);
        for (std::size_t i = 0; i < window.size(); ++i) {
            const double back = scaled.values[i] * scaled.scale;
            REQUIRE(back == Catch::Approx(window[i]).epsilon(1e-12).margin(1e-12));
        }
    }
}

TEST_CASE("jsonl loader reads the two-series fixture", "[timeseries]") {
    const auto path = temp_file("adasamp_fixture.jsonl");
    write_file(path,
               R"({"id":"a","start":1,"values":[1,2,3,4,5,6,7,8,9,10,11,12]}
{"id":"b","start":5,"values":[2,4,6,8,10,12,14,16,18,20,22,24]}
)");
    const auto ds = load_dataset(path, DataFormat::Jsonl, 4, 4);
    REQUIRE(ds.num_series() == 2);
    REQUIRE(ds.series[1].start_index == 5);
    REQUIRE(ds.series[1].values[2] == 6.0);
}

TEST_CASE("jsonl loader flags NaN with its line", "[timeseries]") {
    const auto path = temp_file("adasamp_nan.jsonl");
    write_file(path,
               R"({"id":"a","start":1,"values":[1,2,3,4,5,6,7,8,9,10,11,12]}
{"id":"b","start":1,"values":[1,2,null,4,5,6,7,8,9,10,11,12]}
)");
    REQUIRE_THROWS_WITH(load_dataset(path, DataFormat::Jsonl, 4, 4),
                        Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("empty file means no series", "[timeseries]") {
    const auto path = temp_file("adasamp_empty.jsonl");
    write_file(path, "");
    REQUIRE_THROWS_WITH(load_dataset(path, DataFormat::Jsonl, 4, 4),
                        Catch::Matchers::ContainsSubstring("no series"));
}

TEST_CASE("malformed rows carry their line number", "[timeseries]") {
    const auto path = temp_file("adasamp_bad.jsonl");
    write_file(path, "{\"id\":\"a\",\"start\":1,\"values\":[1,2,3,4,5,6,7,8]}\nnot json\n");
    REQUIRE_THROWS_WITH(load_dataset(path, DataFormat::Jsonl, 2, 2),
                        Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("csv loader groups by id with contiguous t", "[timeseries]") {
    const auto path = temp_file("adasamp_data.csv");
    std::ostringstream os;
    os << "id,t,value\n";
    for (int t = 1; t <= 12; ++t) os << "x," << t << ',' << 1.5 * t << '\n';
    for (int t = 3; t <= 14; ++t) os << "y," << t << ',' << 2.0 * t << '\n';
    write_file(path, os.str());

    const auto ds = load_dataset(path, DataFormat::Csv, 4, 4);
    REQUIRE(ds.num_series() == 2);
    REQUIRE(ds.series[0].id == "x");
    REQUIRE(ds.series[1].start_index == 3);
    REQUIRE(ds.series[1].values[0] == 6.0);

    write_file(path, "id,t,value\nx,1,1\nx,3,2\n");
    REQUIRE_THROWS_WITH(load_dataset(path, DataFormat::Csv, 1, 1),
                        Catch::Matchers::ContainsSubstring("contiguous"));
}

TEST_CASE("jsonl round trip is byte-stable", "[timeseries]") {
    const auto ds = two_series_fixture();
    const auto path1 = temp_file("adasamp_rt1.jsonl");
    const auto path2 = temp_file("adasamp_rt2.jsonl");
    save_dataset_jsonl(ds, path1);
    const auto loaded =
        load_dataset(path1, DataFormat::Jsonl, ds.context_length, ds.prediction_length);
    REQUIRE(loaded.series == ds.series);
    save_dataset_jsonl(loaded, path2);
    REQUIRE(slurp(path1) == slurp(path2));
}
