#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace adasamp {

/// One univariate series. Time is abstract integer steps; `start_index` is
/// the step of values[0] and `frequency` on the owning Dataset is only a
/// label. Covariates are carried for ingestion compatibility but unused by
/// the forecaster.
struct TimeSeries {
    std::string id;
    long long start_index = 1;
    std::vector<double> values;
    std::vector<std::vector<double>> covariates;  // empty or one vector per step

    int length() const { return static_cast<int>(values.size()); }
};

struct Dataset {
    std::vector<TimeSeries> series;
    int context_length = 0;
    int prediction_length = 0;
    std::string frequency;

    int num_series() const { return static_cast<int>(series.size()); }
    int window_length() const { return context_length + prediction_length; }
};

/// Train/validation geometry: the final `tau` steps of [1, T] form the
/// validation channel and c = context + tau is the recent-window span.
struct SplitSpec {
    int training_end = 0;   // T
    int tau = 0;
    int recent_window = 0;  // c, always context + tau

    static SplitSpec make(int training_end, int context_length, int tau) {
        if (tau < 1) throw std::invalid_argument("SplitSpec: tau must be >= 1");
        if (training_end - tau < context_length + 1)
            throw std::invalid_argument(
                "SplitSpec: training end " + std::to_string(training_end) +
                " leaves no room for a window before the validation channel");
        return SplitSpec{training_end, tau, context_length + tau};
    }
};

/// Monte-Carlo forecast for one series: num_samples trajectories of length
/// tau, starting at step `forecast_start`.
struct SampleForecast {
    std::string series_id;
    int num_samples = 0;
    int tau = 0;
    std::vector<double> samples;  // row-major num_samples x tau
    long long forecast_start = 0;

    double at(int sample, int step) const { return samples[static_cast<std::size_t>(sample) * tau + step]; }
    double& at(int sample, int step) { return samples[static_cast<std::size_t>(sample) * tau + step]; }
};

/// Inclusive 1-based interval of valid window start positions.
struct StartRange {
    int lo = 1;
    int hi = 0;

    int size() const { return hi - lo + 1; }
};

inline StartRange valid_start_range(int series_length, int context_length,
                                    int prediction_length,
                                    const std::string& series_id = "") {
    const int window = context_length + prediction_length;
    if (series_length < window) {
        std::ostringstream os;
        os << "series " << (series_id.empty() ? "<unnamed>" : series_id)
           << " too short: length " << series_length
           << " < required minimum " << window
           << " (context " << context_length << " + horizon "
           << prediction_length << ")";
        throw std::invalid_argument(os.str());
    }
    return StartRange{1, series_length - window + 1};
}

inline void validate_dataset(const Dataset& ds) {
    if (ds.series.empty()) throw std::invalid_argument("dataset: no series");
    if (ds.context_length < 1)
        throw std::invalid_argument("dataset: context_length must be >= 1");
    if (ds.prediction_length < 1)
        throw std::invalid_argument("dataset: prediction_length must be >= 1");
    const int min_len = ds.context_length + 2 * ds.prediction_length;
    for (const auto& s : ds.series) {
        if (s.values.empty())
            throw std::invalid_argument("dataset: series " + s.id + " is empty");
        if (s.length() < min_len)
            throw std::invalid_argument(
                "dataset: series " + s.id + " length " +
                std::to_string(s.length()) + " < required minimum " +
                std::to_string(min_len) +
                " (context + 2*horizon, room for the validation channel)");
        for (std::size_t i = 0; i < s.values.size(); ++i)
            if (!std::isfinite(s.values[i]))
                throw std::invalid_argument("dataset: non-finite value in series " +
                                            s.id + " at index " + std::to_string(i));
        if (!s.covariates.empty() && s.covariates.size() != s.values.size())
            throw std::invalid_argument("dataset: covariate length mismatch in series " + s.id);
    }
}

struct AdaptationSplit {
    Dataset ada_train;
    std::vector<std::vector<double>> validation_labels;  // one per series, length tau
};

/// Splits off the validation channel: ada_train keeps z_{1:T-tau}, labels are
/// z_{T-tau+1:T}. Concatenating the two reconstructs the input exactly.
inline AdaptationSplit split_for_adaptation(const Dataset& ds) {
    validate_dataset(ds);
    const int tau = ds.prediction_length;
    AdaptationSplit out;
    out.ada_train = Dataset{{}, ds.context_length, ds.prediction_length, ds.frequency};
    out.ada_train.series.reserve(ds.series.size());
    out.validation_labels.reserve(ds.series.size());
    for (const auto& s : ds.series) {
        // enforces T - tau >= context + 1 per series
        SplitSpec::make(s.length(), ds.context_length, tau);
        TimeSeries head = s;
        head.values.assign(s.values.begin(), s.values.end() - tau);
        if (!s.covariates.empty())
            head.covariates.assign(s.covariates.begin(), s.covariates.end() - tau);
        out.ada_train.series.push_back(std::move(head));
        out.validation_labels.emplace_back(s.values.end() - tau, s.values.end());
    }
    return out;
}

struct ScaledWindow {
    std::vector<double> values;
    double scale = 1.0;
};

/// Mean-|x| scaling with an epsilon floor so all-zero windows stay defined.
inline ScaledWindow mean_scale(const std::vector<double>& window) {
    if (window.empty()) throw std::invalid_argument("mean_scale: empty window");
    constexpr double kEps = 1e-10;
    double acc = 0.0;
    for (double v : window) acc += std::abs(v);
    const double scale = std::max(acc / static_cast<double>(window.size()), kEps);
    ScaledWindow out;
    out.scale = scale;
    out.values.resize(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) out.values[i] = window[i] / scale;
    return out;
}

// ---------------------------------------------------------------------------
// File ingestion. JSONL: one object per line with keys id, start, values,
// covariates (optional). CSV: header id,t,value with rows grouped by id and
// t contiguous ascending.
// ---------------------------------------------------------------------------

enum class DataFormat { Jsonl, Csv };

inline DataFormat parse_format(const std::string& name) {
    if (name == "jsonl") return DataFormat::Jsonl;
    if (name == "csv") return DataFormat::Csv;
    throw std::invalid_argument("unknown data format: " + name);
}

namespace detail {

inline TimeSeries series_from_json(const nlohmann::json& j, int line_no) {
    TimeSeries s;
    try {
        s.id = j.at("id").get<std::string>();
        s.start_index = j.value("start", 1LL);
        s.values = j.at("values").get<std::vector<double>>();
        if (j.contains("covariates") && !j["covariates"].is_null())
            s.covariates = j["covariates"].get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": malformed series record: " + e.what());
    }
    for (std::size_t i = 0; i < s.values.size(); ++i)
        if (!std::isfinite(s.values[i]))
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": non-finite value in series " + s.id +
                                        " at index " + std::to_string(i));
    return s;
}

inline std::vector<TimeSeries> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::vector<TimeSeries> series;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": invalid JSON: " + e.what());
        }
        series.push_back(series_from_json(j, line_no));
    }
    return series;
}

inline std::vector<TimeSeries> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument(path + ": empty file, no series");
    if (line.rfind("id,t,value", 0) != 0)
        throw std::invalid_argument(path + ": expected header id,t,value");
    std::vector<TimeSeries> series;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": expected id,t,value");
        const std::string id = line.substr(0, c1);
        long long t = 0;
        double v = 0.0;
        try {
            t = std::stoll(line.substr(c1 + 1, c2 - c1 - 1));
            v = std::stod(line.substr(c2 + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": cannot parse t/value");
        }
        if (!std::isfinite(v))
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": non-finite value in series " + id);
        if (series.empty() || series.back().id != id) {
            for (const auto& prev : series)
                if (prev.id == id)
                    throw std::invalid_argument("line " + std::to_string(line_no) +
                                                ": rows for series " + id +
                                                " are not contiguous");
            series.push_back(TimeSeries{id, t, {}, {}});
        } else if (t != series.back().start_index + series.back().length()) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": t not contiguous ascending for series " + id);
        }
        series.back().values.push_back(v);
    }
    return series;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& path, DataFormat format,
                            int context_length, int prediction_length,
                            const std::string& frequency = "") {
    Dataset ds;
    ds.series = format == DataFormat::Jsonl ? detail::read_jsonl(path)
                                            : detail::read_csv(path);
    ds.context_length = context_length;
    ds.prediction_length = prediction_length;
    ds.frequency = frequency;
    if (ds.series.empty()) throw std::invalid_argument(path + ": no series");
    validate_dataset(ds);
    return ds;
}

/// Writes JSONL with keys in schema order (id, start, values, covariates).
inline void save_dataset_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& s : ds.series) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["start"] = s.start_index;
        j["values"] = s.values;
        if (!s.covariates.empty()) j["covariates"] = s.covariates;
        out << j.dump() << '\n';
    }
}

inline bool operator==(const TimeSeries& a, const TimeSeries& b) {
    return a.id == b.id && a.start_index == b.start_index &&
           a.values == b.values && a.covariates == b.covariates;
}

inline bool operator==(const Dataset& a, const Dataset& b) {
    return a.series == b.series && a.context_length == b.context_length &&
           a.prediction_length == b.prediction_length && a.frequency == b.frequency;
}

}  // namespace adasamp
