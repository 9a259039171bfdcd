#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adasamp/rng.hpp"
#include "adasamp/sampling.hpp"
#include "adasamp/timeseries.hpp"

namespace adasamp {

enum class ShiftCase { A, B, C };
enum class ShiftKind { AdditiveLevel, NegativeConstant };

inline char to_char(ShiftCase c) {
    return c == ShiftCase::A ? 'A' : (c == ShiftCase::B ? 'B' : 'C');
}

/// Synthetic sinusoid scenario with injected shift regions. Case A places a
/// shift over the recent window and forecast horizon (plus optionally distant
/// history), case B confines shifts to history that later reverts, case C
/// shifts only the future.
struct ScenarioSpec {
    ShiftCase shift_case = ShiftCase::A;
    int num_series = 20;
    int length = 600;  // T; generated series run to T + tau
    int period = 24;
    double amplitude = 1.0;
    double base_noise_sd = 0.1;
    std::vector<std::pair<int, int>> shift_regions;  // 1-based inclusive [start, end]
    ShiftKind shift_kind = ShiftKind::AdditiveLevel;
    double shift_magnitude = 2.0;
    std::uint64_t seed = 0;
};

/// Per-series boolean indicator of shifted steps, aligned with steps 1..T+tau.
struct ShiftMask {
    std::vector<std::vector<std::uint8_t>> per_series;

    int length() const {
        return per_series.empty() ? 0 : static_cast<int>(per_series.front().size());
    }
};

struct GeneratedScenario {
    Dataset dataset;  // series of length T + tau (the final tau steps are the test window)
    ShiftMask mask;
};

namespace detail {

inline void validate_scenario(const ScenarioSpec& spec, int context_length,
                              int prediction_length) {
    const int tau = prediction_length;
    const int total = spec.length + tau;
    const int c = context_length + tau;
    if (spec.num_series < 1) throw std::invalid_argument("scenario: need N >= 1 series");
    if (spec.period < 2) throw std::invalid_argument("scenario: period must be >= 2");
    if (spec.length < context_length + 2 * tau)
        throw std::invalid_argument("scenario: T must be >= context + 2*tau");
    int prev_end = 0;
    for (const auto& [start, end] : spec.shift_regions) {
        if (start < 1 || end > total || start > end)
            throw std::invalid_argument("scenario: region [" + std::to_string(start) +
                                        "," + std::to_string(end) + "] outside [1," +
                                        std::to_string(total) + "]");
        if (start <= prev_end)
            throw std::invalid_argument("scenario: shift regions overlap or are unsorted");
        prev_end = end;
    }
    switch (spec.shift_case) {
        case ShiftCase::A: {
            // One region must cover the final c steps plus the forecast window.
            const int need_start = spec.length - c + 1;
            bool covered = false;
            for (const auto& [start, end] : spec.shift_regions)
                if (start <= need_start && end >= total) covered = true;
            if (!covered)
                throw std::invalid_argument(
                    "scenario case A: no region covers the recent window and forecast "
                    "horizon [" + std::to_string(need_start) + "," + std::to_string(total) + "]");
            break;
        }
        case ShiftCase::B: {
            const int boundary = spec.length - c;
            for (const auto& [start, end] : spec.shift_regions)
                if (end >= boundary)
                    throw std::invalid_argument(
                        "scenario case B: region ending at " + std::to_string(end) +
                        " reaches the recent window (must end before " +
                        std::to_string(boundary) + ")");
            break;
        }
        case ShiftCase::C: {
            for (const auto& [start, end] : spec.shift_regions)
                if (start <= spec.length)
                    throw std::invalid_argument(
                        "scenario case C: region starting at " + std::to_string(start) +
                        " touches the training range (must start after " +
                        std::to_string(spec.length) + ")");
            break;
        }
    }
}

}  // namespace detail

/// Deterministic per (spec, lengths). Each series gets a random phase and a
/// small vertical offset so the N series are non-identical.
inline GeneratedScenario generate(const ScenarioSpec& spec, int context_length,
                                  int prediction_length) {
    detail::validate_scenario(spec, context_length, prediction_length);
    const int tau = prediction_length;
    const int total = spec.length + tau;
    constexpr double kTwoPi = 6.283185307179586476925286766559;

    GeneratedScenario out;
    out.dataset.context_length = context_length;
    out.dataset.prediction_length = prediction_length;
    out.dataset.frequency = "synthetic";
    out.dataset.series.reserve(spec.num_series);
    out.mask.per_series.reserve(spec.num_series);

    std::vector<std::uint8_t> mask(total, 0);
    for (const auto& [start, end] : spec.shift_regions)
        for (int t = start; t <= end; ++t) mask[t - 1] = 1;

    for (int i = 0; i < spec.num_series; ++i) {
        Rng rng(derive_seed(spec.seed, {stream_key("synth"), static_cast<std::uint64_t>(i)}));
        const double phase = rng.uniform(0.0, kTwoPi);
        const double offset = rng.uniform(-0.5, 0.5) * spec.amplitude;

        TimeSeries s;
        s.id = "synthetic-" + std::string(1, to_char(spec.shift_case)) + "-" + std::to_string(i);
        s.start_index = 1;
        s.values.resize(total);
        for (int t = 1; t <= total; ++t) {
            double v = spec.amplitude * std::sin(kTwoPi * t / spec.period + phase) +
                       offset + rng.normal(0.0, spec.base_noise_sd);
            if (mask[t - 1]) {
                if (spec.shift_kind == ShiftKind::AdditiveLevel)
                    v += spec.shift_magnitude;
                else
                    v = -std::abs(spec.shift_magnitude);
            }
            s.values[t - 1] = v;
        }
        out.dataset.series.push_back(std::move(s));
        out.mask.per_series.push_back(mask);
    }
    return out;
}

/// Total probability the learned pmf assigns to offsets whose training window
/// overlaps a masked step. The pmf support must match the valid start range
/// of the series the mask describes (offset 0 = newest start).
inline double mass_on_mask(const TruncatedIndexPMF& pmf,
                           const std::vector<std::uint8_t>& mask, int context_length,
                           int prediction_length) {
    const int window = context_length + prediction_length;
    const StartRange range{1, pmf.support_size};
    double mass = 0.0;
    for (int offset = 0; offset < pmf.support_size; ++offset) {
        const int start = offset_to_start(offset, range);  // 1-based
        bool overlaps = false;
        for (int t = start; t < start + window; ++t) {
            if (t - 1 >= static_cast<int>(mask.size())) break;
            if (mask[t - 1]) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) mass += pmf.probs[offset];
    }
    return mass;
}

// ---------------------------------------------------------------------------
// JSON scenario config and the mask JSONL dump.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json scenario_to_json(const ScenarioSpec& s) {
    nlohmann::ordered_json j;
    j["case"] = std::string(1, to_char(s.shift_case));
    j["num_series"] = s.num_series;
    j["length"] = s.length;
    j["period"] = s.period;
    j["amplitude"] = s.amplitude;
    j["base_noise_sd"] = s.base_noise_sd;
    nlohmann::ordered_json regions = nlohmann::ordered_json::array();
    for (const auto& [a, b] : s.shift_regions) regions.push_back({a, b});
    j["shift_regions"] = regions;
    j["shift_kind"] =
        s.shift_kind == ShiftKind::AdditiveLevel ? "additive_level" : "negative_constant";
    j["shift_magnitude"] = s.shift_magnitude;
    j["seed"] = s.seed;
    return j;
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    ScenarioSpec s;
    const std::string c = j.at("case").get<std::string>();
    if (c == "A" || c == "a")
        s.shift_case = ShiftCase::A;
    else if (c == "B" || c == "b")
        s.shift_case = ShiftCase::B;
    else if (c == "C" || c == "c")
        s.shift_case = ShiftCase::C;
    else
        throw std::invalid_argument("scenario: case must be A, B or C");
    s.num_series = j.value("num_series", s.num_series);
    s.length = j.value("length", s.length);
    s.period = j.value("period", s.period);
    s.amplitude = j.value("amplitude", s.amplitude);
    s.base_noise_sd = j.value("base_noise_sd", s.base_noise_sd);
    if (j.contains("shift_regions"))
        for (const auto& r : j.at("shift_regions"))
            s.shift_regions.emplace_back(r.at(0).get<int>(), r.at(1).get<int>());
    const std::string kind = j.value("shift_kind", std::string("additive_level"));
    if (kind == "additive_level")
        s.shift_kind = ShiftKind::AdditiveLevel;
    else if (kind == "negative_constant")
        s.shift_kind = ShiftKind::NegativeConstant;
    else
        throw std::invalid_argument("scenario: unknown shift_kind " + kind);
    s.shift_magnitude = j.value("shift_magnitude", s.shift_magnitude);
    s.seed = j.value("seed", s.seed);
    return s;
}

inline void save_mask_jsonl(const ShiftMask& mask, const std::vector<std::string>& ids,
                            const std::string& path) {
    if (ids.size() != mask.per_series.size())
        throw std::invalid_argument("mask dump: id count mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        nlohmann::ordered_json j;
        j["id"] = ids[i];
        auto arr = nlohmann::ordered_json::array();
        for (auto b : mask.per_series[i]) arr.push_back(b != 0);
        j["mask"] = std::move(arr);
        out << j.dump() << '\n';
    }
}

}  // namespace adasamp
