#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adasamp/timeseries.hpp"

namespace adasamp {

/// Quantile levels used by the CRPS estimator. Default is the nine-level
/// decile grid.
struct QuantileGrid {
    std::vector<double> levels;

    static QuantileGrid deciles() {
        QuantileGrid g;
        for (int i = 1; i <= 9; ++i) g.levels.push_back(i / 10.0);
        return g;
    }

    void validate() const {
        if (levels.empty()) throw std::invalid_argument("quantile grid is empty");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (!(levels[i] > 0.0 && levels[i] < 1.0))
                throw std::invalid_argument("quantile level must be in (0,1)");
            if (i > 0 && !(levels[i] > levels[i - 1]))
                throw std::invalid_argument("quantile levels must be strictly increasing");
        }
    }
};

struct EvalReport {
    double ncrps = 0.0;
    std::vector<double> per_quantile_losses;  // normalized, one per grid level
    double normalizer = 0.0;                  // sum of |targets|
    int num_series = 0;
    int num_steps = 0;
};

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["ncrps"] = r.ncrps;
    j["per_quantile_losses"] = r.per_quantile_losses;
    j["normalizer"] = r.normalizer;
    j["num_series"] = r.num_series;
    j["num_steps"] = r.num_steps;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.ncrps = j.at("ncrps").get<double>();
    r.per_quantile_losses = j.at("per_quantile_losses").get<std::vector<double>>();
    r.normalizer = j.at("normalizer").get<double>();
    r.num_series = j.at("num_series").get<int>();
    r.num_steps = j.at("num_steps").get<int>();
    return r;
}

/// Pinball loss with the factor-2 convention, so the q=0.5 term equals the
/// absolute error.
inline double quantile_loss(double y, double yhat_q, double q) {
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("quantile_loss: q must be in (0,1)");
    return 2.0 * (q * std::max(y - yhat_q, 0.0) +
                  (1.0 - q) * std::max(yhat_q - y, 0.0));
}

/// Empirical quantile of an unsorted sample set, linear interpolation between
/// order statistics (the position is q*(n-1)).
inline double empirical_quantile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 0) throw std::invalid_argument("empirical quantile of empty set");
    if (n == 1) return sorted[0];
    const double h = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// Normalized CRPS over a forecast set: mean over grid levels of
/// sum(quantile_loss) / (2 * sum|y|), with a single dataset-level normalizer.
inline EvalReport ncrps(const std::vector<SampleForecast>& forecasts,
                        const std::vector<std::vector<double>>& targets,
                        const QuantileGrid& grid) {
    grid.validate();
    if (forecasts.size() != targets.size())
        throw std::invalid_argument("ncrps: forecast/target count mismatch");
    if (forecasts.empty()) throw std::invalid_argument("ncrps: no forecasts");

    double normalizer = 0.0;
    int num_steps = 0;
    std::vector<double> level_sums(grid.levels.size(), 0.0);
    std::vector<double> column;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        const auto& fc = forecasts[i];
        const auto& y = targets[i];
        if (static_cast<int>(y.size()) != fc.tau)
            throw std::invalid_argument("ncrps: target length mismatch for series " +
                                        fc.series_id);
        if (fc.num_samples < 1)
            throw std::invalid_argument("ncrps: empty forecast for series " + fc.series_id);
        num_steps += fc.tau;
        for (int t = 0; t < fc.tau; ++t) {
            normalizer += std::abs(y[t]);
            column.resize(fc.num_samples);
            for (int s = 0; s < fc.num_samples; ++s) column[s] = fc.at(s, t);
            std::sort(column.begin(), column.end());
            for (std::size_t q = 0; q < grid.levels.size(); ++q) {
                const double yhat = empirical_quantile_sorted(column, grid.levels[q]);
                level_sums[q] += quantile_loss(y[t], yhat, grid.levels[q]);
            }
        }
    }
    if (!(normalizer > 0.0)) throw std::invalid_argument("ncrps: normalizer zero");

    EvalReport report;
    report.normalizer = normalizer;
    report.num_series = static_cast<int>(forecasts.size());
    report.num_steps = num_steps;
    report.per_quantile_losses.resize(level_sums.size());
    double acc = 0.0;
    for (std::size_t q = 0; q < level_sums.size(); ++q) {
        report.per_quantile_losses[q] = level_sums[q] / (2.0 * normalizer);
        acc += report.per_quantile_losses[q];
    }
    report.ncrps = acc / static_cast<double>(level_sums.size());
    return report;
}

/// Sample-based CRPS, mean|X-y| - 0.5*mean|X-X'| over ordered pairs, computed
/// in O(n log n) from order statistics.
inline double crps_samples(std::vector<double> samples, double y) {
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("crps_samples: need >= 2 samples");
    std::sort(samples.begin(), samples.end());
    double abs_err = 0.0;
    double pair_sum = 0.0;  // sum over i<j of (x_(j) - x_(i))
    for (std::size_t k = 0; k < n; ++k) {
        abs_err += std::abs(samples[k] - y);
        pair_sum += (2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0) * samples[k];
    }
    const double nd = static_cast<double>(n);
    return abs_err / nd - pair_sum / (nd * nd);
}

namespace detail {

/// Continued-fraction core of the regularized incomplete beta (Lentz).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-12;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b), tolerance ~1e-10.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// CDF of Student's t with nu degrees of freedom.
inline double student_t_cdf(double t, double nu) {
    if (nu <= 0.0) throw std::invalid_argument("student_t_cdf: nu must be > 0");
    if (t == 0.0) return 0.5;
    const double x = nu / (nu + t * t);
    const double half_tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
    return t > 0.0 ? 1.0 - half_tail : half_tail;
}

/// Two-sided paired t-test. All-zero differences return p = 1 by convention;
/// zero spread with a nonzero mean difference returns p = 0.
inline double paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("paired_t_test: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw std::invalid_argument("paired_t_test: need >= 2 pairs");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    bool all_zero = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) all_zero = false;
        ss += (d - mean) * (d - mean);
    }
    if (all_zero) return 1.0;
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return 0.0;
    const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const double nu = static_cast<double>(n - 1);
    // two-sided tail mass
    const double p = incomplete_beta(0.5 * nu, 0.5, nu / (nu + t * t));
    return std::min(1.0, std::max(0.0, p));
}

}  // namespace adasamp
