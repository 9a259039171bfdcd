#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adasamp/rng.hpp"
#include "adasamp/timeseries.hpp"

namespace adasamp {

// ---------------------------------------------------------------------------
// Parametric discrete distributions over window-start offsets. The offset
// argument k counts backwards from the most recent valid window start
// (offset 0 = newest window), so a geometric decay expresses recency
// weighting and a two-component mixture can place modes anywhere in history.
// ---------------------------------------------------------------------------

struct UniformTime {};

struct GeometricTime {
    double p = 0.5;  // in (0, 1]
};

struct NegativeBinomialTime {
    double r = 1.0;  // > 0, real-valued
    double p = 0.5;  // in (0, 1)
};

struct MixtureNB2Time {
    double w = 0.5;  // weight of component1, in [0, 1]
    NegativeBinomialTime component1;
    NegativeBinomialTime component2;
};

using TimeStepDistribution =
    std::variant<UniformTime, GeometricTime, NegativeBinomialTime, MixtureNB2Time>;

inline void validate_distribution(const TimeStepDistribution& dist) {
    struct Checker {
        void operator()(const UniformTime&) const {}
        void operator()(const GeometricTime& g) const {
            if (!(g.p > 0.0 && g.p <= 1.0))
                throw std::invalid_argument("geometric: p must be in (0,1], got " +
                                            std::to_string(g.p));
        }
        void operator()(const NegativeBinomialTime& nb) const {
            if (!(nb.r > 0.0))
                throw std::invalid_argument("negbin: r must be > 0, got " +
                                            std::to_string(nb.r));
            if (!(nb.p > 0.0 && nb.p < 1.0))
                throw std::invalid_argument("negbin: p must be in (0,1), got " +
                                            std::to_string(nb.p));
        }
        void operator()(const MixtureNB2Time& m) const {
            if (!(m.w >= 0.0 && m.w <= 1.0))
                throw std::invalid_argument("mixnb2: w must be in [0,1], got " +
                                            std::to_string(m.w));
            (*this)(m.component1);
            (*this)(m.component2);
        }
    };
    std::visit(Checker{}, dist);
}

namespace detail {

inline double negbin_pmf(const NegativeBinomialTime& nb, long long k) {
    // Log-space evaluation keeps large k and real-valued r stable.
    const double kd = static_cast<double>(k);
    const double lp = std::lgamma(kd + nb.r) - std::lgamma(kd + 1.0) -
                      std::lgamma(nb.r) + nb.r * std::log(nb.p) +
                      kd * std::log1p(-nb.p);
    return std::exp(lp);
}

}  // namespace detail

/// Probability of offset k under the unbounded distribution. The uniform
/// variant has no unbounded pmf; ask for its truncated form instead.
inline double pmf_at(const TimeStepDistribution& dist, long long k) {
    if (k < 0) throw std::invalid_argument("pmf_at: k must be >= 0");
    struct Eval {
        long long k;
        double operator()(const UniformTime&) const {
            throw std::invalid_argument("uniform defined only on truncated support");
        }
        double operator()(const GeometricTime& g) const {
            if (g.p == 1.0) return k == 0 ? 1.0 : 0.0;
            return std::exp(static_cast<double>(k) * std::log1p(-g.p)) * g.p;
        }
        double operator()(const NegativeBinomialTime& nb) const {
            return detail::negbin_pmf(nb, k);
        }
        double operator()(const MixtureNB2Time& m) const {
            return m.w * detail::negbin_pmf(m.component1, k) +
                   (1.0 - m.w) * detail::negbin_pmf(m.component2, k);
        }
    };
    return std::visit(Eval{k}, dist);
}

/// Finite-support realization of a distribution over offsets [0, S).
/// Probabilities are renormalized to sum to 1; the cumulative table makes
/// inverse-CDF sampling O(log S).
struct TruncatedIndexPMF {
    int support_size = 0;
    std::vector<double> probs;
    std::vector<double> cdf;  // inclusive prefix sums, cdf.back() == 1

    static TruncatedIndexPMF from_probs(std::vector<double> probs) {
        TruncatedIndexPMF pmf;
        pmf.support_size = static_cast<int>(probs.size());
        pmf.probs = std::move(probs);
        pmf.rebuild_cdf();
        return pmf;
    }

    void rebuild_cdf() {
        cdf.resize(probs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] < 0.0)
                throw std::invalid_argument("TruncatedIndexPMF: negative probability");
            acc += probs[i];
            cdf[i] = acc;
        }
        if (probs.empty() || std::abs(acc - 1.0) > 1e-9)
            throw std::invalid_argument("TruncatedIndexPMF: probabilities sum to " +
                                        std::to_string(acc) + ", expected 1");
        cdf.back() = 1.0;
    }
};

/// Restricts `dist` to offsets [0, S) and renormalizes. Exact O(S) precompute
/// beats rejection sampling here and surfaces pathological parameters (total
/// truncated mass below 1e-300) as an error instead of NaNs downstream.
inline TruncatedIndexPMF truncate_renormalize(const TimeStepDistribution& dist, int support_size) {
    if (support_size < 1)
        throw std::invalid_argument("truncate_renormalize: support size must be >= 1");
    validate_distribution(dist);
    TruncatedIndexPMF pmf;
    pmf.support_size = support_size;
    pmf.probs.resize(support_size);
    if (std::holds_alternative<UniformTime>(dist)) {
        const double u = 1.0 / static_cast<double>(support_size);
        std::fill(pmf.probs.begin(), pmf.probs.end(), u);
    } else {
        double total = 0.0;
        for (int k = 0; k < support_size; ++k) {
            pmf.probs[k] = pmf_at(dist, k);
            total += pmf.probs[k];
        }
        if (!(total >= 1e-300))
            throw std::invalid_argument("distribution degenerate on support of size " +
                                        std::to_string(support_size));
        for (double& p : pmf.probs) p /= total;
    }
    pmf.rebuild_cdf();
    return pmf;
}

/// Inverse-CDF draw of an offset in [0, S).
inline int sample_offset(const TruncatedIndexPMF& pmf, Rng& rng) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(pmf.cdf.begin(), pmf.cdf.end(), u);
    int idx = static_cast<int>(it - pmf.cdf.begin());
    if (idx >= pmf.support_size) idx = pmf.support_size - 1;
    return idx;
}

/// Maps a recency offset to an absolute window start (offset 0 = newest).
inline int offset_to_start(int offset, const StartRange& range) {
    if (offset < 0 || offset >= range.size())
        throw std::invalid_argument("offset " + std::to_string(offset) +
                                    " outside [0, " + std::to_string(range.size()) + ")");
    return range.hi - offset;
}

// ---------------------------------------------------------------------------
// JSON form: {"kind":"uniform"} | {"kind":"geometric","p":x} |
// {"kind":"negbin","r":x,"p":x} | {"kind":"mixnb2","w":x,"c1":{...},"c2":{...}}
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json distribution_to_json(const TimeStepDistribution& dist) {
    struct Writer {
        nlohmann::ordered_json operator()(const UniformTime&) const {
            return {{"kind", "uniform"}};
        }
        nlohmann::ordered_json operator()(const GeometricTime& g) const {
            return {{"kind", "geometric"}, {"p", g.p}};
        }
        nlohmann::ordered_json operator()(const NegativeBinomialTime& nb) const {
            return {{"kind", "negbin"}, {"r", nb.r}, {"p", nb.p}};
        }
        nlohmann::ordered_json operator()(const MixtureNB2Time& m) const {
            nlohmann::ordered_json j;
            j["kind"] = "mixnb2";
            j["w"] = m.w;
            j["c1"] = (*this)(m.component1);
            j["c2"] = (*this)(m.component2);
            return j;
        }
    };
    return std::visit(Writer{}, dist);
}

inline TimeStepDistribution distribution_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    TimeStepDistribution dist;
    if (kind == "uniform") {
        dist = UniformTime{};
    } else if (kind == "geometric") {
        dist = GeometricTime{j.at("p").get<double>()};
    } else if (kind == "negbin") {
        dist = NegativeBinomialTime{j.at("r").get<double>(), j.at("p").get<double>()};
    } else if (kind == "mixnb2") {
        auto component = [](const nlohmann::json& c) {
            if (c.at("kind").get<std::string>() != "negbin")
                throw std::invalid_argument("mixnb2 components must be negbin");
            return NegativeBinomialTime{c.at("r").get<double>(), c.at("p").get<double>()};
        };
        dist = MixtureNB2Time{j.at("w").get<double>(), component(j.at("c1")),
                              component(j.at("c2"))};
    } else {
        throw std::invalid_argument("unknown distribution kind: " + kind);
    }
    validate_distribution(dist);
    return dist;
}

}  // namespace adasamp
