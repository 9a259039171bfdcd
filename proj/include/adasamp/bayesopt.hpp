#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "adasamp/rng.hpp"

namespace adasamp {

// ---------------------------------------------------------------------------
// Search space. Each dimension is continuous with a linear or log transform
// onto [0,1]; the distribution family is a categorical choice fixed per
// optimization run (callers launch one run per family and keep the winner).
// ---------------------------------------------------------------------------

enum class Transform { Linear, Log };

struct DimensionSpec {
    std::string name;
    Transform transform = Transform::Linear;
    double lo = 0.0;
    double hi = 1.0;

    void validate() const {
        if (!(lo < hi))
            throw std::invalid_argument("dimension " + name + ": lo must be < hi");
        if (transform == Transform::Log && !(lo > 0.0))
            throw std::invalid_argument("dimension " + name +
                                        ": log transform requires lo > 0");
    }

    double to_unit(double x) const {
        if (transform == Transform::Log)
            return (std::log(x) - std::log(lo)) / (std::log(hi) - std::log(lo));
        return (x - lo) / (hi - lo);
    }

    double from_unit(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        if (transform == Transform::Log)
            return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
        return lo + u * (hi - lo);
    }
};

struct SearchSpace {
    std::vector<DimensionSpec> dims;
    std::string family;  // categorical tag: which distribution family this space covers

    void validate() const {
        if (dims.empty()) throw std::invalid_argument("search space has no dimensions");
        for (const auto& d : dims) d.validate();
    }

    int size() const { return static_cast<int>(dims.size()); }

    std::vector<double> from_unit(const std::vector<double>& u) const {
        std::vector<double> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) x[i] = dims[i].from_unit(u[i]);
        return x;
    }

    std::vector<double> to_unit(const std::vector<double>& x) const {
        std::vector<double> u(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) u[i] = dims[i].to_unit(x[i]);
        return u;
    }
};

enum class TrialStatus { Running, Stopped, Completed, Failed };

inline const char* to_string(TrialStatus s) {
    switch (s) {
        case TrialStatus::Running: return "running";
        case TrialStatus::Stopped: return "stopped";
        case TrialStatus::Completed: return "completed";
        case TrialStatus::Failed: return "failed";
    }
    return "?";
}

inline TrialStatus trial_status_from_string(const std::string& s) {
    if (s == "running") return TrialStatus::Running;
    if (s == "stopped") return TrialStatus::Stopped;
    if (s == "completed") return TrialStatus::Completed;
    if (s == "failed") return TrialStatus::Failed;
    throw std::invalid_argument("unknown trial status: " + s);
}

struct TrialRecord {
    int trial_id = 0;
    std::vector<double> config;                      // raw (untransformed) values
    std::vector<std::pair<int, double>> rung_results;  // (epochs, loss), ascending epochs
    TrialStatus status = TrialStatus::Running;

    double loss_at(int resource) const {
        for (const auto& [r, l] : rung_results)
            if (r == resource) return l;
        throw std::out_of_range("trial " + std::to_string(trial_id) +
                                " has no result at resource " + std::to_string(resource));
    }
};

struct SchedulerConfig {
    int random_init_count = 44;
    int max_completed_trials = 200;
    std::vector<int> rungs = {11, 33, 100};
    int reduction_factor = 3;  // eta
    int max_concurrency = 2;
    int max_total_trials = 0;  // 0 = derived from max_completed_trials
    int ei_candidates = 1000;

    void validate() const {
        if (random_init_count < 1)
            throw std::invalid_argument("scheduler: random_init_count must be >= 1");
        if (max_completed_trials < 1)
            throw std::invalid_argument("scheduler: max_completed_trials must be >= 1");
        if (rungs.empty()) throw std::invalid_argument("scheduler: no rung levels");
        for (std::size_t i = 0; i < rungs.size(); ++i) {
            if (rungs[i] < 1) throw std::invalid_argument("scheduler: rung must be >= 1");
            if (i > 0 && rungs[i] <= rungs[i - 1])
                throw std::invalid_argument("scheduler: rungs must be strictly ascending");
        }
        if (reduction_factor < 2)
            throw std::invalid_argument("scheduler: reduction factor must be >= 2");
        if (max_concurrency < 1)
            throw std::invalid_argument("scheduler: max_concurrency must be >= 1");
    }

    int total_trial_budget() const {
        if (max_total_trials > 0) return max_total_trials;
        // Generous cap: with stopping rate (eta-1)/eta per rung, reaching the
        // quota of completions rarely needs more starts than this.
        const int per_completion = reduction_factor * reduction_factor;
        return std::max(max_completed_trials * per_completion,
                        random_init_count + max_completed_trials);
    }
};

inline nlohmann::ordered_json scheduler_to_json(const SchedulerConfig& s) {
    nlohmann::ordered_json j;
    j["random_init_count"] = s.random_init_count;
    j["max_completed_trials"] = s.max_completed_trials;
    j["rungs"] = s.rungs;
    j["reduction_factor"] = s.reduction_factor;
    j["max_concurrency"] = s.max_concurrency;
    j["max_total_trials"] = s.max_total_trials;
    j["ei_candidates"] = s.ei_candidates;
    return j;
}

inline SchedulerConfig scheduler_from_json(const nlohmann::json& j) {
    SchedulerConfig s;
    s.random_init_count = j.value("random_init_count", s.random_init_count);
    s.max_completed_trials = j.value("max_completed_trials", s.max_completed_trials);
    if (j.contains("rungs")) s.rungs = j.at("rungs").get<std::vector<int>>();
    s.reduction_factor = j.value("reduction_factor", s.reduction_factor);
    s.max_concurrency = j.value("max_concurrency", s.max_concurrency);
    s.max_total_trials = j.value("max_total_trials", s.max_total_trials);
    s.ei_candidates = j.value("ei_candidates", s.ei_candidates);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Gaussian-process surrogate: Matern-5/2 kernel with per-dimension length
// scales, fit by coordinate search on the log marginal likelihood. Inputs
// live in the unit cube; targets are standardized internally.
// ---------------------------------------------------------------------------

class Surrogate {
public:
    static constexpr double kJitter = 1e-8;

    struct FitOptions {
        double fixed_noise = -1.0;  // < 0: fit the noise level too
    };

    void fit(const std::vector<std::vector<double>>& unit_points,
             const std::vector<double>& losses) {
        fit(unit_points, losses, FitOptions{});
    }

    void fit(const std::vector<std::vector<double>>& unit_points,
             const std::vector<double>& losses, const FitOptions& opts) {
        if (unit_points.size() != losses.size() || unit_points.empty())
            throw std::invalid_argument("surrogate: bad training data");
        n_ = static_cast<int>(unit_points.size());
        dim_ = static_cast<int>(unit_points.front().size());
        X_.resize(n_, dim_);
        for (int i = 0; i < n_; ++i)
            for (int d = 0; d < dim_; ++d) X_(i, d) = unit_points[i][d];

        y_mean_ = 0.0;
        for (double l : losses) y_mean_ += l;
        y_mean_ /= n_;
        double var = 0.0;
        for (double l : losses) var += (l - y_mean_) * (l - y_mean_);
        y_sd_ = n_ > 1 ? std::sqrt(var / (n_ - 1)) : 1.0;
        if (y_sd_ < 1e-12) y_sd_ = 1.0;
        y_.resize(n_);
        for (int i = 0; i < n_; ++i) y_(i) = (losses[i] - y_mean_) / y_sd_;

        length_scales_.assign(dim_, 0.5);
        signal_var_ = 1.0;
        noise_var_ = opts.fixed_noise >= 0.0 ? opts.fixed_noise : 1e-4;
        fit_noise_ = opts.fixed_noise < 0.0;
        tune_hyperparameters();
        factorize();
    }

    /// Posterior mean and variance of the latent function at a unit-cube
    /// point. Noise-free observed points are reproduced exactly.
    std::pair<double, double> predict(const std::vector<double>& unit_point) const {
        Eigen::VectorXd k(n_);
        for (int i = 0; i < n_; ++i) k(i) = kernel(X_.row(i), unit_point);
        if (noise_var_ <= 1e-6) {
            for (int i = 0; i < n_; ++i) {
                double d2 = 0.0;
                for (int d = 0; d < dim_; ++d) {
                    const double dd = X_(i, d) - unit_point[d];
                    d2 += dd * dd;
                }
                if (d2 < 1e-20) return {y_mean_ + y_sd_ * y_(i), 0.0};
            }
        }
        const double mean_std = k.dot(alpha_);
        const Eigen::VectorXd w = llt_.solve(k);
        double var_std = signal_var_ - k.dot(w);
        var_std = std::max(var_std, 0.0);
        return {y_mean_ + y_sd_ * mean_std, y_sd_ * y_sd_ * var_std};
    }

    /// Closed-form expected improvement below `incumbent` given a posterior.
    static double ei_from_posterior(double mean, double var, double incumbent) {
        const double sigma = std::sqrt(std::max(var, 0.0));
        const double gap = incumbent - mean;
        if (sigma < 1e-12) return std::max(gap, 0.0);
        const double z = gap / sigma;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
        const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
        return std::max(gap * cdf + sigma * pdf, 0.0);
    }

    /// Expected improvement below `incumbent` (same raw-loss units as fit).
    double expected_improvement(const std::vector<double>& unit_point,
                                double incumbent) const {
        const auto [mean, var] = predict(unit_point);
        return ei_from_posterior(mean, var, incumbent);
    }

    const std::vector<double>& length_scales() const { return length_scales_; }
    double noise_variance() const { return noise_var_; }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    template <typename RowA>
    double kernel(const RowA& a, const std::vector<double>& b) const {
        double r2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            const double dd = (a(d) - b[d]) / length_scales_[d];
            r2 += dd * dd;
        }
        return matern52(std::sqrt(r2));
    }

    double kernel_rows(int i, int j) const {
        double r2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            const double dd = (X_(i, d) - X_(j, d)) / length_scales_[d];
            r2 += dd * dd;
        }
        return matern52(std::sqrt(r2));
    }

    double matern52(double r) const {
        const double s = std::sqrt(5.0) * r;
        return signal_var_ * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }

    void factorize() {
        Eigen::MatrixXd K(n_, n_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j <= i; ++j) {
                const double v = kernel_rows(i, j);
                K(i, j) = v;
                K(j, i) = v;
            }
            K(i, i) += noise_var_ + kJitter;
        }
        llt_.compute(K);
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("surrogate: kernel matrix not positive definite");
        alpha_ = llt_.solve(y_);
    }

    double log_marginal_likelihood() {
        factorize();
        double log_det = 0.0;
        const auto& L = llt_.matrixL();
        for (int i = 0; i < n_; ++i) log_det += 2.0 * std::log(L(i, i));
        return -0.5 * y_.dot(alpha_) - 0.5 * log_det - 0.5 * n_ * std::log(2.0 * kPi);
    }

    /// Coordinate search over log-spaced proposals; gradient-free on purpose.
    void tune_hyperparameters() {
        constexpr double kLsLo = 1e-2, kLsHi = 10.0;
        constexpr double kSvLo = 1e-3, kSvHi = 1e3;
        constexpr double kNoiseLo = 1e-8, kNoiseHi = 1.0;
        const double factors[] = {0.25, 0.5, 2.0, 4.0};

        double best = log_marginal_likelihood();
        for (int sweep = 0; sweep < 3; ++sweep) {
            bool improved = false;
            for (int d = 0; d < dim_; ++d) {
                for (double f : factors) {
                    const double old = length_scales_[d];
                    const double prop = std::clamp(old * f, kLsLo, kLsHi);
                    if (prop == old) continue;
                    length_scales_[d] = prop;
                    const double lml = log_marginal_likelihood();
                    if (lml > best + 1e-10) {
                        best = lml;
                        improved = true;
                    } else {
                        length_scales_[d] = old;
                    }
                }
            }
            for (double f : factors) {
                const double old = signal_var_;
                const double prop = std::clamp(old * f, kSvLo, kSvHi);
                if (prop == old) continue;
                signal_var_ = prop;
                const double lml = log_marginal_likelihood();
                if (lml > best + 1e-10) {
                    best = lml;
                    improved = true;
                } else {
                    signal_var_ = old;
                }
            }
            if (fit_noise_) {
                for (double f : factors) {
                    const double old = noise_var_;
                    const double prop = std::clamp(old * f, kNoiseLo, kNoiseHi);
                    if (prop == old) continue;
                    noise_var_ = prop;
                    const double lml = log_marginal_likelihood();
                    if (lml > best + 1e-10) {
                        best = lml;
                        improved = true;
                    } else {
                        noise_var_ = old;
                    }
                }
            }
            if (!improved) break;
        }
    }

    int n_ = 0, dim_ = 0;
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_, alpha_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    std::vector<double> length_scales_;
    double signal_var_ = 1.0;
    double noise_var_ = 1e-4;
    double y_mean_ = 0.0, y_sd_ = 1.0;
    bool fit_noise_ = true;
};

// ---------------------------------------------------------------------------
// Config proposal and the asynchronous successive-halving rule.
// ---------------------------------------------------------------------------

/// Proposes the next configuration. The first `random_init_count` resolved
/// trials are uniform draws in transformed space; afterwards a GP is fit to
/// the loss each resolved trial reached at its deepest rung and expected
/// improvement below the best top-rung loss is maximized over random
/// candidates.
inline std::vector<double> suggest(const SearchSpace& space,
                                   const std::vector<TrialRecord>& history,
                                   const SchedulerConfig& sched, Rng& rng) {
    space.validate();
    const int top_rung = sched.rungs.back();

    int resolved = 0;
    std::vector<std::vector<double>> points;
    std::vector<double> losses;
    double incumbent = std::numeric_limits<double>::infinity();
    for (const auto& t : history) {
        if (t.status == TrialStatus::Running) continue;
        ++resolved;
        if (t.status == TrialStatus::Failed) continue;
        // deepest finite observation for this trial
        double deepest = std::numeric_limits<double>::quiet_NaN();
        for (const auto& [r, l] : t.rung_results) {
            if (!std::isfinite(l)) continue;
            deepest = l;
            if (r == top_rung) incumbent = std::min(incumbent, l);
        }
        if (std::isfinite(deepest)) {
            points.push_back(space.to_unit(t.config));
            losses.push_back(deepest);
        }
    }

    auto random_unit = [&]() {
        std::vector<double> u(space.size());
        for (double& v : u) v = rng.uniform();
        return u;
    };

    // The surrogate needs at least two observations to say anything.
    if (resolved < sched.random_init_count || points.size() < 2)
        return space.from_unit(random_unit());

    Surrogate gp;
    gp.fit(points, losses);
    if (!std::isfinite(incumbent))
        incumbent = *std::min_element(losses.begin(), losses.end());

    std::vector<double> best_u;
    double best_ei = -1.0;
    double best_mean = std::numeric_limits<double>::infinity();
    std::vector<double> best_mean_u;
    for (int i = 0; i < sched.ei_candidates; ++i) {
        const auto u = random_unit();
        const auto [mean, var] = gp.predict(u);
        const double ei = Surrogate::ei_from_posterior(mean, var, incumbent);
        if (ei > best_ei) {
            best_ei = ei;
            best_u = u;
        }
        if (mean < best_mean) {
            best_mean = mean;
            best_mean_u = u;
        }
    }
    // All-zero EI (fully explained landscape): fall back to lowest posterior mean.
    if (best_ei <= 0.0) return space.from_unit(best_mean_u);
    return space.from_unit(best_u);
}

struct RungEntry {
    int trial_id = 0;
    double loss = 0.0;
};

/// Asynchronous successive-halving decision: the i-th arrival at a rung is
/// promoted iff its loss ranks in the top 1/eta of everything recorded at
/// that rung up to and including itself (ties resolve toward the earlier
/// trial id). Returns one decision per entry, in arrival order.
inline std::vector<bool> promote_or_stop(const std::vector<RungEntry>& arrivals, int eta) {
    if (eta < 2) throw std::invalid_argument("promote_or_stop: eta must be >= 2");
    std::vector<bool> decisions(arrivals.size());
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
        const auto& me = arrivals[i];
        int better = 0;
        for (std::size_t j = 0; j <= i; ++j) {
            if (j == i) continue;
            const auto& other = arrivals[j];
            if (other.loss < me.loss ||
                (other.loss == me.loss && other.trial_id < me.trial_id))
                ++better;
        }
        const int population = static_cast<int>(i) + 1;
        const int keep = std::max(1, population / eta);
        decisions[i] = better < keep;
    }
    return decisions;
}

// ---------------------------------------------------------------------------
// The optimization loop. Objective evaluations are pure functions of
// (config, resource, seed); they run on up to max_concurrency threads and
// results are merged in virtual-time order (cost of a rung evaluation = its
// epoch count), so histories are reproducible regardless of hardware timing.
// ---------------------------------------------------------------------------

using Objective =
    std::function<double(const std::vector<double>& config, int resource, std::uint64_t seed)>;

/// One evaluation merge event, in virtual-time order. `promoted_by_rule` is
/// the raw halving verdict; `launched` additionally reflects budget cutoffs.
struct RungEvent {
    int trial_id = 0;
    int rung_idx = 0;
    double loss = 0.0;
    bool promoted_by_rule = false;
    bool launched = false;
};

struct OptimizeResult {
    std::vector<double> best_config;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<TrialRecord> history;
    std::vector<RungEvent> events;  // merge order; replays every decision
};

inline OptimizeResult optimize(const Objective& objective, const SearchSpace& space,
                               const SchedulerConfig& sched, std::uint64_t seed,
                               const std::vector<TrialRecord>* resume = nullptr) {
    space.validate();
    sched.validate();
    Rng rng(derive_seed(seed, {stream_key("bayesopt")}));
    const int top_rung = sched.rungs.back();
    const int num_rungs = static_cast<int>(sched.rungs.size());

    OptimizeResult result;
    auto& history = result.history;

    struct Pending {
        double end_time;
        int trial_id;
        int rung_idx;
        std::future<std::pair<double, bool>> value;  // (loss, ok)
    };
    // Earliest virtual end time first; ties to the smaller trial id.
    auto later = [](const Pending& a, const Pending& b) {
        return a.end_time > b.end_time ||
               (a.end_time == b.end_time && a.trial_id > b.trial_id);
    };
    std::vector<Pending> pending;

    double now = 0.0;
    int completed = 0;
    int started = 0;
    const int budget = sched.total_trial_budget();
    // Per-rung arrival logs for the halving rule.
    std::vector<std::vector<RungEntry>> rung_log(num_rungs);

    // Cached losses from a prior run: the same seed re-suggests the same
    // configs, so (trial_id, resource) results can be reused verbatim.
    auto cached_loss = [&](int trial_id, int resource,
                           const std::vector<double>& config) -> const double* {
        if (resume == nullptr || trial_id >= static_cast<int>(resume->size()))
            return nullptr;
        const TrialRecord& prev = (*resume)[trial_id];
        if (prev.trial_id != trial_id || prev.config != config) return nullptr;
        for (const auto& [r, l] : prev.rung_results)
            if (r == resource) return &l;
        return nullptr;
    };

    auto launch = [&](int trial_id, int rung_idx) {
        const int resource = sched.rungs[rung_idx];
        const auto config = history[trial_id].config;
        const std::uint64_t trial_seed =
            derive_seed(seed, {stream_key("trial"), static_cast<std::uint64_t>(trial_id)});
        Pending p;
        p.end_time = now + static_cast<double>(resource);
        p.trial_id = trial_id;
        p.rung_idx = rung_idx;
        if (const double* hit = cached_loss(trial_id, resource, config)) {
            std::promise<std::pair<double, bool>> ready;
            ready.set_value({*hit, std::isfinite(*hit)});
            p.value = ready.get_future();
        } else {
            p.value = std::async(std::launch::async,
                                 [&objective, config, resource, trial_seed]() {
                                     try {
                                         return std::make_pair(
                                             objective(config, resource, trial_seed), true);
                                     } catch (const std::exception&) {
                                         return std::make_pair(
                                             std::numeric_limits<double>::infinity(), false);
                                     }
                                 });
        }
        pending.push_back(std::move(p));
        std::push_heap(pending.begin(), pending.end(), later);
    };

    auto maybe_start_trials = [&]() {
        while (static_cast<int>(pending.size()) < sched.max_concurrency &&
               started < budget && completed < sched.max_completed_trials) {
            TrialRecord t;
            t.trial_id = started;
            t.config = suggest(space, history, sched, rng);
            t.status = TrialStatus::Running;
            history.push_back(std::move(t));
            launch(started, 0);
            ++started;
        }
    };

    maybe_start_trials();
    while (!pending.empty()) {
        std::pop_heap(pending.begin(), pending.end(), later);
        Pending done = std::move(pending.back());
        pending.pop_back();
        const auto [loss, ok] = done.value.get();
        now = done.end_time;

        TrialRecord& trial = history[done.trial_id];
        trial.rung_results.emplace_back(sched.rungs[done.rung_idx], loss);
        RungEvent event{done.trial_id, done.rung_idx, loss, false, false};

        const bool failed = !ok || !std::isfinite(loss);
        if (done.rung_idx == num_rungs - 1) {
            if (failed) {
                trial.status = TrialStatus::Failed;
            } else {
                trial.status = TrialStatus::Completed;
                ++completed;
                if (loss < result.best_loss) {
                    result.best_loss = loss;
                    result.best_config = trial.config;
                }
            }
        } else {
            // Failed evaluations rank as +inf so later arrivals see them.
            rung_log[done.rung_idx].push_back(RungEntry{done.trial_id, loss});
            const auto& log = rung_log[done.rung_idx];
            int better = 0;
            for (std::size_t j = 0; j + 1 < log.size(); ++j)
                if (log[j].loss < loss ||
                    (log[j].loss == loss && log[j].trial_id < done.trial_id))
                    ++better;
            const int keep =
                std::max(1, static_cast<int>(log.size()) / sched.reduction_factor);
            event.promoted_by_rule = !failed && better < keep;
            if (failed) {
                trial.status = TrialStatus::Failed;
            } else if (event.promoted_by_rule && completed < sched.max_completed_trials) {
                event.launched = true;
                launch(done.trial_id, done.rung_idx + 1);
            } else {
                trial.status = TrialStatus::Stopped;
            }
        }
        result.events.push_back(event);
        maybe_start_trials();
    }

    if (!std::isfinite(result.best_loss))
        throw std::runtime_error("optimize: no trial completed the top rung (" +
                                 std::to_string(top_rung) + " epochs)");
    return result;
}

// ---------------------------------------------------------------------------
// History persistence: JSONL, one trial per line. optimize() may be resumed
// externally by replaying completed trials into the objective cache of the
// caller; the file format carries everything needed to replay decisions.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json trial_to_json(const TrialRecord& t) {
    nlohmann::ordered_json j;
    j["trial_id"] = t.trial_id;
    j["config"] = t.config;
    nlohmann::ordered_json rr = nlohmann::ordered_json::array();
    for (const auto& [r, l] : t.rung_results) {
        nlohmann::ordered_json e;
        e["resource"] = r;
        if (std::isfinite(l))
            e["loss"] = l;
        else
            e["loss"] = "inf";
        rr.push_back(e);
    }
    j["rung_results"] = rr;
    j["status"] = to_string(t.status);
    return j;
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
    TrialRecord t;
    t.trial_id = j.at("trial_id").get<int>();
    t.config = j.at("config").get<std::vector<double>>();
    for (const auto& e : j.at("rung_results")) {
        double loss;
        if (e.at("loss").is_string())
            loss = std::numeric_limits<double>::infinity();
        else
            loss = e.at("loss").get<double>();
        t.rung_results.emplace_back(e.at("resource").get<int>(), loss);
    }
    t.status = trial_status_from_string(j.at("status").get<std::string>());
    return t;
}

inline void save_history_jsonl(const std::vector<TrialRecord>& history,
                               const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& t : history) out << trial_to_json(t).dump() << '\n';
}

inline std::vector<TrialRecord> load_history_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<TrialRecord> history;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        history.push_back(trial_from_json(nlohmann::json::parse(line)));
    }
    return history;
}

}  // namespace adasamp
