#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adasamp/bayesopt.hpp"
#include "adasamp/forecaster.hpp"
#include "adasamp/metrics.hpp"
#include "adasamp/rng.hpp"
#include "adasamp/sampling.hpp"
#include "adasamp/synth.hpp"
#include "adasamp/timeseries.hpp"

namespace adasamp {

// ---------------------------------------------------------------------------
// Leakage guard: the full dataset (history + test tail) lives behind this
// store. Training stages only ever receive the training view; any read of the
// test window before begin_evaluation() throws, and the read counter backs
// the zero-pre-evaluation-access assertion in tests.
// ---------------------------------------------------------------------------

class AccessTrackedStore {
public:
    explicit AccessTrackedStore(Dataset full) : full_(std::move(full)) {
        validate_dataset(full_);
        tau_ = full_.prediction_length;
        for (const auto& s : full_.series)
            if (s.length() <= tau_)
                throw std::invalid_argument("store: series " + s.id +
                                            " has no room for a test window");
    }

    int tau() const { return tau_; }
    int num_series() const { return full_.num_series(); }
    int training_end(int series_index) const {
        return full_.series[series_index].length() - tau_;
    }

    /// Copy of z_{1:T} for every series; never touches the test tail.
    Dataset training_view() const {
        Dataset view{{}, full_.context_length, full_.prediction_length, full_.frequency};
        view.series.reserve(full_.series.size());
        for (int i = 0; i < num_series(); ++i) {
            const auto& s = full_.series[i];
            TimeSeries head;
            head.id = s.id;
            head.start_index = s.start_index;
            head.values.reserve(training_end(i));
            for (int t = 1; t <= training_end(i); ++t) head.values.push_back(value_at(i, t));
            view.series.push_back(std::move(head));
        }
        return view;
    }

    void begin_evaluation() { evaluation_open_ = true; }
    bool evaluation_open() const { return evaluation_open_; }
    long long pre_evaluation_test_reads() const { return pre_eval_test_reads_; }

    /// True future z_{T+1:T+tau}; only legal once evaluation is open.
    std::vector<std::vector<double>> test_labels() const {
        if (!evaluation_open_)
            throw std::runtime_error("leakage guard: test labels requested before evaluation");
        std::vector<std::vector<double>> labels;
        labels.reserve(full_.series.size());
        for (int i = 0; i < num_series(); ++i) {
            std::vector<double> row;
            row.reserve(tau_);
            for (int t = training_end(i) + 1; t <= training_end(i) + tau_; ++t)
                row.push_back(value_at(i, t));
            labels.push_back(std::move(row));
        }
        return labels;
    }

    /// Tracked scalar access, 1-based step index.
    double value_at(int series_index, int t) const {
        const auto& s = full_.series[series_index];
        if (t < 1 || t > s.length())
            throw std::out_of_range("store: step " + std::to_string(t) +
                                    " out of range for series " + s.id);
        if (t > training_end(series_index)) {
            if (!evaluation_open_) {
                ++pre_eval_test_reads_;
                throw std::runtime_error(
                    "leakage guard: read of test step " + std::to_string(t) +
                    " in series " + s.id + " before evaluation");
            }
            ++test_reads_;
        }
        return s.values[t - 1];
    }

    const std::string& series_id(int series_index) const {
        return full_.series[series_index].id;
    }

private:
    Dataset full_;
    int tau_ = 0;
    bool evaluation_open_ = false;
    mutable long long pre_eval_test_reads_ = 0;
    mutable long long test_reads_ = 0;
};

// ---------------------------------------------------------------------------
// Window sampler backed by a time-step distribution, truncated per series.
// ---------------------------------------------------------------------------

class AdaptiveWindowSampler : public WindowSampler {
public:
    AdaptiveWindowSampler(const TimeStepDistribution& dist, const Dataset& ds) {
        const int window = ds.window_length();
        std::map<int, std::shared_ptr<const TruncatedIndexPMF>> by_size;
        ranges_.reserve(ds.series.size());
        pmfs_.reserve(ds.series.size());
        for (const auto& s : ds.series) {
            const auto range = valid_start_range(s.length(), ds.context_length,
                                                 ds.prediction_length, s.id);
            auto& slot = by_size[range.size()];
            if (!slot)
                slot = std::make_shared<const TruncatedIndexPMF>(
                    truncate_renormalize(dist, range.size()));
            ranges_.push_back(range);
            pmfs_.push_back(slot);
        }
    }

    int sample_start(int series_index, int /*series_length*/, int /*window_length*/,
                     Rng& rng) const override {
        const int offset = sample_offset(*pmfs_[series_index], rng);
        return offset_to_start(offset, ranges_[series_index]);
    }

    const TruncatedIndexPMF& pmf_for(int series_index) const {
        return *pmfs_[series_index];
    }

private:
    std::vector<StartRange> ranges_;
    std::vector<std::shared_ptr<const TruncatedIndexPMF>> pmfs_;
};

// ---------------------------------------------------------------------------
// Run configuration and artifacts.
// ---------------------------------------------------------------------------

struct RunConfig {
    // Data source: either a file or a synthetic scenario.
    std::string dataset_path;
    DataFormat dataset_format = DataFormat::Jsonl;
    bool use_scenario = false;
    ScenarioSpec scenario;

    int context_length = 24;
    int prediction_length = 24;
    std::string frequency;

    NetConfig net;    // pre-training
    NetConfig adapt;  // fine-tuning; epochs are supplied by the rung resource
    SchedulerConfig sched;
    QuantileGrid grid = QuantileGrid::deciles();
    int num_forecast_samples = 100;
    int num_repeat_runs = 10;
    std::string output_dir;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (!use_scenario && dataset_path.empty())
            throw std::invalid_argument("run: no dataset path or scenario");
        if (context_length < 1 || prediction_length < 1)
            throw std::invalid_argument("run: context and prediction lengths must be >= 1");
        net.validate();
        adapt.validate();
        if (sched.max_completed_trials > 0) sched.validate();
        grid.validate();
        if (num_forecast_samples < 2)
            throw std::invalid_argument("run: need >= 2 forecast samples");
        if (num_repeat_runs < 1)
            throw std::invalid_argument("run: repeat runs must be >= 1");
    }
};

struct RunArtifacts {
    WeightPartition pretrained;
    std::vector<TrialRecord> history_geometric;
    std::vector<TrialRecord> history_mixnb2;
    bool has_phi_star = false;
    TimeStepDistribution phi_star = UniformTime{};
    std::string phi_family;  // "geometric" | "mixnb2" | "uniform"
    double validation_loss = 0.0;
    WeightPartition adapted;
    std::vector<SampleForecast> test_forecasts;
    TruncatedIndexPMF learned_pmf;  // over the ada-train start range of series 0
    EvalReport report;
    bool has_report = false;
};

// ---------------------------------------------------------------------------
// Search spaces per distribution family (one Bayesian-optimization run per
// family; the lower validation loss wins).
// ---------------------------------------------------------------------------

inline SearchSpace family_search_space(const std::string& family) {
    SearchSpace space;
    space.family = family;
    if (family == "geometric") {
        space.dims = {{"p", Transform::Log, 1e-5, 1.0}};
    } else if (family == "mixnb2") {
        space.dims = {{"w", Transform::Linear, 0.0, 1.0},
                      {"r1", Transform::Log, 0.5, 500.0},
                      {"p1", Transform::Log, 1e-4, 0.5},
                      {"r2", Transform::Log, 0.5, 500.0},
                      {"p2", Transform::Log, 1e-4, 0.5}};
    } else {
        throw std::invalid_argument("unknown distribution family: " + family);
    }
    return space;
}

inline TimeStepDistribution decode_family_config(const std::string& family,
                                                 const std::vector<double>& x) {
    if (family == "geometric") {
        if (x.size() != 1) throw std::invalid_argument("geometric config needs 1 value");
        return GeometricTime{x[0]};
    }
    if (family == "mixnb2") {
        if (x.size() != 5) throw std::invalid_argument("mixnb2 config needs 5 values");
        return MixtureNB2Time{x[0],
                              NegativeBinomialTime{x[1], x[2]},
                              NegativeBinomialTime{x[3], x[4]}};
    }
    throw std::invalid_argument("unknown distribution family: " + family);
}

// ---------------------------------------------------------------------------
// The three pipeline entry points.
// ---------------------------------------------------------------------------

namespace detail {

struct StageGuard {
    const char* stage;
    template <typename F>
    auto run(F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("stage ") + stage + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
        }
    }
};

inline Dataset with_run_geometry(const RunConfig& run, Dataset ds) {
    return StageGuard{"load"}.run([&] {
        ds.context_length = run.context_length;
        ds.prediction_length = run.prediction_length;
        validate_dataset(ds);
        return ds;
    });
}

inline WeightPartition pretrain_stage(const RunConfig& run, const Dataset& z_train,
                                      const WeightPartition* pretrained_in) {
    return StageGuard{"pretrain"}.run([&] {
        if (pretrained_in != nullptr) return *pretrained_in;
        const auto init = build_model(
            run.net, derive_seed(run.master_seed, {stream_key("model-init")}));
        return train(z_train, UniformWindowSampler{}, init, Trainable::All, run.net,
                     derive_seed(run.master_seed, {stream_key("pretrain")}));
    });
}

inline double validation_loss_for(const RunConfig& run, const Dataset& ada_train,
                                  const std::vector<std::vector<double>>& labels,
                                  const WeightPartition& pretrained,
                                  const TimeStepDistribution& dist, int epochs,
                                  std::uint64_t seed) {
    AdaptiveWindowSampler sampler(dist, ada_train);
    NetConfig cfg = run.adapt;
    cfg.epochs = epochs;
    const auto w = train(ada_train, sampler, pretrained, Trainable::AdaOnly, cfg, seed);
    const auto fc = forecast(ada_train, w, run.num_forecast_samples,
                             derive_seed(seed, {stream_key("val-forecast")}));
    return ncrps(fc, labels, run.grid).ncrps;
}

}  // namespace detail

/// Fine-tunes the adaptive weights with uniform window sampling and no
/// Bayesian-optimization loop; the ablation baseline. `z_train` is the
/// training history z_{1:T}; the held-out test window never enters here.
inline RunArtifacts ablation_uniform(const RunConfig& run, const Dataset& z_train_in,
                                     const WeightPartition* pretrained_in = nullptr) {
    run.validate();
    const Dataset z_train = detail::with_run_geometry(run, z_train_in);
    RunArtifacts art;
    art.pretrained = detail::pretrain_stage(run, z_train, pretrained_in);

    const auto split =
        detail::StageGuard{"split"}.run([&] { return split_for_adaptation(z_train); });

    detail::StageGuard{"fine-tune"}.run([&] {
        NetConfig cfg = run.adapt;
        cfg.epochs = run.sched.rungs.back();
        art.adapted = train(split.ada_train, UniformWindowSampler{}, art.pretrained,
                            Trainable::AdaOnly, cfg,
                            derive_seed(run.master_seed, {stream_key("ablation-final")}));
        return 0;
    });

    art.phi_star = UniformTime{};
    art.phi_family = "uniform";
    art.has_phi_star = true;
    const auto range0 = valid_start_range(split.ada_train.series[0].length(),
                                          run.context_length, run.prediction_length);
    art.learned_pmf = truncate_renormalize(UniformTime{}, range0.size());

    detail::StageGuard{"test-forecast"}.run([&] {
        art.test_forecasts =
            forecast(z_train, art.adapted, run.num_forecast_samples,
                     derive_seed(run.master_seed, {stream_key("test-forecast")}));
        return 0;
    });
    return art;
}

/// No fine-tuning at all: forecasts straight from the pre-trained weights.
inline RunArtifacts pretrain_only(const RunConfig& run, const Dataset& z_train_in,
                                  const WeightPartition* pretrained_in = nullptr) {
    run.validate();
    const Dataset z_train = detail::with_run_geometry(run, z_train_in);
    RunArtifacts art;
    art.pretrained = detail::pretrain_stage(run, z_train, pretrained_in);
    art.adapted = art.pretrained;
    art.phi_family = "none";
    const auto range0 = valid_start_range(z_train.series[0].length() - run.prediction_length,
                                          run.context_length, run.prediction_length);
    art.learned_pmf = truncate_renormalize(UniformTime{}, range0.size());
    detail::StageGuard{"test-forecast"}.run([&] {
        art.test_forecasts =
            forecast(z_train, art.adapted, run.num_forecast_samples,
                     derive_seed(run.master_seed, {stream_key("test-forecast")}));
        return 0;
    });
    return art;
}

struct ResumeHistories {
    const std::vector<TrialRecord>* geometric = nullptr;
    const std::vector<TrialRecord>* mixnb2 = nullptr;
};

/// The full adaptive pipeline: pre-train with uniform sampling, learn the
/// sampling distribution parameters against the validation channel by
/// Bayesian optimization (both families, lower validation loss wins), then
/// fine-tune the adaptive weights with the winning distribution and forecast
/// the held-out window. A zero trial budget degenerates to the uniform
/// ablation.
inline RunArtifacts ada_forecast(const RunConfig& run, const Dataset& z_train_in,
                                 const WeightPartition* pretrained_in = nullptr,
                                 const ResumeHistories& resume = {}) {
    run.validate();
    if (run.sched.max_completed_trials == 0)
        return ablation_uniform(run, z_train_in, pretrained_in);

    const Dataset z_train = detail::with_run_geometry(run, z_train_in);
    RunArtifacts art;
    art.pretrained = detail::pretrain_stage(run, z_train, pretrained_in);

    const auto split =
        detail::StageGuard{"split"}.run([&] { return split_for_adaptation(z_train); });

    struct FamilyOutcome {
        std::string family;
        OptimizeResult result;
    };
    std::vector<FamilyOutcome> outcomes;
    for (const std::string family : {"geometric", "mixnb2"}) {
        const auto space = family_search_space(family);
        const Objective objective = [&run, &split, &art, &family](
                                        const std::vector<double>& cfg, int resource,
                                        std::uint64_t seed) {
            const auto dist = decode_family_config(family, cfg);
            return detail::validation_loss_for(run, split.ada_train,
                                               split.validation_labels, art.pretrained,
                                               dist, resource, seed);
        };
        const auto* prior = family == "geometric" ? resume.geometric : resume.mixnb2;
        detail::StageGuard guard{family == "geometric" ? "bayesopt-geometric"
                                                       : "bayesopt-mixnb2"};
        auto result = guard.run([&] {
            return optimize(objective, space, run.sched,
                            derive_seed(run.master_seed,
                                        {stream_key("bayesopt"), stream_key(family.c_str())}),
                            prior);
        });
        if (family == "geometric")
            art.history_geometric = result.history;
        else
            art.history_mixnb2 = result.history;
        outcomes.push_back(FamilyOutcome{family, std::move(result)});
    }

    const FamilyOutcome& winner =
        outcomes[0].result.best_loss <= outcomes[1].result.best_loss ? outcomes[0]
                                                                     : outcomes[1];
    art.phi_family = winner.family;
    art.phi_star = decode_family_config(winner.family, winner.result.best_config);
    art.has_phi_star = true;
    art.validation_loss = winner.result.best_loss;

    detail::StageGuard{"fine-tune"}.run([&] {
        AdaptiveWindowSampler sampler(art.phi_star, split.ada_train);
        NetConfig cfg = run.adapt;
        cfg.epochs = run.sched.rungs.back();
        art.adapted = train(split.ada_train, sampler, art.pretrained, Trainable::AdaOnly,
                            cfg, derive_seed(run.master_seed, {stream_key("adaptive-final")}));
        art.learned_pmf = sampler.pmf_for(0);
        return 0;
    });

    detail::StageGuard{"test-forecast"}.run([&] {
        art.test_forecasts =
            forecast(z_train, art.adapted, run.num_forecast_samples,
                     derive_seed(run.master_seed, {stream_key("test-forecast")}));
        return 0;
    });
    return art;
}

/// Scores the test-window forecasts against the true future. Hard-errors if
/// any earlier stage touched the test window.
inline EvalReport evaluate_backtest(RunArtifacts& art, AccessTrackedStore& store,
                                    const QuantileGrid& grid) {
    if (store.pre_evaluation_test_reads() != 0)
        throw std::runtime_error("leakage guard: " +
                                 std::to_string(store.pre_evaluation_test_reads()) +
                                 " test-window reads happened before evaluation");
    store.begin_evaluation();
    const auto labels = store.test_labels();
    art.report = ncrps(art.test_forecasts, labels, grid);
    art.has_report = true;
    return art.report;
}

// ---------------------------------------------------------------------------
// Repeat-run summaries and the fixed-width comparison table.
// ---------------------------------------------------------------------------

struct MethodSummary {
    std::string name;
    std::vector<double> per_run_ncrps;

    double mean() const {
        double m = 0.0;
        for (double v : per_run_ncrps) m += v;
        return per_run_ncrps.empty() ? 0.0 : m / per_run_ncrps.size();
    }
    double stddev() const {
        if (per_run_ncrps.size() < 2) return 0.0;
        const double m = mean();
        double ss = 0.0;
        for (double v : per_run_ncrps) ss += (v - m) * (v - m);
        return std::sqrt(ss / (per_run_ncrps.size() - 1));
    }
};

inline std::string format_comparison_table(const std::vector<MethodSummary>& methods) {
    std::ostringstream os;
    os << std::left << std::setw(22) << "method" << std::right << std::setw(12)
       << "mean nCRPS" << std::setw(12) << "std" << std::setw(8) << "runs" << '\n';
    os << std::string(54, '-') << '\n';
    for (const auto& m : methods) {
        os << std::left << std::setw(22) << m.name << std::right << std::fixed
           << std::setprecision(4) << std::setw(12) << m.mean() << std::setw(12)
           << m.stddev() << std::setw(8) << m.per_run_ncrps.size() << '\n';
    }
    os << std::string(54, '-') << '\n';
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = i + 1; j < methods.size(); ++j) {
            if (methods[i].per_run_ncrps.size() != methods[j].per_run_ncrps.size() ||
                methods[i].per_run_ncrps.size() < 2)
                continue;
            const double p =
                paired_t_test(methods[i].per_run_ncrps, methods[j].per_run_ncrps);
            os << "paired t-test " << methods[i].name << " vs " << methods[j].name
               << ": p = " << std::scientific << std::setprecision(3) << p << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Artifact persistence and plot-data dumps.
// ---------------------------------------------------------------------------

inline void write_pmf_csv(const TruncatedIndexPMF& pmf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "offset,probability\n";
    out << std::setprecision(17);
    for (int k = 0; k < pmf.support_size; ++k) out << k << ',' << pmf.probs[k] << '\n';
}

inline void write_series_csv(const TimeSeries& s, const std::vector<std::uint8_t>& mask,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,value,masked\n";
    out << std::setprecision(17);
    for (int i = 0; i < s.length(); ++i) {
        const bool masked = i < static_cast<int>(mask.size()) && mask[i] != 0;
        out << (s.start_index + i) << ',' << s.values[i] << ',' << (masked ? 1 : 0) << '\n';
    }
}

inline void write_run_artifacts(const RunArtifacts& art, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_checkpoint(art.pretrained, dir + "/pretrained.bin");
    save_checkpoint(art.adapted, dir + "/adapted.bin");
    if (!art.history_geometric.empty())
        save_history_jsonl(art.history_geometric, dir + "/history_geometric.jsonl");
    if (!art.history_mixnb2.empty())
        save_history_jsonl(art.history_mixnb2, dir + "/history_mixnb2.jsonl");
    if (art.has_phi_star) {
        nlohmann::ordered_json j;
        j["family"] = art.phi_family;
        j["distribution"] = distribution_to_json(art.phi_star);
        j["validation_loss"] = art.validation_loss;
        std::ofstream out(dir + "/phi_star.json");
        out << j.dump(2) << '\n';
    }
    write_pmf_csv(art.learned_pmf, dir + "/pmf.csv");
    if (art.has_report) {
        std::ofstream out(dir + "/report.json");
        out << report_to_json(art.report).dump(2) << '\n';
    }
}

}  // namespace adasamp
