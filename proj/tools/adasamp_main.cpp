// Command-line front end: generate synthetic scenarios, pre-train, adapt with
// learned window sampling, evaluate backtests, and run the benchmark matrix.
//
// Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adasamp/bench.hpp"
#include "adasamp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace adasamp;

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

struct CommonDataArgs {
    std::string data_path;
    std::string format = "jsonl";
    int context_length = 24;
    int prediction_length = 24;

    Dataset load() const {
        return load_dataset(data_path, parse_format(format), context_length,
                            prediction_length);
    }
};

void add_data_options(CLI::App* cmd, CommonDataArgs& args) {
    cmd->add_option("--data", args.data_path, "series file")->required();
    cmd->add_option("--format", args.format, "jsonl|csv");
    cmd->add_option("--context", args.context_length, "context length");
    cmd->add_option("--horizon", args.prediction_length, "prediction length (tau)");
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir, int context,
                 int horizon) {
    const auto spec = scenario_from_json(read_json_file(spec_path));
    const auto generated = generate(spec, context, horizon);
    fs::create_directories(out_dir);
    save_dataset_jsonl(generated.dataset, out_dir + "/data.jsonl");
    std::vector<std::string> ids;
    for (const auto& s : generated.dataset.series) ids.push_back(s.id);
    save_mask_jsonl(generated.mask, ids, out_dir + "/mask.jsonl");
    write_series_csv(generated.dataset.series[0], generated.mask.per_series[0],
                     out_dir + "/series.csv");
    std::cout << "wrote " << generated.dataset.num_series() << " series of length "
              << generated.dataset.series[0].length() << " to " << out_dir << "\n";
    return 0;
}

int cmd_pretrain(const CommonDataArgs& data_args, const std::string& config_path,
                 const std::string& out_ckpt) {
    NetConfig net;
    std::uint64_t seed = 0;
    if (!config_path.empty()) {
        const auto j = read_json_file(config_path);
        if (j.contains("net")) net = net_config_from_json(j.at("net"));
        seed = j.value("seed", seed);
    }
    const auto ds = data_args.load();
    const auto init = build_model(net, derive_seed(seed, {stream_key("model-init")}));
    std::vector<double> trace;
    const auto trained = train(ds, UniformWindowSampler{}, init, Trainable::All, net,
                               derive_seed(seed, {stream_key("pretrain")}), &trace);
    save_checkpoint(trained, out_ckpt);
    std::cout << "pretrained " << trained.param_count() << " parameters over "
              << net.epochs << " epochs; final loss "
              << (trace.empty() ? 0.0 : trace.back()) << "\n";
    return 0;
}

int cmd_adapt(const CommonDataArgs& data_args, const std::string& ckpt_path,
              const std::string& sched_path, const std::string& out_dir) {
    RunConfig run;
    run.dataset_path = data_args.data_path;
    run.context_length = data_args.context_length;
    run.prediction_length = data_args.prediction_length;

    const auto pretrained = load_checkpoint(ckpt_path);
    run.net = pretrained.config;
    run.adapt = pretrained.config;

    if (!sched_path.empty()) {
        const auto j = read_json_file(sched_path);
        if (j.contains("sched")) run.sched = scheduler_from_json(j.at("sched"));
        if (j.contains("adapt")) run.adapt = net_config_from_json(j.at("adapt"));
        run.num_forecast_samples = j.value("num_forecast_samples", run.num_forecast_samples);
        run.master_seed = j.value("seed", run.master_seed);
    }
    run.output_dir = out_dir;

    const auto z_train = data_args.load();

    // Resume from existing trial histories when present.
    std::vector<TrialRecord> prior_geo, prior_mix;
    ResumeHistories resume;
    if (fs::exists(out_dir + "/history_geometric.jsonl")) {
        prior_geo = load_history_jsonl(out_dir + "/history_geometric.jsonl");
        resume.geometric = &prior_geo;
        std::cout << "resuming from " << prior_geo.size() << " geometric trials\n";
    }
    if (fs::exists(out_dir + "/history_mixnb2.jsonl")) {
        prior_mix = load_history_jsonl(out_dir + "/history_mixnb2.jsonl");
        resume.mixnb2 = &prior_mix;
        std::cout << "resuming from " << prior_mix.size() << " mixnb2 trials\n";
    }

    const auto art = ada_forecast(run, z_train, &pretrained, resume);
    write_run_artifacts(art, out_dir);
    std::cout << "selected family " << art.phi_family << " with validation nCRPS "
              << art.validation_loss << "\n"
              << "phi* = " << distribution_to_json(art.phi_star).dump() << "\n"
              << "artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const CommonDataArgs& data_args, const std::string& artifacts_dir) {
    const auto full = data_args.load();
    AccessTrackedStore store(full);
    const auto z_train = store.training_view();

    RunArtifacts art;
    art.adapted = load_checkpoint(artifacts_dir + "/adapted.bin");
    art.pretrained = art.adapted;
    art.learned_pmf = truncate_renormalize(
        UniformTime{}, valid_start_range(z_train.series[0].length(),
                                         data_args.context_length,
                                         data_args.prediction_length)
                           .size());
    art.test_forecasts = forecast(z_train, art.adapted, 100, art.adapted.seed);

    const auto report = evaluate_backtest(art, store, QuantileGrid::deciles());
    std::ofstream out(artifacts_dir + "/report.json");
    out << report_to_json(report).dump(2) << '\n';
    std::cout << report_to_json(report).dump(2) << "\n";
    return 0;
}

int cmd_bench(const std::string& scenario, int seeds, std::uint64_t seed,
              const std::string& out_dir) {
    if (scenario.size() != 1)
        throw std::invalid_argument("--scenario must be A, B or N");
    const auto result = run_bench(scenario[0], seeds, seed, out_dir);
    std::cout << "scenario " << scenario << ", " << seeds << " seeds\n";
    std::cout << result.table();
    std::cout << "learned-pmf mass on shifted regions per seed:";
    for (const auto& row : result.per_seed) std::cout << ' ' << row.mass_learned;
    std::cout << "\nuniform baseline mass: "
              << (result.per_seed.empty() ? 0.0 : result.per_seed[0].mass_uniform) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive window-sampling training for probabilistic forecasting"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a synthetic scenario dataset");
    std::string gen_spec, gen_out;
    int gen_context = 24, gen_horizon = 24;
    gen->add_option("--spec", gen_spec, "scenario JSON file")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--context", gen_context, "context length");
    gen->add_option("--horizon", gen_horizon, "prediction length (tau)");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "train the base model with uniform sampling");
    CommonDataArgs pre_data;
    std::string pre_config, pre_out;
    add_data_options(pre, pre_data);
    pre->add_option("--config", pre_config, "JSON with {net, seed}");
    pre->add_option("--out", pre_out, "checkpoint path")->required();

    // adapt
    auto* ada = app.add_subcommand(
        "adapt", "learn the sampling distribution and fine-tune the adaptive weights");
    CommonDataArgs ada_data;
    std::string ada_ckpt, ada_sched, ada_out;
    add_data_options(ada, ada_data);
    ada->add_option("--ckpt", ada_ckpt, "pre-trained checkpoint")->required();
    ada->add_option("--sched", ada_sched, "JSON with {sched, adapt, seed}");
    ada->add_option("--out", ada_out, "artifact directory")->required();

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "backtest artifacts against the held-out tail");
    CommonDataArgs eva_data;
    std::string eva_artifacts;
    add_data_options(eva, eva_data);
    eva->add_option("--artifacts", eva_artifacts, "artifact directory")->required();

    // bench
    auto* ben = app.add_subcommand("bench", "run the adaptive/ablation/pretrain comparison");
    std::string ben_scenario = "A", ben_out = "bench-out";
    int ben_seeds = 5;
    std::uint64_t ben_seed = 42;
    ben->add_option("--scenario", ben_scenario, "A|B|N")->required();
    ben->add_option("--seeds", ben_seeds, "number of independent seeds");
    ben->add_option("--seed", ben_seed, "master seed");
    ben->add_option("--out", ben_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(gen_spec, gen_out, gen_context, gen_horizon);
        if (pre->parsed()) return cmd_pretrain(pre_data, pre_config, pre_out);
        if (ada->parsed()) return cmd_adapt(ada_data, ada_ckpt, ada_sched, ada_out);
        if (eva->parsed()) return cmd_evaluate(eva_data, eva_artifacts);
        if (ben->parsed()) return cmd_bench(ben_scenario, ben_seeds, ben_seed, ben_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
