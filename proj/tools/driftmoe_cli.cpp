// Command-line front-end: run, benchmark, sweep and dump-stream.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "driftmoe/experiment.hpp"
#include "driftmoe/generators.hpp"

using namespace driftmoe;

namespace {

struct CommonOptions {
    std::string mode = "data";
    std::size_t experts = 12;
    std::size_t top_k = 3;
    std::size_t seeds = 10;
    std::vector<std::uint64_t> seed_list;
    std::uint64_t length = 1'000'000;
    std::size_t hidden = 128;
    double lr = 1e-3;
    std::size_t batch_size = 4;
    bool stale_logits = false;
    std::string task_mask = "positive";
    std::size_t grace_period = 50;
    double delta = 1e-7;
    double tau = 0.05;
    std::size_t max_depth = 0;
    std::uint64_t trace_window = 10'000;
    std::string majority = "prequential";
    std::size_t threads = 0;
    std::string out;
};

void add_model_options(CLI::App& app, CommonOptions& o, bool with_mode) {
    if (with_mode) {
        app.add_option("--mode", o.mode, "Expert configuration")->check(CLI::IsMember({"data", "task"}))
            ->capture_default_str();
        app.add_option("--experts", o.experts, "Data-mode expert count K")->capture_default_str();
        app.add_option("--top-k", o.top_k, "Data-mode experts trained per instance")->capture_default_str();
    }
    app.add_option("--seeds", o.seeds, "Number of seeds (1..N)")->capture_default_str();
    app.add_option("--seed-list", o.seed_list, "Explicit seeds (overrides --seeds)");
    app.add_option("--length", o.length, "Synthetic stream length")->capture_default_str();
    app.add_option("--hidden", o.hidden, "Router hidden-layer width")->capture_default_str();
    app.add_option("--lr", o.lr, "Router Adam learning rate")->capture_default_str();
    app.add_option("--batch-size", o.batch_size, "Router mini-batch size")->capture_default_str();
    app.add_flag("--stale-logits", o.stale_logits, "Train the router on prediction-time activations");
    app.add_option("--task-mask", o.task_mask, "Task-mode router target rule")
        ->check(CLI::IsMember({"positive", "symmetric"}))
        ->capture_default_str();
    app.add_option("--grace-period", o.grace_period, "Hoeffding-tree grace period")->capture_default_str();
    app.add_option("--delta", o.delta, "Hoeffding split confidence")->capture_default_str();
    app.add_option("--tau", o.tau, "Hoeffding tie threshold")->capture_default_str();
    app.add_option("--max-depth", o.max_depth, "Tree depth limit (0 = unlimited)")->capture_default_str();
    app.add_option("--trace-window", o.trace_window, "Accuracy trace window")->capture_default_str();
    app.add_option("--majority", o.majority, "Kappa-M majority baseline")
        ->check(CLI::IsMember({"prequential", "batch"}))
        ->capture_default_str();
    app.add_option("--threads", o.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

ExperimentSpec make_spec(const CommonOptions& o) {
    ExperimentSpec spec;
    spec.length = o.length;
    spec.model.mode = parse_mode(o.mode);
    spec.model.num_experts = o.experts;
    spec.model.top_k = o.top_k;
    spec.model.hidden1 = o.hidden;
    spec.model.hidden2 = o.hidden;
    spec.model.learning_rate = o.lr;
    spec.model.batch_size = o.batch_size;
    spec.model.stale_logits = o.stale_logits;
    spec.model.task_mask = parse_task_mask_rule(o.task_mask);
    spec.model.tree.grace_period = o.grace_period;
    spec.model.tree.split_confidence = o.delta;
    spec.model.tree.tie_threshold = o.tau;
    if (o.max_depth > 0) spec.model.tree.max_depth = o.max_depth;
    spec.trace_window = o.trace_window;
    spec.majority = o.majority == "batch" ? MajorityBaseline::Batch : MajorityBaseline::Prequential;
    spec.threads = o.threads;
    spec.output_dir = o.out;
    if (!o.seed_list.empty()) {
        spec.seeds = o.seed_list;
    } else {
        spec.seeds.resize(o.seeds);
        std::iota(spec.seeds.begin(), spec.seeds.end(), std::uint64_t{1});
    }
    return spec;
}

void progress(const RunResult& r) {
    std::fprintf(stderr, "  %s/%s seed %llu: accuracy %.2f%% (%.1fs)\n", r.dataset.c_str(), to_string(r.mode).c_str(),
                 static_cast<unsigned long long>(r.seed), r.accuracy, r.runtime_s);
}

std::vector<RunResult> execute(const ExperimentSpec& spec) {
    std::vector<std::pair<ExperimentSpec, std::uint64_t>> jobs;
    for (auto seed : spec.seeds) jobs.emplace_back(spec, seed);
    return run_jobs(jobs, spec.threads, progress);
}

void print_runs(const std::vector<RunResult>& runs) {
    std::cout << metrics_csv_header(true) << '\n';
    for (const auto& r : runs) std::cout << result_row(r) << '\n';
}

int cmd_run(CommonOptions o, const std::string& stream, const std::string& dataset, const std::string& label) {
    ExperimentSpec spec = make_spec(o);
    spec.stream = stream;
    spec.dataset = dataset;
    spec.label_column = label;
    if (spec.output_dir.empty()) spec.output_dir = "results/" + spec.source_name() + "_" + o.mode;
    spec.validate();
    if (spec.model.mode == MoeMode::Task) {
        std::fprintf(stderr, "note: task mode uses one expert per class; --experts and --top-k are ignored\n");
    }
    const auto runs = execute(spec);
    write_experiment_outputs(spec, runs);
    print_runs(runs);
    std::cout << aggregate_csv_header() << '\n' << aggregate_row(aggregate_runs(runs)) << '\n';
    std::fprintf(stderr, "results written to %s\n", spec.output_dir.c_str());
    return 0;
}

int cmd_benchmark(CommonOptions o, const std::vector<std::string>& streams, const std::vector<std::string>& datasets,
                  const std::string& label, const std::vector<std::string>& modes) {
    if (o.out.empty()) o.out = "results/benchmark";
    std::vector<ExperimentSpec> specs;
    std::vector<std::pair<ExperimentSpec, std::uint64_t>> jobs;
    for (const auto& source : streams) {
        for (const auto& mode : modes) {
            o.mode = mode;
            ExperimentSpec spec = make_spec(o);
            spec.stream = source;
            spec.output_dir = (std::filesystem::path(o.out) / (source + "_" + mode)).string();
            specs.push_back(spec);
        }
    }
    for (const auto& path : datasets) {
        for (const auto& mode : modes) {
            o.mode = mode;
            ExperimentSpec spec = make_spec(o);
            spec.dataset = path;
            spec.label_column = label;
            spec.output_dir = (std::filesystem::path(o.out) / (spec.source_name() + "_" + mode)).string();
            specs.push_back(spec);
        }
    }
    for (const auto& spec : specs) {
        spec.validate();
        for (auto seed : spec.seeds) jobs.emplace_back(spec, seed);
    }
    const auto results = run_jobs(jobs, o.threads, progress);

    std::filesystem::create_directories(o.out);
    std::ofstream table(std::filesystem::path(o.out) / "benchmark.csv");
    table << aggregate_csv_header() << '\n';
    std::cout << aggregate_csv_header() << '\n';
    std::size_t offset = 0;
    for (const auto& spec : specs) {
        std::vector<RunResult> runs(results.begin() + static_cast<std::ptrdiff_t>(offset),
                                    results.begin() + static_cast<std::ptrdiff_t>(offset + spec.seeds.size()));
        offset += spec.seeds.size();
        write_experiment_outputs(spec, runs);
        const auto row = aggregate_row(aggregate_runs(runs));
        table << row << '\n';
        std::cout << row << '\n';
    }
    std::fprintf(stderr, "benchmark table written to %s/benchmark.csv\n", o.out.c_str());
    return 0;
}

int cmd_sweep(CommonOptions o, const std::string& stream, const std::vector<std::size_t>& experts_grid,
              const std::vector<std::size_t>& topk_grid) {
    o.mode = "data";
    ExperimentSpec spec = make_spec(o);
    spec.stream = stream;
    spec.validate();
    for (auto n : experts_grid) {
        for (auto k : topk_grid) {
            if (k > n) std::fprintf(stderr, "warning: skipping infeasible cell experts=%zu top_k=%zu\n", n, k);
        }
    }
    const auto sweep = run_sweep(spec, experts_grid, topk_grid);
    if (o.out.empty()) {
        write_sweep_csv(std::cout, sweep);
    } else {
        const auto parent = std::filesystem::path(o.out).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ofstream out(o.out);
        write_sweep_csv(out, sweep);
        write_sweep_csv(std::cout, sweep);
    }
    return 0;
}

int cmd_dump_stream(const std::string& stream, std::uint64_t seed, std::uint64_t n, std::uint64_t length,
                    const std::string& out) {
    BenchmarkOptions options;
    options.length = length;
    auto source = make_benchmark_stream(stream, seed, options);
    if (out.empty()) {
        write_stream_csv(*source, std::cout, n);
    } else {
        std::ofstream file(out);
        if (!file) throw std::runtime_error("cannot open " + out);
        write_stream_csv(*source, file, n);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DriftMoE: mixture of experts for concept-drifting data streams"};
    app.set_config("--config", "", "Key=value configuration file (same keys as the flags)");
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    CommonOptions run_opts;
    std::string run_stream, run_dataset, run_label;
    auto* run = app.add_subcommand("run", "Run one configuration over several seeds");
    add_model_options(*run, run_opts, true);
    run->add_option("--stream", run_stream, "Synthetic stream")->check(CLI::IsMember(benchmark_stream_names()));
    run->add_option("--dataset", run_dataset, "ARFF or CSV file")->check(CLI::ExistingFile);
    run->add_option("--label", run_label, "Label column name or index (default: last column)");
    run->add_option("--out", run_opts.out, "Output directory");

    CommonOptions bench_opts;
    std::vector<std::string> bench_streams = benchmark_stream_names();
    std::vector<std::string> bench_datasets;
    std::vector<std::string> bench_modes{"data", "task"};
    std::string bench_label;
    auto* bench = app.add_subcommand("benchmark", "Run both modes over the benchmark streams");
    add_model_options(*bench, bench_opts, false);
    bench->add_option("--experts", bench_opts.experts, "Data-mode expert count K")->capture_default_str();
    bench->add_option("--top-k", bench_opts.top_k, "Data-mode experts trained per instance")->capture_default_str();
    bench->add_option("--streams", bench_streams, "Synthetic streams")->check(CLI::IsMember(benchmark_stream_names()));
    bench->add_option("--dataset", bench_datasets, "Additional ARFF/CSV datasets")->check(CLI::ExistingFile);
    bench->add_option("--label", bench_label, "Label column for the datasets");
    bench->add_option("--modes", bench_modes, "Modes to run")->check(CLI::IsMember({"data", "task"}));
    bench->add_option("--out", bench_opts.out, "Output directory");

    CommonOptions sweep_opts;
    std::string sweep_stream = "led_a";
    std::vector<std::size_t> experts_grid{4, 8, 12, 16, 20};
    std::vector<std::size_t> topk_grid{1, 2, 3, 4, 5};
    auto* sweep = app.add_subcommand("sweep", "Grid search over experts x top-k (Data mode)");
    add_model_options(*sweep, sweep_opts, false);
    sweep->add_option("--stream", sweep_stream, "Synthetic stream")->check(CLI::IsMember(benchmark_stream_names()))
        ->capture_default_str();
    sweep->add_option("--experts-grid", experts_grid, "Expert counts");
    sweep->add_option("--topk-grid", topk_grid, "Top-k values");
    sweep->add_option("--out", sweep_opts.out, "Output CSV (default: stdout only)");

    std::string dump_stream_name;
    std::uint64_t dump_seed = 1, dump_n = 1000, dump_length = 1'000'000;
    std::string dump_out;
    auto* dump = app.add_subcommand("dump-stream", "Write the first instances of a synthetic stream as CSV");
    dump->add_option("--stream", dump_stream_name, "Synthetic stream")->required()
        ->check(CLI::IsMember(benchmark_stream_names()));
    dump->add_option("--seed", dump_seed, "Seed")->capture_default_str();
    dump->add_option("-n,--count", dump_n, "Instances to write (0 = whole stream)")->capture_default_str();
    dump->add_option("--length", dump_length, "Stream length")->capture_default_str();
    dump->add_option("--out", dump_out, "Output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_opts, run_stream, run_dataset, run_label);
        if (*bench) return cmd_benchmark(bench_opts, bench_streams, bench_datasets, bench_label, bench_modes);
        if (*sweep) return cmd_sweep(sweep_opts, sweep_stream, experts_grid, topk_grid);
        if (*dump) return cmd_dump_stream(dump_stream_name, dump_seed, dump_n, dump_length, dump_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
