#include "driftmoe/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "driftmoe/generators.hpp"
#include "driftmoe/ingest.hpp"

#ifndef DRIFTMOE_VERSION
#define DRIFTMOE_VERSION "0.0.0"
#endif
#ifndef DRIFTMOE_BUILD_TYPE
#define DRIFTMOE_BUILD_TYPE "unknown"
#endif

namespace driftmoe {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::unique_ptr<StreamSource> open_source(const ExperimentSpec& spec, std::uint64_t seed) {
    if (!spec.stream.empty()) {
        BenchmarkOptions options;
        options.length = spec.length;
        return make_benchmark_stream(spec.stream, seed, options);
    }
    return load_dataset(DatasetManifest::for_path(spec.dataset, spec.label_column)).stream();
}

}  // namespace

std::string version_string() { return DRIFTMOE_VERSION; }

std::string ExperimentSpec::source_name() const {
    if (!stream.empty()) return stream;
    return fs::path(dataset).stem().string();
}

void ExperimentSpec::validate() const {
    if (stream.empty() == dataset.empty()) throw ConfigError("exactly one of 'stream' and 'dataset' must be set");
    if (!stream.empty()) {
        const auto& names = benchmark_stream_names();
        if (std::find(names.begin(), names.end(), stream) == names.end()) {
            throw ConfigError("stream: unknown stream '" + stream + "'");
        }
        if (length == 0) throw ConfigError("length: must be > 0");
    }
    if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
    if (trace_window == 0) throw ConfigError("trace_window: must be >= 1");
    if (model.mode == MoeMode::Data) {
        if (model.num_experts == 0) throw ConfigError("experts: must be >= 1");
        if (model.top_k == 0 || model.top_k > model.num_experts) throw ConfigError("top_k: must lie in [1, experts]");
    }
    if (model.hidden1 == 0 || model.hidden2 == 0) throw ConfigError("hidden: sizes must be > 0");
    if (!(model.learning_rate > 0.0)) throw ConfigError("lr: must be > 0");
    if (model.batch_size == 0) throw ConfigError("batch_size: must be > 0");
    if (model.tree.grace_period == 0) throw ConfigError("grace_period: must be > 0");
    if (!(model.tree.split_confidence > 0.0 && model.tree.split_confidence < 1.0)) {
        throw ConfigError("delta: must lie in (0, 1)");
    }
    if (!(model.tree.tie_threshold >= 0.0)) throw ConfigError("tau: must be >= 0");
}

std::string ExperimentSpec::canonical() const {
    std::ostringstream s;
    s << "stream=" << stream << '\n'
      << "dataset=" << dataset << '\n'
      << "label=" << label_column << '\n'
      << "length=" << (stream.empty() ? 0 : length) << '\n'
      << "mode=" << to_string(model.mode) << '\n'
      << "experts=" << (model.mode == MoeMode::Data ? model.num_experts : 0) << '\n'
      << "top_k=" << (model.mode == MoeMode::Data ? model.top_k : 0) << '\n'
      << "hidden1=" << model.hidden1 << '\n'
      << "hidden2=" << model.hidden2 << '\n'
      << "lr=" << fmt_double(model.learning_rate) << '\n'
      << "batch_size=" << model.batch_size << '\n'
      << "stale_logits=" << model.stale_logits << '\n'
      << "task_mask=" << to_string(model.task_mask) << '\n'
      << "task_threshold=" << fmt_double(model.task_threshold) << '\n'
      << "grace_period=" << model.tree.grace_period << '\n'
      << "delta=" << fmt_double(model.tree.split_confidence) << '\n'
      << "tau=" << fmt_double(model.tree.tie_threshold) << '\n'
      << "max_depth=" << (model.tree.max_depth ? std::to_string(*model.tree.max_depth) : "none") << '\n'
      << "numeric_candidates=" << model.tree.numeric_candidates << '\n'
      << "min_branch_fraction=" << fmt_double(model.tree.min_branch_fraction) << '\n'
      << "trace_window=" << trace_window << '\n'
      << "majority=" << (majority == MajorityBaseline::Prequential ? "prequential" : "batch") << '\n';
    return s.str();
}

std::string ExperimentSpec::config_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunResult run_single(const ExperimentSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    auto source = open_source(spec, seed);
    MoeConfig cfg = spec.model;
    cfg.seed = seed;
    DriftMoeModel model(source->schema(), cfg);
    MetricAccumulator acc(source->schema().num_classes, spec.majority);
    WindowedTrace trace(spec.trace_window);
    run_prequential(model, *source, [&](const PrequentialRecord& r) {
        acc.update(r.predicted, r.label);
        trace.add(r.predicted == r.label);
    });
    trace.finish();
    const auto stop = std::chrono::steady_clock::now();

    RunResult out;
    out.dataset = spec.source_name();
    out.mode = spec.model.mode;
    out.seed = seed;
    out.n = acc.n();
    out.accuracy = 100.0 * acc.accuracy();
    if (auto k = acc.kappa_m()) out.kappa_m = 100.0 * *k;
    if (auto k = acc.kappa_temporal()) out.kappa_t = 100.0 * *k;
    out.runtime_s = std::chrono::duration<double>(stop - start).count();
    out.config_hash = spec.config_hash();
    out.num_experts = model.num_experts();
    out.trace = trace.points();
    return out;
}

std::vector<RunResult> run_jobs(const std::vector<std::pair<ExperimentSpec, std::uint64_t>>& jobs,
                                std::size_t threads, const std::function<void(const RunResult&)>& on_done) {
    std::vector<RunResult> results(jobs.size());
    if (jobs.empty()) return results;
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, jobs.size());

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(mu);
                if (failure) return;
            }
            try {
                results[i] = run_single(jobs[i].first, jobs[i].second);
                if (on_done) {
                    std::lock_guard lock(mu);
                    on_done(results[i]);
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

std::string result_row_without_runtime(const RunResult& r) {
    std::ostringstream s;
    s << r.dataset << ',' << to_string(r.mode) << ',' << r.seed << ',' << r.n << ',' << format_metric(r.accuracy)
      << ',' << format_metric(r.kappa_m) << ',' << format_metric(r.kappa_t) << ',' << r.config_hash;
    return s.str();
}

std::string result_row(const RunResult& r) {
    char rt[32];
    std::snprintf(rt, sizeof rt, "%.3f", r.runtime_s);
    std::ostringstream s;
    s << r.dataset << ',' << to_string(r.mode) << ',' << r.seed << ',' << r.n << ',' << format_metric(r.accuracy)
      << ',' << format_metric(r.kappa_m) << ',' << format_metric(r.kappa_t) << ',' << rt << ',' << r.config_hash;
    return s.str();
}

AggregateRow aggregate_runs(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw std::invalid_argument("aggregate_runs: no runs");
    AggregateRow a;
    a.dataset = runs.front().dataset;
    a.mode = runs.front().mode;
    a.runs = runs.size();
    a.config_hash = runs.front().config_hash;
    std::vector<double> acc, km, kt;
    for (const auto& r : runs) {
        acc.push_back(r.accuracy);
        if (r.kappa_m) km.push_back(*r.kappa_m);
        if (r.kappa_t) kt.push_back(*r.kappa_t);
    }
    a.accuracy = aggregate_seeds(acc);
    if (!km.empty()) a.kappa_m = aggregate_seeds(km);
    if (!kt.empty()) a.kappa_t = aggregate_seeds(kt);
    return a;
}

std::string aggregate_csv_header() {
    return "dataset,mode,runs,accuracy_mean,accuracy_std,kappa_m_mean,kappa_m_std,kappa_t_mean,kappa_t_std,config_hash";
}

std::string aggregate_row(const AggregateRow& a) {
    auto opt = [](const Aggregate& g, double v) { return g.count ? format_metric(v) : std::string("nan"); };
    std::ostringstream s;
    s << a.dataset << ',' << to_string(a.mode) << ',' << a.runs << ',' << format_metric(a.accuracy.mean) << ','
      << format_metric(a.accuracy.stddev) << ',' << opt(a.kappa_m, a.kappa_m.mean) << ','
      << opt(a.kappa_m, a.kappa_m.stddev) << ',' << opt(a.kappa_t, a.kappa_t.mean) << ','
      << opt(a.kappa_t, a.kappa_t.stddev) << ',' << a.config_hash;
    return s.str();
}

std::string metadata_json(const ExperimentSpec& spec, const std::vector<RunResult>& runs) {
    using nlohmann::json;
    const auto& m = spec.model;
    json j;
    j["version"] = version_string();
    j["build"] = {{"compiler", __VERSION__}, {"build_type", DRIFTMOE_BUILD_TYPE}, {"cxx_standard", __cplusplus}};
    j["config_hash"] = spec.config_hash();
    j["source"] = spec.source_name();
    j["stream"] = spec.stream;
    j["dataset"] = spec.dataset;
    j["label"] = spec.label_column;
    if (!spec.stream.empty()) j["length"] = spec.length;
    j["seeds"] = spec.seeds;
    j["trace_window"] = spec.trace_window;
    j["majority_baseline"] = spec.majority == MajorityBaseline::Prequential ? "prequential" : "batch";
    j["mode"] = to_string(m.mode);
    j["experts"] = runs.empty() ? m.num_experts : runs.front().num_experts;
    if (m.mode == MoeMode::Data) j["top_k"] = m.top_k;
    j["router"] = {{"hidden1", m.hidden1},        {"hidden2", m.hidden2},
                   {"activation", "relu"},         {"learning_rate", m.learning_rate},
                   {"batch_size", m.batch_size},   {"optimizer", "adam"},
                   {"beta1", 0.9},                 {"beta2", 0.999},
                   {"epsilon", 1e-8},              {"stale_logits", m.stale_logits},
                   {"init", "he_uniform"},         {"residual_flush", true}};
    j["task_mask"] = to_string(m.task_mask);
    j["task_threshold"] = m.task_threshold;
    j["tree"] = {{"grace_period", m.tree.grace_period},
                 {"delta", m.tree.split_confidence},
                 {"tau", m.tree.tie_threshold},
                 {"max_depth", m.tree.max_depth ? json(*m.tree.max_depth) : json(nullptr)},
                 {"numeric_candidates", m.tree.numeric_candidates},
                 {"min_branch_fraction", m.tree.min_branch_fraction},
                 {"leaf_prediction", "naive_bayes"}};
    j["canonical"] = spec.canonical();
    return j.dump(2) + "\n";
}

void write_experiment_outputs(const ExperimentSpec& spec, const std::vector<RunResult>& runs) {
    const fs::path dir(spec.output_dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "results.csv");
        out << metrics_csv_header(true) << '\n';
        for (const auto& r : runs) out << result_row(r) << '\n';
    }
    if (!runs.empty()) {
        std::ofstream out(dir / "aggregate.csv");
        out << aggregate_csv_header() << '\n' << aggregate_row(aggregate_runs(runs)) << '\n';
    }
    for (const auto& r : runs) {
        std::ofstream out(dir / ("trace_seed" + std::to_string(r.seed) + ".csv"));
        write_trace_csv(out, r.trace);
    }
    std::ofstream meta(dir / "metadata.json");
    meta << metadata_json(spec, runs);
    if (!meta) throw std::runtime_error("could not write results to " + dir.string());
}

SweepResult run_sweep(const ExperimentSpec& base, const std::vector<std::size_t>& experts_grid,
                      const std::vector<std::size_t>& topk_grid) {
    SweepResult out;
    std::vector<std::pair<ExperimentSpec, std::uint64_t>> jobs;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t n : experts_grid) {
        for (std::size_t k : topk_grid) {
            if (k == 0 || n == 0 || k > n) {
                out.skipped.emplace_back(n, k);
                continue;
            }
            cells.emplace_back(n, k);
            ExperimentSpec spec = base;
            spec.model.mode = MoeMode::Data;
            spec.model.num_experts = n;
            spec.model.top_k = k;
            for (auto seed : base.seeds) jobs.emplace_back(spec, seed);
        }
    }
    const auto results = run_jobs(jobs, base.threads);
    const std::size_t per_cell = base.seeds.size();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        double sum = 0.0;
        for (std::size_t s = 0; s < per_cell; ++s) sum += results[c * per_cell + s].accuracy;
        out.cells.push_back({cells[c].first, cells[c].second, sum / static_cast<double>(per_cell)});
    }
    return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    out << "experts,top_k,accuracy\n";
    for (const auto& c : sweep.cells) out << c.experts << ',' << c.top_k << ',' << format_metric(c.accuracy) << '\n';
    for (const auto& [n, k] : sweep.skipped) {
        out << "# skipped experts=" << n << " top_k=" << k << ": top_k exceeds experts\n";
    }
}

}  // namespace driftmoe
