/**
 * Experiment orchestration shared by the command-line front-end and the
 * acceptance suite: resolved experiment specs, single runs, the benchmark
 * grid, the experts x top-k sweep, result files and a bounded worker pool.
 */

#ifndef DRIFTMOE_EXPERIMENT_HPP
#define DRIFTMOE_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "driftmoe/eval.hpp"
#include "driftmoe/moe.hpp"

namespace driftmoe {

struct ExperimentSpec {
    /// Synthetic benchmark stream name; empty when `dataset` is used.
    std::string stream;
    /// Path of an ARFF/CSV file; empty for synthetic streams.
    std::string dataset;
    std::string label_column;
    /// Synthetic stream length.
    std::uint64_t length = 1'000'000;
    MoeConfig model;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::uint64_t trace_window = 10'000;
    MajorityBaseline majority = MajorityBaseline::Prequential;
    std::string output_dir;
    /// Worker threads; 0 uses the hardware concurrency.
    std::size_t threads = 0;

    /// Name used in result rows: the stream name or the dataset file stem.
    std::string source_name() const;
    /// Throws ConfigError naming the offending key.
    void validate() const;
    /// Canonical "key=value" lines of every setting that influences a result
    /// (seed, output directory and thread count excluded).
    std::string canonical() const;
    /// 64-bit FNV-1a of canonical(), as 16 hex digits.
    std::string config_hash() const;
};

struct RunResult {
    std::string dataset;
    MoeMode mode = MoeMode::Data;
    std::uint64_t seed = 0;
    std::uint64_t n = 0;
    double accuracy = 0.0;  // percent
    std::optional<double> kappa_m;  // percent
    std::optional<double> kappa_t;  // percent
    double runtime_s = 0.0;
    std::string config_hash;
    std::size_t num_experts = 0;
    std::vector<TracePoint> trace;
};

/// One prequential run of spec with the given seed (stream seed and model seed).
RunResult run_single(const ExperimentSpec& spec, std::uint64_t seed);

/// Runs every (spec, seed) pair on a bounded worker pool. Results come back in
/// job order. Failures are re-thrown after all workers have stopped.
std::vector<RunResult> run_jobs(const std::vector<std::pair<ExperimentSpec, std::uint64_t>>& jobs,
                                std::size_t threads,
                                const std::function<void(const RunResult&)>& on_done = {});

/// A CSV row for a run, matching metrics_csv_header(true). Runtime is
/// printed with millisecond resolution.
std::string result_row(const RunResult& r);
/// result_row without the runtime column, for byte-level reproducibility checks.
std::string result_row_without_runtime(const RunResult& r);

struct AggregateRow {
    std::string dataset;
    MoeMode mode = MoeMode::Data;
    Aggregate accuracy;
    Aggregate kappa_m;
    Aggregate kappa_t;
    std::size_t runs = 0;
    std::string config_hash;
};

AggregateRow aggregate_runs(const std::vector<RunResult>& runs);

std::string aggregate_csv_header();
std::string aggregate_row(const AggregateRow& a);

/// Writes results.csv, aggregate.csv, trace_seed<S>.csv and metadata.json
/// into spec.output_dir (created if missing).
void write_experiment_outputs(const ExperimentSpec& spec, const std::vector<RunResult>& runs);

/// JSON text describing the resolved spec and the build.
std::string metadata_json(const ExperimentSpec& spec, const std::vector<RunResult>& runs);

struct SweepCell {
    std::size_t experts = 0;
    std::size_t top_k = 0;
    double accuracy = 0.0;  // percent, mean over seeds
};

struct SweepResult {
    std::vector<SweepCell> cells;
    /// (experts, top_k) pairs skipped because top_k > experts.
    std::vector<std::pair<std::size_t, std::size_t>> skipped;
};

/// Data-mode grid search over experts x top_k, averaged over spec.seeds.
SweepResult run_sweep(const ExperimentSpec& base, const std::vector<std::size_t>& experts_grid,
                      const std::vector<std::size_t>& topk_grid);

/// "experts,top_k,accuracy" rows, plus a "# skipped" comment line per infeasible cell.
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);

std::string version_string();

}  // namespace driftmoe

#endif  // DRIFTMOE_EXPERIMENT_HPP
