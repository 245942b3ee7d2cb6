/**
 * Prequential metrics: accuracy, Kappa-M against a running majority-class
 * baseline, Kappa-Temporal against a no-change baseline, tumbling-window
 * accuracy traces and mean / sample-standard-deviation aggregation.
 */

#ifndef DRIFTMOE_EVAL_HPP
#define DRIFTMOE_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftmoe {

enum class MajorityBaseline {
    /// Majority of the true labels seen before the current instance.
    Prequential,
    /// Majority of all true labels of the stream, known in hindsight.
    Batch,
};

class MetricAccumulator {
public:
    explicit MetricAccumulator(std::size_t num_classes, MajorityBaseline baseline = MajorityBaseline::Prequential);

    void update(std::size_t predicted, std::size_t label);

    std::uint64_t n() const { return n_; }
    std::uint64_t n_correct() const { return n_correct_; }
    std::uint64_t n_correct_majority() const;
    std::uint64_t n_correct_nochange() const { return n_correct_nochange_; }
    const std::vector<std::uint64_t>& class_counts() const { return class_counts_; }
    MajorityBaseline baseline() const { return baseline_; }

    double accuracy() const;
    double majority_accuracy() const;
    double nochange_accuracy() const;

    /// (p0 - pm) / (1 - pm); empty when pm == 1 or nothing was seen.
    std::optional<double> kappa_m() const;
    /// (p0 - pe) / (1 - pe); empty when pe == 1 or nothing was seen.
    std::optional<double> kappa_temporal() const;

private:
    std::size_t majority_class() const;

    MajorityBaseline baseline_;
    std::uint64_t n_ = 0;
    std::uint64_t n_correct_ = 0;
    std::uint64_t n_correct_majority_ = 0;
    std::uint64_t n_correct_nochange_ = 0;
    std::vector<std::uint64_t> class_counts_;
    std::optional<std::size_t> previous_;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
    /// Set when fewer than two values were given and stddev is reported as 0.
    bool single_value = false;
};

/// Arithmetic mean and sample (n - 1) standard deviation. Throws
/// std::invalid_argument on empty input.
Aggregate aggregate_seeds(std::span<const double> values);

struct TracePoint {
    std::uint64_t window_end = 0;  // one past the last instance index in the window
    double accuracy = 0.0;
    std::uint64_t size = 0;
    std::uint64_t correct = 0;
};

/// Tumbling-window accuracy, built incrementally.
class WindowedTrace {
public:
    explicit WindowedTrace(std::uint64_t window);

    void add(bool correct);
    /// Closes the final partial window, if any.
    void finish();

    std::uint64_t window() const { return window_; }
    const std::vector<TracePoint>& points() const { return points_; }

private:
    std::uint64_t window_;
    std::uint64_t seen_ = 0;
    std::uint64_t in_window_ = 0;
    std::uint64_t correct_ = 0;
    std::vector<TracePoint> points_;
};

/// Tumbling-window accuracy of a correctness sequence; the last partial
/// window is included with its actual size.
std::vector<TracePoint> windowed_accuracy(std::span<const std::uint8_t> correct, std::uint64_t window);

/// "dataset,mode,seed,n,accuracy,kappa_m,kappa_t,runtime_s" (plus ",config_hash" when requested).
std::string metrics_csv_header(bool with_hash = true);

/// Formats a metric for CSV: fixed 6 decimals, "nan" for undefined values.
std::string format_metric(std::optional<double> v);

void write_trace_csv(std::ostream& out, std::span<const TracePoint> points);

}  // namespace driftmoe

#endif  // DRIFTMOE_EVAL_HPP
