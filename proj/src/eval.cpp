#include "driftmoe/eval.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace driftmoe {

MetricAccumulator::MetricAccumulator(std::size_t num_classes, MajorityBaseline baseline)
    : baseline_(baseline), class_counts_(num_classes, 0) {
    if (num_classes == 0) throw std::invalid_argument("MetricAccumulator: need at least one class");
}

std::size_t MetricAccumulator::majority_class() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < class_counts_.size(); ++c) {
        if (class_counts_[c] > class_counts_[best]) best = c;
    }
    return best;
}

void MetricAccumulator::update(std::size_t predicted, std::size_t label) {
    if (label >= class_counts_.size()) throw std::invalid_argument("MetricAccumulator: label out of range");
    if (predicted == label) ++n_correct_;
    // An empty history has no majority class, so the first instance is a miss.
    if (n_ > 0 && majority_class() == label) ++n_correct_majority_;
    if (previous_ && *previous_ == label) ++n_correct_nochange_;
    ++class_counts_[label];
    previous_ = label;
    ++n_;
}

std::uint64_t MetricAccumulator::n_correct_majority() const {
    if (baseline_ == MajorityBaseline::Batch) return n_ == 0 ? 0 : class_counts_[majority_class()];
    return n_correct_majority_;
}

double MetricAccumulator::accuracy() const { return n_ == 0 ? 0.0 : static_cast<double>(n_correct_) / n_; }

double MetricAccumulator::majority_accuracy() const {
    return n_ == 0 ? 0.0 : static_cast<double>(n_correct_majority()) / n_;
}

double MetricAccumulator::nochange_accuracy() const {
    return n_ == 0 ? 0.0 : static_cast<double>(n_correct_nochange_) / n_;
}

std::optional<double> MetricAccumulator::kappa_m() const {
    if (n_ == 0 || n_correct_majority() == n_) return std::nullopt;
    const double pm = majority_accuracy();
    return (accuracy() - pm) / (1.0 - pm);
}

std::optional<double> MetricAccumulator::kappa_temporal() const {
    if (n_ == 0 || n_correct_nochange_ == n_) return std::nullopt;
    const double pe = nochange_accuracy();
    return (accuracy() - pe) / (1.0 - pe);
}

Aggregate aggregate_seeds(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("aggregate_seeds: no values");
    Aggregate a;
    a.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    a.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) {
        a.single_value = true;
        return a;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return a;
}

WindowedTrace::WindowedTrace(std::uint64_t window) : window_(window) {
    if (window == 0) throw std::invalid_argument("windowed trace: window must be >= 1");
}

void WindowedTrace::add(bool correct) {
    ++seen_;
    ++in_window_;
    if (correct) ++correct_;
    if (in_window_ == window_) finish();
}

void WindowedTrace::finish() {
    if (in_window_ == 0) return;
    points_.push_back({seen_, static_cast<double>(correct_) / static_cast<double>(in_window_), in_window_, correct_});
    in_window_ = 0;
    correct_ = 0;
}

std::vector<TracePoint> windowed_accuracy(std::span<const std::uint8_t> correct, std::uint64_t window) {
    WindowedTrace trace(window);
    for (auto c : correct) trace.add(c != 0);
    trace.finish();
    return trace.points();
}

std::string metrics_csv_header(bool with_hash) {
    std::string h = "dataset,mode,seed,n,accuracy,kappa_m,kappa_t,runtime_s";
    if (with_hash) h += ",config_hash";
    return h;
}

std::string format_metric(std::optional<double> v) {
    if (!v || !std::isfinite(*v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

void write_trace_csv(std::ostream& out, std::span<const TracePoint> points) {
    out << "window_end,accuracy\n";
    for (const auto& p : points) out << p.window_end << ',' << format_metric(p.accuracy) << '\n';
}

}  // namespace driftmoe
