/**
 * Incremental Hoeffding tree with Naive-Bayes leaves.
 *
 * Leaves keep per-class counts for binary attributes and a per-class
 * Gaussian estimator for numeric attributes. A leaf is evaluated for a split
 * every `grace_period` instances; it splits on the best attribute when the
 * information-gain advantage over the runner-up exceeds the Hoeffding bound,
 * or when the bound falls below the tie threshold. All splits are binary:
 * `x <= threshold` goes to child 0 (binary attributes use threshold 0.5).
 *
 * Training is RNG-free, so identical input sequences produce identical trees.
 */

#ifndef DRIFTMOE_HOEFFDING_HPP
#define DRIFTMOE_HOEFFDING_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "driftmoe/stream.hpp"

namespace driftmoe {

struct HoeffdingTreeConfig {
    std::size_t grace_period = 50;
    double split_confidence = 1e-7;  // delta
    double tie_threshold = 0.05;     // tau
    std::optional<std::size_t> max_depth;
    std::size_t numeric_candidates = 10;
    /// A split needs at least two branches holding this fraction of the mass.
    double min_branch_fraction = 0.01;

    void validate() const;
};

/// epsilon = sqrt(R^2 ln(1/delta) / (2n)).
double hoeffding_bound(double range, double confidence, double n) noexcept;

/// Shannon entropy in bits of an unnormalised distribution.
double entropy_bits(std::span<const double> counts) noexcept;

/// Streaming Gaussian estimate of one attribute for one class.
class GaussianEstimator {
public:
    static constexpr double kVarianceFloor = 1e-12;

    void add(double x) noexcept;

    double count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    /// Sample variance (n - 1 denominator), floored.
    double variance() const noexcept;
    double min() const noexcept { return min_; }
    double max() const noexcept { return max_; }
    double m2() const noexcept { return m2_; }

    double log_density(double x) const noexcept;
    /// Estimated number of observations <= threshold, clamped by the observed range.
    double weight_at_or_below(double threshold) const noexcept;

    static GaussianEstimator from_moments(double n, double mean, double m2, double min, double max) noexcept;

private:
    void refresh() noexcept;

    double n_ = 0.0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double min_ = std::numeric_limits<double>::infinity();
    double max_ = -std::numeric_limits<double>::infinity();
    double log_norm_ = 0.0;     // -0.5 ln(2 pi var)
    double inv_two_var_ = 0.0;  // 1 / (2 var)
};

/// Maps schema attributes to their storage slot in a leaf.
struct AttributeLayout {
    std::vector<FeatureKind> kinds;
    std::vector<std::size_t> slot;  // index among attributes of the same kind
    std::size_t num_binary = 0;
    std::size_t num_numeric = 0;

    explicit AttributeLayout(const StreamSchema& schema);
    AttributeLayout() = default;
};

/// A candidate binary split of a leaf.
struct SplitCandidate {
    std::size_t attribute = 0;
    double threshold = 0.5;
    double merit = -std::numeric_limits<double>::infinity();
    std::vector<double> left;   // per-class mass with x <= threshold
    std::vector<double> right;  // per-class mass with x > threshold
};

class LeafStats {
public:
    LeafStats(std::shared_ptr<const AttributeLayout> layout, std::size_t num_classes,
              std::vector<double> initial_class_counts = {});

    void update(std::span<const double> x, std::size_t y);

    std::size_t num_classes() const { return class_counts_.size(); }
    std::size_t num_attributes() const { return layout_->kinds.size(); }
    const std::vector<double>& class_counts() const { return class_counts_; }
    double total_weight() const { return total_weight_; }
    /// Instances observed by the attribute estimators (since this leaf was created).
    double observed_weight() const { return observed_total_; }
    std::uint64_t instances_since_last_split_check() const { return since_check_; }
    void reset_split_check() { since_check_ = 0; }
    bool is_pure() const;

    /// Count of class c instances with binary attribute `attribute` equal to v.
    double binary_count(std::size_t attribute, unsigned v, std::size_t c) const;
    const GaussianEstimator& gaussian(std::size_t attribute, std::size_t c) const;

    /// Naive-Bayes class probabilities for x, written to `out` (sums to 1).
    void predict_proba(std::span<const double> x, std::span<double> out) const;
    std::vector<double> predict_proba(std::span<const double> x) const;

    /// Best binary split on one attribute (threshold search for numeric ones).
    SplitCandidate best_split(std::size_t attribute, std::size_t numeric_candidates,
                              double min_branch_fraction) const;

    void save(std::ostream& out) const;
    static std::unique_ptr<LeafStats> load(std::istream& in, std::shared_ptr<const AttributeLayout> layout);

private:
    std::shared_ptr<const AttributeLayout> layout_;
    std::vector<double> class_counts_;
    double total_weight_ = 0.0;
    std::vector<double> observed_;        // per-class counts seen by the estimators
    std::vector<double> inv_observed_;    // 1 / (observed_[c] + 2)
    double observed_total_ = 0.0;
    std::vector<double> binary_counts_;   // [slot][value][class]
    std::vector<GaussianEstimator> gaussians_;  // [slot][class]
    std::uint64_t since_check_ = 0;
};

/// Information gain (bits) of the best split on `attribute`, or -inf when no
/// admissible split exists.
double info_gain(const LeafStats& stats, std::size_t attribute, std::size_t numeric_candidates = 10,
                 double min_branch_fraction = 0.01);

struct SplitDecision {
    bool split = false;
    SplitCandidate candidate;
    double best_merit = 0.0;
    double second_merit = 0.0;
    double bound = 0.0;
};

/// The split rule applied to a leaf whose grace period has elapsed. Does not
/// look at the grace-period counter.
SplitDecision evaluate_split(const LeafStats& stats, const HoeffdingTreeConfig& config);

class HoeffdingTree {
public:
    HoeffdingTree(StreamSchema schema, HoeffdingTreeConfig config = {});

    HoeffdingTree(const HoeffdingTree&) = delete;
    HoeffdingTree& operator=(const HoeffdingTree&) = delete;
    HoeffdingTree(HoeffdingTree&&) noexcept = default;
    HoeffdingTree& operator=(HoeffdingTree&&) noexcept = default;

    void train(std::span<const double> x, std::size_t y);

    void predict_proba(std::span<const double> x, std::span<double> out) const;
    std::vector<double> predict_proba(std::span<const double> x) const;
    /// argmax of predict_proba, lowest index on ties.
    std::size_t predict(std::span<const double> x) const;

    const LeafStats& leaf_for(std::span<const double> x) const;

    const StreamSchema& schema() const { return schema_; }
    const HoeffdingTreeConfig& config() const { return config_; }
    std::size_t num_classes() const { return schema_.num_classes; }
    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_leaves() const;
    std::size_t depth() const;
    std::uint64_t instances_seen() const { return instances_seen_; }
    std::uint64_t num_splits() const { return num_splits_; }
    std::optional<std::size_t> root_split_attribute() const;

    /// Calls f(const LeafStats&) for every leaf, in node order.
    template <typename F>
    void for_each_leaf(F&& f) const {
        for (const auto& node : nodes_) {
            if (node.leaf) f(*node.leaf);
        }
    }

    /// One node per line: depth, then either the split test or the leaf class
    /// histogram.
    void dump(std::ostream& out) const;

    void save(std::ostream& out) const;
    static HoeffdingTree load(std::istream& in);

private:
    struct Node {
        std::int64_t attribute = -1;  // -1 for leaves
        double threshold = 0.0;
        std::uint32_t children[2] = {0, 0};
        std::uint32_t depth = 0;
        std::unique_ptr<LeafStats> leaf;
    };

    std::size_t find_leaf(std::span<const double> x) const;
    void attempt_split(std::size_t node_index);

    StreamSchema schema_;
    HoeffdingTreeConfig config_;
    std::shared_ptr<const AttributeLayout> layout_;
    std::vector<Node> nodes_;
    std::uint64_t instances_seen_ = 0;
    std::uint64_t num_splits_ = 0;
};

/// One-vs-rest expert: a two-class tree whose positive class is `target`.
class BinaryTaskTree {
public:
    BinaryTaskTree(const StreamSchema& schema, std::size_t target, HoeffdingTreeConfig config = {});

    std::size_t target() const { return target_; }
    /// Trains on (x, 1[y == target]).
    void train(std::span<const double> x, std::size_t y) { tree_.train(x, y == target_ ? 1 : 0); }
    /// P(y == target | x).
    double positive_probability(std::span<const double> x) const;

    const HoeffdingTree& tree() const { return tree_; }

    void save(std::ostream& out) const;
    static BinaryTaskTree load(std::istream& in);

private:
    BinaryTaskTree(std::size_t target, HoeffdingTree tree) : target_(target), tree_(std::move(tree)) {}

    std::size_t target_;
    HoeffdingTree tree_;
};

/// Binary task expert for class `target` of `schema`. Throws ConfigError if
/// target >= num_classes.
BinaryTaskTree make_binary_task_tree(const StreamSchema& schema, std::size_t target, HoeffdingTreeConfig config = {});

}  // namespace driftmoe

#endif  // DRIFTMOE_HOEFFDING_HPP
