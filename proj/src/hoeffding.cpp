#include "driftmoe/hoeffding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>

#include "driftmoe/binary_io.hpp"

namespace driftmoe {

namespace {

// Standard-normal quantiles at i/11, i = 1..10: equal-probability cut points
// for the ten numeric split candidates.
constexpr std::array<double, 10> kNormalDeciles11 = {
    -1.335177736118937,  -0.9084578685373851, -0.6045853465832371, -0.3487556955170447, -0.11418529432142838,
    0.11418529432142838, 0.3487556955170447,  0.6045853465832371,  0.9084578685373851,  1.335177736118937};

constexpr std::uint64_t kTreeMagic = 0x3145455254484D44ULL;  // "DMHTREE1"

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double split_gain(std::span<const double> left, std::span<const double> right, double min_branch_fraction) {
    double n_left = 0.0, n_right = 0.0;
    for (double v : left) n_left += v;
    for (double v : right) n_right += v;
    const double n = n_left + n_right;
    if (n <= 0.0) return -std::numeric_limits<double>::infinity();
    if (n_left / n < min_branch_fraction || n_right / n < min_branch_fraction) {
        return -std::numeric_limits<double>::infinity();
    }
    std::vector<double> pooled(left.size());
    for (std::size_t c = 0; c < left.size(); ++c) pooled[c] = left[c] + right[c];
    return entropy_bits(pooled) - (n_left / n) * entropy_bits(left) - (n_right / n) * entropy_bits(right);
}

/// Scratch buffer that stays on the stack for the usual class counts.
class Scratch {
public:
    explicit Scratch(std::size_t n) : n_(n) {
        if (n > kInline) heap_.resize(n);
    }
    double* data() { return n_ > kInline ? heap_.data() : inline_.data(); }
    double& operator[](std::size_t i) { return data()[i]; }

private:
    static constexpr std::size_t kInline = 32;
    std::size_t n_;
    std::array<double, kInline> inline_{};
    std::vector<double> heap_;
};

}  // namespace

void HoeffdingTreeConfig::validate() const {
    if (!(split_confidence > 0.0 && split_confidence < 1.0)) throw ConfigError("tree: split_confidence must be in (0,1)");
    if (grace_period < 1) throw ConfigError("tree: grace_period must be >= 1");
    if (tie_threshold < 0.0) throw ConfigError("tree: tie_threshold must be >= 0");
    if (numeric_candidates < 1) throw ConfigError("tree: numeric_candidates must be >= 1");
}

double hoeffding_bound(double range, double confidence, double n) noexcept {
    return std::sqrt(range * range * std::log(1.0 / confidence) / (2.0 * n));
}

double entropy_bits(std::span<const double> counts) noexcept {
    double total = 0.0;
    for (double v : counts) total += v;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double v : counts) {
        if (v > 0.0) {
            const double p = v / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

// ------------------------------------------------------ GaussianEstimator

void GaussianEstimator::add(double x) noexcept {
    n_ += 1.0;
    const double delta = x - mean_;
    mean_ += delta / n_;
    m2_ += delta * (x - mean_);
    min_ = std::min(min_, x);
    max_ = std::max(max_, x);
    refresh();
}

double GaussianEstimator::variance() const noexcept {
    const double v = n_ > 1.0 ? m2_ / (n_ - 1.0) : 0.0;
    return std::max(v, kVarianceFloor);
}

void GaussianEstimator::refresh() noexcept {
    const double var = variance();
    log_norm_ = -0.5 * std::log(2.0 * std::numbers::pi * var);
    inv_two_var_ = 0.5 / var;
}

double GaussianEstimator::log_density(double x) const noexcept {
    const double d = x - mean_;
    return log_norm_ - d * d * inv_two_var_;
}

double GaussianEstimator::weight_at_or_below(double threshold) const noexcept {
    if (n_ <= 0.0 || threshold < min_) return 0.0;
    if (threshold >= max_) return n_;
    return n_ * normal_cdf((threshold - mean_) / std::sqrt(variance()));
}

GaussianEstimator GaussianEstimator::from_moments(double n, double mean, double m2, double min, double max) noexcept {
    GaussianEstimator g;
    g.n_ = n;
    g.mean_ = mean;
    g.m2_ = m2;
    g.min_ = min;
    g.max_ = max;
    g.refresh();
    return g;
}

// ------------------------------------------------------------ LeafStats

AttributeLayout::AttributeLayout(const StreamSchema& schema) : kinds(schema.feature_kinds), slot(kinds.size()) {
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        slot[j] = kinds[j] == FeatureKind::Binary ? num_binary++ : num_numeric++;
    }
}

LeafStats::LeafStats(std::shared_ptr<const AttributeLayout> layout, std::size_t num_classes,
                     std::vector<double> initial_class_counts)
    : layout_(std::move(layout)),
      class_counts_(std::move(initial_class_counts)),
      observed_(num_classes, 0.0),
      inv_observed_(num_classes, 0.5),
      binary_counts_(layout_->num_binary * 2 * num_classes, 0.0),
      gaussians_(layout_->num_numeric * num_classes) {
    if (class_counts_.empty()) class_counts_.assign(num_classes, 0.0);
    for (double v : class_counts_) total_weight_ += v;
}

void LeafStats::update(std::span<const double> x, std::size_t y) {
    const std::size_t C = class_counts_.size();
    class_counts_[y] += 1.0;
    total_weight_ += 1.0;
    observed_[y] += 1.0;
    observed_total_ += 1.0;
    inv_observed_[y] = 1.0 / (observed_[y] + 2.0);
    ++since_check_;
    const auto& kinds = layout_->kinds;
    const auto& slot = layout_->slot;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        if (kinds[j] == FeatureKind::Binary) {
            const std::size_t v = x[j] > 0.5 ? 1 : 0;
            binary_counts_[(slot[j] * 2 + v) * C + y] += 1.0;
        } else {
            gaussians_[slot[j] * C + y].add(x[j]);
        }
    }
}

bool LeafStats::is_pure() const {
    std::size_t nonzero = 0;
    for (double v : class_counts_) nonzero += v > 0.0 ? 1 : 0;
    return nonzero < 2;
}

double LeafStats::binary_count(std::size_t attribute, unsigned v, std::size_t c) const {
    return binary_counts_[(layout_->slot[attribute] * 2 + v) * class_counts_.size() + c];
}

const GaussianEstimator& LeafStats::gaussian(std::size_t attribute, std::size_t c) const {
    return gaussians_[layout_->slot[attribute] * class_counts_.size() + c];
}

void LeafStats::predict_proba(std::span<const double> x, std::span<double> out) const {
    const std::size_t C = class_counts_.size();
    if (total_weight_ <= 0.0 && observed_total_ <= 0.0) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(C), 1.0 / static_cast<double>(C));
        return;
    }
    Scratch score(C), prod(C), term(C);
    const double prior_norm = total_weight_ + static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c) {
        score[c] = std::log((class_counts_[c] + 1.0) / prior_norm);
        prod[c] = 1.0;
    }
    // Binary likelihoods are multiplied in linear space and folded into the
    // log score every 32 attributes; each factor is >= 1/(n+2), so a block
    // cannot underflow for any realistic n.
    const auto& kinds = layout_->kinds;
    const auto& slot = layout_->slot;
    std::size_t in_block = 0;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        if (kinds[j] == FeatureKind::Binary) {
            const std::size_t v = x[j] > 0.5 ? 1 : 0;
            const double* counts = &binary_counts_[(slot[j] * 2 + v) * C];
            for (std::size_t c = 0; c < C; ++c) prod[c] *= (counts[c] + 1.0) * inv_observed_[c];
            if (++in_block == 32) {
                for (std::size_t c = 0; c < C; ++c) {
                    score[c] += std::log(prod[c]);
                    prod[c] = 1.0;
                }
                in_block = 0;
            }
        } else {
            const GaussianEstimator* g = &gaussians_[slot[j] * C];
            bool informative = false;
            for (std::size_t c = 0; c < C; ++c) {
                if (g[c].count() > 0.0) {
                    term[c] = g[c].log_density(x[j]);
                    informative = true;
                } else {
                    term[c] = -std::numeric_limits<double>::infinity();
                }
            }
            if (informative) {
                for (std::size_t c = 0; c < C; ++c) score[c] += term[c];
            }
        }
    }
    if (in_block > 0) {
        for (std::size_t c = 0; c < C; ++c) score[c] += std::log(prod[c]);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) best = std::max(best, score[c]);
    if (!std::isfinite(best)) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(C), 1.0 / static_cast<double>(C));
        return;
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        out[c] = std::exp(score[c] - best);
        sum += out[c];
    }
    for (std::size_t c = 0; c < C; ++c) out[c] /= sum;
}

std::vector<double> LeafStats::predict_proba(std::span<const double> x) const {
    std::vector<double> out(class_counts_.size());
    predict_proba(x, out);
    return out;
}

SplitCandidate LeafStats::best_split(std::size_t attribute, std::size_t numeric_candidates,
                                     double min_branch_fraction) const {
    const std::size_t C = class_counts_.size();
    SplitCandidate best;
    best.attribute = attribute;
    best.left.assign(C, 0.0);
    best.right.assign(C, 0.0);
    if (layout_->kinds[attribute] == FeatureKind::Binary) {
        for (std::size_t c = 0; c < C; ++c) {
            best.left[c] = binary_count(attribute, 0, c);
            best.right[c] = binary_count(attribute, 1, c);
        }
        best.threshold = 0.5;
        best.merit = split_gain(best.left, best.right, min_branch_fraction);
        return best;
    }

    const GaussianEstimator* g = &gaussians_[layout_->slot[attribute] * C];
    double n = 0.0, mean = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t c = 0; c < C; ++c) {
        if (g[c].count() <= 0.0) continue;
        n += g[c].count();
        mean += g[c].count() * g[c].mean();
        lo = std::min(lo, g[c].min());
        hi = std::max(hi, g[c].max());
    }
    if (n <= 0.0 || !(hi > lo)) return best;
    mean /= n;
    double m2 = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        if (g[c].count() <= 0.0) continue;
        const double d = g[c].mean() - mean;
        m2 += g[c].m2() + g[c].count() * d * d;
    }
    const double sd = std::sqrt(m2 / n);
    if (!(sd > 0.0)) return best;

    std::vector<double> left(C), right(C);
    const std::size_t k = std::min<std::size_t>(numeric_candidates, kNormalDeciles11.size());
    for (std::size_t i = 0; i < k; ++i) {
        // With fewer than ten candidates, spread them over the decile grid.
        const std::size_t q = k == kNormalDeciles11.size() ? i : (i + 1) * (kNormalDeciles11.size() + 1) / (k + 1) - 1;
        const double threshold = mean + sd * kNormalDeciles11[q];
        if (!(threshold > lo && threshold < hi)) continue;
        for (std::size_t c = 0; c < C; ++c) {
            left[c] = g[c].weight_at_or_below(threshold);
            right[c] = g[c].count() - left[c];
        }
        const double merit = split_gain(left, right, min_branch_fraction);
        if (merit > best.merit) {
            best.merit = merit;
            best.threshold = threshold;
            best.left = left;
            best.right = right;
        }
    }
    return best;
}

void LeafStats::save(std::ostream& out) const {
    const std::size_t C = class_counts_.size();
    binio::write_u64(out, C);
    for (std::size_t c = 0; c < C; ++c) {
        binio::write_f64(out, class_counts_[c]);
        binio::write_f64(out, observed_[c]);
    }
    binio::write_f64(out, total_weight_);
    binio::write_f64(out, observed_total_);
    binio::write_u64(out, since_check_);
    binio::write_u64(out, binary_counts_.size());
    for (double v : binary_counts_) binio::write_f64(out, v);
    binio::write_u64(out, gaussians_.size());
    for (const auto& g : gaussians_) {
        binio::write_f64(out, g.count());
        binio::write_f64(out, g.mean());
        binio::write_f64(out, g.m2());
        binio::write_f64(out, g.min());
        binio::write_f64(out, g.max());
    }
}

std::unique_ptr<LeafStats> LeafStats::load(std::istream& in, std::shared_ptr<const AttributeLayout> layout) {
    const auto C = binio::read_u64(in);
    if (C < 2 || C > (1u << 20)) throw std::runtime_error("tree load: bad class count");
    std::vector<double> counts(C), observed(C);
    for (std::size_t c = 0; c < C; ++c) {
        counts[c] = binio::read_f64(in);
        observed[c] = binio::read_f64(in);
    }
    const double total_weight = binio::read_f64(in);
    const double observed_total = binio::read_f64(in);
    auto leaf = std::make_unique<LeafStats>(std::move(layout), C, counts);
    leaf->since_check_ = binio::read_u64(in);
    leaf->total_weight_ = total_weight;
    leaf->observed_total_ = observed_total;
    for (std::size_t c = 0; c < C; ++c) {
        leaf->observed_[c] = observed[c];
        leaf->inv_observed_[c] = 1.0 / (observed[c] + 2.0);
    }
    if (binio::read_u64(in) != leaf->binary_counts_.size()) throw std::runtime_error("tree load: layout mismatch");
    for (double& v : leaf->binary_counts_) v = binio::read_f64(in);
    if (binio::read_u64(in) != leaf->gaussians_.size()) throw std::runtime_error("tree load: layout mismatch");
    for (auto& g : leaf->gaussians_) {
        const double n = binio::read_f64(in);
        const double mean = binio::read_f64(in);
        const double m2 = binio::read_f64(in);
        const double lo = binio::read_f64(in);
        const double hi = binio::read_f64(in);
        g = GaussianEstimator::from_moments(n, mean, m2, lo, hi);
    }
    return leaf;
}

double info_gain(const LeafStats& stats, std::size_t attribute, std::size_t numeric_candidates,
                 double min_branch_fraction) {
    return stats.best_split(attribute, numeric_candidates, min_branch_fraction).merit;
}

SplitDecision evaluate_split(const LeafStats& stats, const HoeffdingTreeConfig& config) {
    SplitDecision decision;
    if (stats.is_pure()) return decision;
    // The "no split" option competes with merit 0.
    double best = 0.0, second = 0.0;
    bool have_best = false;
    for (std::size_t a = 0; a < stats.num_attributes(); ++a) {
        SplitCandidate cand = stats.best_split(a, config.numeric_candidates, config.min_branch_fraction);
        if (cand.merit > best) {
            second = best;
            best = cand.merit;
            decision.candidate = std::move(cand);
            have_best = true;
        } else if (cand.merit > second) {
            second = cand.merit;
        }
    }
    const double range = std::log2(static_cast<double>(stats.num_classes()));
    decision.bound = hoeffding_bound(range, config.split_confidence, stats.total_weight());
    decision.best_merit = best;
    decision.second_merit = second;
    decision.split = have_best && (best - second > decision.bound || decision.bound < config.tie_threshold);
    return decision;
}

// -------------------------------------------------------- HoeffdingTree

HoeffdingTree::HoeffdingTree(StreamSchema schema, HoeffdingTreeConfig config)
    : schema_(std::move(schema)), config_(config) {
    schema_.validate();
    config_.validate();
    layout_ = std::make_shared<const AttributeLayout>(schema_);
    Node root;
    root.leaf = std::make_unique<LeafStats>(layout_, schema_.num_classes);
    nodes_.push_back(std::move(root));
}

std::size_t HoeffdingTree::find_leaf(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes_[i].attribute >= 0) {
        const Node& n = nodes_[i];
        i = n.children[x[static_cast<std::size_t>(n.attribute)] <= n.threshold ? 0 : 1];
    }
    return i;
}

const LeafStats& HoeffdingTree::leaf_for(std::span<const double> x) const { return *nodes_[find_leaf(x)].leaf; }

void HoeffdingTree::train(std::span<const double> x, std::size_t y) {
    const std::size_t i = find_leaf(x);
    nodes_[i].leaf->update(x, y);
    ++instances_seen_;
    if (nodes_[i].leaf->instances_since_last_split_check() >= config_.grace_period) attempt_split(i);
}

void HoeffdingTree::attempt_split(std::size_t node_index) {
    LeafStats& leaf = *nodes_[node_index].leaf;
    if (config_.max_depth && nodes_[node_index].depth >= *config_.max_depth) {
        leaf.reset_split_check();
        return;
    }
    SplitDecision decision = evaluate_split(leaf, config_);
    leaf.reset_split_check();
    if (!decision.split) return;

    // Children start with the parent's class counts projected onto each
    // branch; their attribute estimators start empty.
    const std::size_t C = schema_.num_classes;
    const auto& counts = leaf.class_counts();
    const auto& cand = decision.candidate;
    double mass_left = 0.0, mass_total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        mass_left += cand.left[c];
        mass_total += cand.left[c] + cand.right[c];
    }
    const double fallback = mass_total > 0.0 ? mass_left / mass_total : 0.5;
    std::vector<double> left(C), right(C);
    for (std::size_t c = 0; c < C; ++c) {
        const double seen = cand.left[c] + cand.right[c];
        const double frac = seen > 0.0 ? cand.left[c] / seen : fallback;
        left[c] = counts[c] * frac;
        right[c] = counts[c] - left[c];
    }

    const std::uint32_t depth = nodes_[node_index].depth + 1;
    const auto first_child = static_cast<std::uint32_t>(nodes_.size());
    Node l, r;
    l.depth = r.depth = depth;
    l.leaf = std::make_unique<LeafStats>(layout_, C, std::move(left));
    r.leaf = std::make_unique<LeafStats>(layout_, C, std::move(right));
    nodes_.push_back(std::move(l));
    nodes_.push_back(std::move(r));

    Node& parent = nodes_[node_index];
    parent.attribute = static_cast<std::int64_t>(cand.attribute);
    parent.threshold = cand.threshold;
    parent.children[0] = first_child;
    parent.children[1] = first_child + 1;
    parent.leaf.reset();
    ++num_splits_;
}

void HoeffdingTree::predict_proba(std::span<const double> x, std::span<double> out) const {
    nodes_[find_leaf(x)].leaf->predict_proba(x, out);
}

std::vector<double> HoeffdingTree::predict_proba(std::span<const double> x) const {
    std::vector<double> out(schema_.num_classes);
    predict_proba(x, out);
    return out;
}

std::size_t HoeffdingTree::predict(std::span<const double> x) const {
    const auto p = predict_proba(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::size_t HoeffdingTree::num_leaves() const {
    std::size_t n = 0;
    for (const auto& node : nodes_) n += node.leaf ? 1 : 0;
    return n;
}

std::size_t HoeffdingTree::depth() const {
    std::size_t d = 0;
    for (const auto& node : nodes_) d = std::max<std::size_t>(d, node.depth);
    return d;
}

std::optional<std::size_t> HoeffdingTree::root_split_attribute() const {
    if (nodes_[0].attribute < 0) return std::nullopt;
    return static_cast<std::size_t>(nodes_[0].attribute);
}

void HoeffdingTree::dump(std::ostream& out) const {
    // Depth-first so that children follow their parent.
    std::vector<std::size_t> stack = {0};
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const Node& n = nodes_[i];
        out << n.depth << ' ' << std::string(2 * n.depth, ' ');
        if (n.attribute >= 0) {
            out << "split x[" << n.attribute << "] <= " << n.threshold << '\n';
            stack.push_back(n.children[1]);
            stack.push_back(n.children[0]);
        } else {
            out << "leaf [";
            const auto& counts = n.leaf->class_counts();
            for (std::size_t c = 0; c < counts.size(); ++c) out << (c ? " " : "") << counts[c];
            out << "]\n";
        }
    }
}

void HoeffdingTree::save(std::ostream& out) const {
    binio::write_u64(out, kTreeMagic);
    binio::write_u64(out, schema_.num_features);
    for (auto k : schema_.feature_kinds) binio::write_u64(out, k == FeatureKind::Binary ? 1 : 0);
    binio::write_u64(out, schema_.num_classes);
    binio::write_u64(out, schema_.class_names.size());
    for (const auto& name : schema_.class_names) binio::write_string(out, name);
    binio::write_u64(out, config_.grace_period);
    binio::write_f64(out, config_.split_confidence);
    binio::write_f64(out, config_.tie_threshold);
    binio::write_u64(out, config_.max_depth ? *config_.max_depth + 1 : 0);
    binio::write_u64(out, config_.numeric_candidates);
    binio::write_f64(out, config_.min_branch_fraction);
    binio::write_u64(out, instances_seen_);
    binio::write_u64(out, num_splits_);
    binio::write_u64(out, nodes_.size());
    for (const auto& n : nodes_) {
        binio::write_u64(out, static_cast<std::uint64_t>(n.attribute));
        binio::write_f64(out, n.threshold);
        binio::write_u64(out, n.children[0]);
        binio::write_u64(out, n.children[1]);
        binio::write_u64(out, n.depth);
        if (n.leaf) n.leaf->save(out);
    }
}

HoeffdingTree HoeffdingTree::load(std::istream& in) {
    binio::expect_magic(in, kTreeMagic, "tree load");
    StreamSchema schema;
    schema.num_features = binio::read_u64(in);
    if (schema.num_features > (1u << 24)) throw std::runtime_error("tree load: implausible feature count");
    for (std::size_t j = 0; j < schema.num_features; ++j) {
        schema.feature_kinds.push_back(binio::read_u64(in) ? FeatureKind::Binary : FeatureKind::Numeric);
    }
    schema.num_classes = binio::read_u64(in);
    const auto names = binio::read_u64(in);
    if (names > schema.num_classes) throw std::runtime_error("tree load: bad class names");
    for (std::size_t c = 0; c < names; ++c) schema.class_names.push_back(binio::read_string(in));
    HoeffdingTreeConfig config;
    config.grace_period = binio::read_u64(in);
    config.split_confidence = binio::read_f64(in);
    config.tie_threshold = binio::read_f64(in);
    if (const auto md = binio::read_u64(in)) config.max_depth = md - 1;
    config.numeric_candidates = binio::read_u64(in);
    config.min_branch_fraction = binio::read_f64(in);

    HoeffdingTree tree(std::move(schema), config);
    tree.instances_seen_ = binio::read_u64(in);
    tree.num_splits_ = binio::read_u64(in);
    const auto count = binio::read_u64(in);
    if (count == 0 || count > (1u << 30)) throw std::runtime_error("tree load: bad node count");
    tree.nodes_.clear();
    tree.nodes_.resize(count);
    for (auto& n : tree.nodes_) {
        n.attribute = static_cast<std::int64_t>(binio::read_u64(in));
        n.threshold = binio::read_f64(in);
        n.children[0] = static_cast<std::uint32_t>(binio::read_u64(in));
        n.children[1] = static_cast<std::uint32_t>(binio::read_u64(in));
        n.depth = static_cast<std::uint32_t>(binio::read_u64(in));
        if (n.attribute < 0) {
            n.leaf = LeafStats::load(in, tree.layout_);
        } else if (static_cast<std::size_t>(n.attribute) >= tree.schema_.num_features || n.children[0] >= count ||
                   n.children[1] >= count) {
            throw std::runtime_error("tree load: corrupt split node");
        }
    }
    return tree;
}

// ------------------------------------------------------- BinaryTaskTree

namespace {

StreamSchema binary_schema(const StreamSchema& schema) {
    StreamSchema s = schema;
    s.num_classes = 2;
    s.class_names.clear();
    return s;
}

}  // namespace

BinaryTaskTree::BinaryTaskTree(const StreamSchema& schema, std::size_t target, HoeffdingTreeConfig config)
    : target_(target), tree_(binary_schema(schema), config) {
    if (target >= schema.num_classes) throw ConfigError("task tree: target class out of range");
}

double BinaryTaskTree::positive_probability(std::span<const double> x) const {
    std::array<double, 2> p{};
    tree_.predict_proba(x, p);
    return p[1];
}

void BinaryTaskTree::save(std::ostream& out) const {
    binio::write_u64(out, target_);
    tree_.save(out);
}

BinaryTaskTree BinaryTaskTree::load(std::istream& in) {
    const auto target = binio::read_u64(in);
    auto tree = HoeffdingTree::load(in);
    if (tree.num_classes() != 2) throw std::runtime_error("task tree load: not a binary tree");
    return BinaryTaskTree(target, std::move(tree));
}

BinaryTaskTree make_binary_task_tree(const StreamSchema& schema, std::size_t target, HoeffdingTreeConfig config) {
    return BinaryTaskTree(schema, target, config);
}

}  // namespace driftmoe
