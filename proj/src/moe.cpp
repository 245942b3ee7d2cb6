#include "driftmoe/moe.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "driftmoe/binary_io.hpp"

namespace driftmoe {

namespace {

constexpr std::uint64_t kCheckpointMagic = 0x314B43454F4D4D44ULL;  // "DMMOECK1"
constexpr std::uint64_t kCheckpointVersion = 1;
// Kept apart from the sub-streams used by the stream generators.
constexpr std::uint64_t kRouterInitStream = 0x524F55544552ULL;

void write_schema(std::ostream& out, const StreamSchema& s) {
    binio::write_u64(out, s.num_features);
    for (auto k : s.feature_kinds) binio::write_u64(out, k == FeatureKind::Binary ? 1 : 0);
    binio::write_u64(out, s.num_classes);
    binio::write_u64(out, s.class_names.size());
    for (const auto& name : s.class_names) binio::write_string(out, name);
}

StreamSchema read_schema(std::istream& in) {
    StreamSchema s;
    s.num_features = binio::read_u64(in);
    if (s.num_features > (1u << 24)) throw std::runtime_error("checkpoint: implausible feature count");
    s.feature_kinds.resize(s.num_features);
    for (auto& k : s.feature_kinds) k = binio::read_u64(in) ? FeatureKind::Binary : FeatureKind::Numeric;
    s.num_classes = binio::read_u64(in);
    const auto names = binio::read_u64(in);
    if (names > (1u << 24)) throw std::runtime_error("checkpoint: implausible class-name count");
    for (std::uint64_t i = 0; i < names; ++i) s.class_names.push_back(binio::read_string(in));
    s.validate();
    return s;
}

void write_config(std::ostream& out, const MoeConfig& c) {
    binio::write_u64(out, c.mode == MoeMode::Task ? 1 : 0);
    binio::write_u64(out, c.num_experts);
    binio::write_u64(out, c.top_k);
    binio::write_u64(out, c.hidden1);
    binio::write_u64(out, c.hidden2);
    binio::write_f64(out, c.learning_rate);
    binio::write_u64(out, c.batch_size);
    binio::write_u64(out, c.stale_logits ? 1 : 0);
    binio::write_u64(out, c.task_mask == TaskMaskRule::Symmetric ? 1 : 0);
    binio::write_f64(out, c.task_threshold);
    binio::write_u64(out, c.tree.grace_period);
    binio::write_f64(out, c.tree.split_confidence);
    binio::write_f64(out, c.tree.tie_threshold);
    binio::write_u64(out, c.tree.max_depth ? *c.tree.max_depth + 1 : 0);
    binio::write_u64(out, c.tree.numeric_candidates);
    binio::write_f64(out, c.tree.min_branch_fraction);
    binio::write_u64(out, c.seed);
}

MoeConfig read_config(std::istream& in) {
    MoeConfig c;
    c.mode = binio::read_u64(in) ? MoeMode::Task : MoeMode::Data;
    c.num_experts = binio::read_u64(in);
    c.top_k = binio::read_u64(in);
    c.hidden1 = binio::read_u64(in);
    c.hidden2 = binio::read_u64(in);
    c.learning_rate = binio::read_f64(in);
    c.batch_size = binio::read_u64(in);
    c.stale_logits = binio::read_u64(in) != 0;
    c.task_mask = binio::read_u64(in) ? TaskMaskRule::Symmetric : TaskMaskRule::PositiveMatch;
    c.task_threshold = binio::read_f64(in);
    c.tree.grace_period = binio::read_u64(in);
    c.tree.split_confidence = binio::read_f64(in);
    c.tree.tie_threshold = binio::read_f64(in);
    if (const auto depth = binio::read_u64(in)) c.tree.max_depth = depth - 1;
    c.tree.numeric_candidates = binio::read_u64(in);
    c.tree.min_branch_fraction = binio::read_f64(in);
    c.seed = binio::read_u64(in);
    return c;
}

}  // namespace

std::string to_string(MoeMode mode) { return mode == MoeMode::Data ? "data" : "task"; }

MoeMode parse_mode(const std::string& text) {
    if (text == "data") return MoeMode::Data;
    if (text == "task") return MoeMode::Task;
    throw ConfigError("unknown mode '" + text + "' (expected data or task)");
}

std::string to_string(TaskMaskRule rule) { return rule == TaskMaskRule::PositiveMatch ? "positive" : "symmetric"; }

TaskMaskRule parse_task_mask_rule(const std::string& text) {
    if (text == "positive") return TaskMaskRule::PositiveMatch;
    if (text == "symmetric") return TaskMaskRule::Symmetric;
    throw ConfigError("unknown task mask rule '" + text + "' (expected positive or symmetric)");
}

std::size_t MoeConfig::resolved_experts(std::size_t num_classes) const {
    return mode == MoeMode::Task ? num_classes : num_experts;
}

void MoeConfig::validate(const StreamSchema& schema) const {
    schema.validate();
    tree.validate();
    if (mode == MoeMode::Data) {
        if (num_experts == 0) throw ConfigError("experts must be >= 1");
        if (top_k == 0 || top_k > num_experts) throw ConfigError("top_k must lie in [1, experts]");
    }
    if (!(task_threshold > 0.0 && task_threshold < 1.0)) throw ConfigError("task_threshold must lie in (0, 1)");
    RouterConfig rc{schema.num_features, resolved_experts(schema.num_classes), hidden1, hidden2, learning_rate};
    rc.batch_size = batch_size;
    rc.validate();
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

std::vector<std::size_t> top_k_indices(std::span<const double> w, std::size_t k) {
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return w[a] > w[b] || (w[a] == w[b] && a < b); });
    idx.resize(k);
    return idx;
}

// ---------------------------------------------------------- DriftMoeModel

DriftMoeModel::DriftMoeModel(StreamSchema schema, MoeConfig config)
    : schema_(std::move(schema)), config_(std::move(config)) {
    config_.validate(schema_);
    num_experts_ = config_.resolved_experts(schema_.num_classes);
    RouterConfig rc;
    rc.input_dim = schema_.num_features;
    rc.num_experts = num_experts_;
    rc.hidden1 = config_.hidden1;
    rc.hidden2 = config_.hidden2;
    rc.learning_rate = config_.learning_rate;
    rc.batch_size = config_.batch_size;
    rc.stale_logits = config_.stale_logits;
    router_ = Router(rc, Rng::derive(config_.seed, kRouterInitStream).next_u64());
    standardizer_ = RunningStandardizer(schema_.num_features);
    if (config_.mode == MoeMode::Data) {
        data_experts_.reserve(num_experts_);
        for (std::size_t i = 0; i < num_experts_; ++i) data_experts_.emplace_back(schema_, config_.tree);
    } else {
        task_experts_.reserve(num_experts_);
        for (std::size_t i = 0; i < num_experts_; ++i) {
            task_experts_.push_back(make_binary_task_tree(schema_, i, config_.tree));
        }
    }
}

const HoeffdingTree& DriftMoeModel::data_expert(std::size_t i) const {
    if (config_.mode != MoeMode::Data) throw std::logic_error("data_expert: model is in Task mode");
    return data_experts_.at(i);
}

const BinaryTaskTree& DriftMoeModel::task_expert(std::size_t i) const {
    if (config_.mode != MoeMode::Task) throw std::logic_error("task_expert: model is in Data mode");
    return task_experts_.at(i);
}

std::vector<double> DriftMoeModel::router_input(std::span<const double> x) const {
    std::vector<double> z(x.size());
    standardizer_.transform(x, z);
    return z;
}

std::size_t DriftMoeModel::expert_label(std::size_t i, std::span<const double> x) const {
    if (config_.mode == MoeMode::Data) return data_experts_[i].predict(x);
    return task_experts_[i].positive_probability(x) >= config_.task_threshold ? i : schema_.num_classes;
}

Prediction DriftMoeModel::predict(std::span<const double> x) const {
    if (x.size() != schema_.num_features) throw std::invalid_argument("predict: feature count mismatch");
    Prediction p;
    p.weights = gate(router_.logits(router_input(x)));
    p.expert = argmax(p.weights);
    p.label = config_.mode == MoeMode::Data ? data_experts_[p.expert].predict(x) : p.expert;
    return p;
}

void DriftMoeModel::build_mask(std::span<const std::size_t> expert_preds, std::size_t y,
                               std::span<const double> weights, TrainOutcome& outcome) const {
    auto& mask = outcome.mask;
    mask.assign(num_experts_, 0);
    for (std::size_t i = 0; i < num_experts_; ++i) {
        if (config_.mode == MoeMode::Task && config_.task_mask == TaskMaskRule::Symmetric) {
            const bool claims = expert_preds[i] == i;
            mask[i] = claims == (y == i) ? 1 : 0;
        } else {
            mask[i] = expert_preds[i] == y ? 1 : 0;
        }
    }
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) {
        outcome.mask_fallback = true;
        mask[config_.mode == MoeMode::Task ? y : argmax(weights)] = 1;
    }
}

TrainOutcome DriftMoeModel::train_step(std::span<const double> x, std::size_t y) {
    if (x.size() != schema_.num_features) throw std::invalid_argument("train_step: feature count mismatch");
    if (y >= schema_.num_classes) throw std::invalid_argument("train_step: label out of range");

    TrainOutcome out;
    const std::vector<double> z = router_input(x);
    ForwardCache cache;
    const auto logits = router_.logits(z, &cache);
    out.prediction.weights = gate(logits);
    const auto& w = out.prediction.weights;
    out.prediction.expert = argmax(w);

    out.expert_predictions.resize(num_experts_);
    for (std::size_t i = 0; i < num_experts_; ++i) out.expert_predictions[i] = expert_label(i, x);
    out.prediction.label =
        config_.mode == MoeMode::Data ? out.expert_predictions[out.prediction.expert] : out.prediction.expert;

    build_mask(out.expert_predictions, y, w, out);

    if (config_.mode == MoeMode::Data) {
        for (std::size_t i : top_k_indices(w, config_.top_k)) {
            data_experts_[i].train(x, y);
            ++out.tree_updates;
        }
    } else {
        for (auto& expert : task_experts_) {
            expert.train(x, y);
            ++out.tree_updates;
        }
    }

    standardizer_.update(x);
    out.router_updated = router_.observe(z, out.mask, config_.stale_logits ? &cache : nullptr);
    ++t_;
    return out;
}

void DriftMoeModel::save(std::ostream& out) const {
    binio::write_u64(out, kCheckpointMagic);
    binio::write_u64(out, kCheckpointVersion);
    write_config(out, config_);
    write_schema(out, schema_);
    binio::write_u64(out, t_);
    standardizer_.save(out);
    router_.save(out);
    binio::write_u64(out, num_experts_);
    for (const auto& e : data_experts_) e.save(out);
    for (const auto& e : task_experts_) e.save(out);
}

DriftMoeModel DriftMoeModel::load(std::istream& in) {
    binio::expect_magic(in, kCheckpointMagic, "DriftMoE checkpoint");
    if (binio::read_u64(in) != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version");
    DriftMoeModel m;
    m.config_ = read_config(in);
    m.schema_ = read_schema(in);
    m.config_.validate(m.schema_);
    m.num_experts_ = m.config_.resolved_experts(m.schema_.num_classes);
    m.t_ = binio::read_u64(in);
    m.standardizer_ = RunningStandardizer::load(in);
    m.router_ = Router::load(in);
    if (m.standardizer_.num_features() != m.schema_.num_features ||
        m.router_.num_experts() != m.num_experts_ || m.router_.config().input_dim != m.schema_.num_features) {
        throw std::runtime_error("checkpoint: component shapes disagree");
    }
    if (binio::read_u64(in) != m.num_experts_) throw std::runtime_error("checkpoint: expert count mismatch");
    for (std::size_t i = 0; i < m.num_experts_; ++i) {
        if (m.config_.mode == MoeMode::Data) {
            m.data_experts_.push_back(HoeffdingTree::load(in));
        } else {
            m.task_experts_.push_back(BinaryTaskTree::load(in));
        }
    }
    return m;
}

std::uint64_t run_prequential(DriftMoeModel& model, StreamSource& source, const RecordSink& sink,
                              std::optional<std::uint64_t> limit) {
    if (!(source.schema() == model.schema())) {
        throw ConfigError("run_prequential: stream schema does not match the model");
    }
    std::uint64_t n = 0;
    while (!limit || n < *limit) {
        auto inst = source.next();
        if (!inst) break;
        const auto outcome = model.train_step(inst->features, inst->label);
        if (sink) sink({n, outcome.prediction.label, inst->label, outcome.prediction.expert});
        ++n;
    }
    model.finalize();
    return n;
}

}  // namespace driftmoe
