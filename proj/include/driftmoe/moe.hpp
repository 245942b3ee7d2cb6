/**
 * DriftMoE: a neural router over a pool of incremental Hoeffding-tree experts.
 *
 * Data mode keeps K multiclass trees; each instance trains the top-k experts
 * under the router's gate. Task mode keeps one one-vs-rest tree per class and
 * trains all of them on every instance. In both modes the router is trained
 * on a multi-hot mask marking the experts whose pre-update prediction was
 * correct, and the prediction is taken from the single highest-weighted
 * expert.
 *
 * The router sees features standardised with running statistics of the
 * instances seen so far; the trees see the raw features.
 */

#ifndef DRIFTMOE_MOE_HPP
#define DRIFTMOE_MOE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftmoe/hoeffding.hpp"
#include "driftmoe/ingest.hpp"
#include "driftmoe/router.hpp"
#include "driftmoe/stream.hpp"

namespace driftmoe {

enum class MoeMode { Data, Task };

/// Which Task-mode experts count as correct for the router target.
enum class TaskMaskRule {
    /// Expert i is correct iff it claims its class (p >= 0.5) and y == i.
    PositiveMatch,
    /// Expert i is correct iff its thresholded output equals 1[y == i].
    Symmetric,
};

std::string to_string(MoeMode mode);
MoeMode parse_mode(const std::string& text);
std::string to_string(TaskMaskRule rule);
TaskMaskRule parse_task_mask_rule(const std::string& text);

struct MoeConfig {
    MoeMode mode = MoeMode::Data;
    /// Data-mode pool size. Task mode always uses one expert per class.
    std::size_t num_experts = 12;
    /// Experts trained per instance in Data mode.
    std::size_t top_k = 3;
    std::size_t hidden1 = 128;
    std::size_t hidden2 = 128;
    double learning_rate = 1e-3;
    std::size_t batch_size = 4;
    bool stale_logits = false;
    TaskMaskRule task_mask = TaskMaskRule::PositiveMatch;
    double task_threshold = 0.5;
    HoeffdingTreeConfig tree;
    std::uint64_t seed = 1;

    /// Number of experts for a stream with `num_classes` classes.
    std::size_t resolved_experts(std::size_t num_classes) const;
    /// Throws ConfigError on inconsistent settings for this schema.
    void validate(const StreamSchema& schema) const;
};

struct Prediction {
    std::size_t label = 0;
    std::size_t expert = 0;
    std::vector<double> weights;
};

struct TrainOutcome {
    Prediction prediction;
    std::vector<std::uint8_t> mask;
    /// Class predicted by each expert before the update (Task mode: the
    /// expert's own class if it claims it, otherwise the sentinel num_classes).
    std::vector<std::size_t> expert_predictions;
    std::size_t tree_updates = 0;
    bool router_updated = false;
    bool mask_fallback = false;
};

class DriftMoeModel {
public:
    DriftMoeModel(StreamSchema schema, MoeConfig config);

    DriftMoeModel(DriftMoeModel&&) noexcept = default;
    DriftMoeModel& operator=(DriftMoeModel&&) noexcept = default;

    const StreamSchema& schema() const { return schema_; }
    const MoeConfig& config() const { return config_; }
    std::size_t num_experts() const { return num_experts_; }
    std::uint64_t instances_seen() const { return t_; }
    const Router& router() const { return router_; }
    Router& router() { return router_; }
    const RunningStandardizer& standardizer() const { return standardizer_; }

    /// Data-mode expert i (throws std::logic_error in Task mode).
    const HoeffdingTree& data_expert(std::size_t i) const;
    /// Task-mode expert for class i (throws std::logic_error in Data mode).
    const BinaryTaskTree& task_expert(std::size_t i) const;

    /// Router input for x under the current standardiser.
    std::vector<double> router_input(std::span<const double> x) const;

    /// Prediction from the highest-weighted expert. Does not change the model.
    Prediction predict(std::span<const double> x) const;

    /// Test-then-train step: predicts, builds the mask from the pre-update
    /// expert predictions, trains the experts and feeds the router buffer.
    TrainOutcome train_step(std::span<const double> x, std::size_t y);

    /// Flushes the router's partial batch. Returns true if a step was taken.
    bool finalize() { return router_.finalize(); }

    /// Single versioned checkpoint: config, schema, standardiser, router and trees.
    void save(std::ostream& out) const;
    static DriftMoeModel load(std::istream& in);

private:
    DriftMoeModel() = default;

    std::size_t expert_label(std::size_t i, std::span<const double> x) const;
    void build_mask(std::span<const std::size_t> expert_preds, std::size_t y, std::span<const double> weights,
                    TrainOutcome& outcome) const;

    StreamSchema schema_;
    MoeConfig config_;
    std::size_t num_experts_ = 0;
    Router router_;
    RunningStandardizer standardizer_;
    std::vector<HoeffdingTree> data_experts_;
    std::vector<BinaryTaskTree> task_experts_;
    std::uint64_t t_ = 0;
};

/// Top-k indices of w by weight, ties broken by lower index, in rank order.
std::vector<std::size_t> top_k_indices(std::span<const double> w, std::size_t k);

/// argmax with the lowest index winning ties.
std::size_t argmax(std::span<const double> v);

struct PrequentialRecord {
    std::uint64_t index = 0;
    std::size_t predicted = 0;
    std::size_t label = 0;
    std::size_t expert = 0;
};

using RecordSink = std::function<void(const PrequentialRecord&)>;

/// Runs the whole source through the model (test-then-train), emitting one
/// record per instance, and flushes the router's residual batch at the end.
/// Throws ConfigError when the source schema differs from the model's.
std::uint64_t run_prequential(DriftMoeModel& model, StreamSource& source, const RecordSink& sink,
                              std::optional<std::uint64_t> limit = std::nullopt);

}  // namespace driftmoe

#endif  // DRIFTMOE_MOE_HPP
