// Instance/schema model and the pull-based labelled stream abstraction.

#ifndef DRIFTMOE_STREAM_HPP
#define DRIFTMOE_STREAM_HPP

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftmoe {

/// Raised for invalid configurations, unknown names and schema mismatches.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FeatureKind { Numeric, Binary };

struct StreamSchema {
    std::size_t num_features = 0;
    std::vector<FeatureKind> feature_kinds;
    std::size_t num_classes = 2;
    std::vector<std::string> class_names;  // optional, empty or num_classes long

    /// Throws ConfigError when the invariants do not hold.
    void validate() const;

    static StreamSchema uniform(std::size_t num_features, FeatureKind kind, std::size_t num_classes);

    bool operator==(const StreamSchema&) const = default;
};

/// One labelled example. Binary features are carried as 0.0 / 1.0.
struct Instance {
    std::vector<double> features;
    std::size_t label = 0;

    bool operator==(const Instance&) const = default;
};

/// Returns true when the instance satisfies the schema invariants.
bool conforms(const Instance& instance, const StreamSchema& schema);

/// A single-consumer source of labelled instances. Implementations must be
/// deterministic given their construction parameters and seed.
class StreamSource {
public:
    virtual ~StreamSource() = default;
    virtual const StreamSchema& schema() const = 0;
    /// Next instance, or std::nullopt once the stream is exhausted.
    virtual std::optional<Instance> next() = 0;
};

/// First n instances of the source (fewer if it is exhausted first).
std::vector<Instance> take(StreamSource& source, std::size_t n);

/// Replays an in-memory dataset. The data may be shared read-only between
/// several streams.
class VectorStream final : public StreamSource {
public:
    VectorStream(StreamSchema schema, std::shared_ptr<const std::vector<Instance>> data);
    VectorStream(StreamSchema schema, std::vector<Instance> data);

    const StreamSchema& schema() const override { return schema_; }
    std::optional<Instance> next() override;

    std::size_t size() const { return data_->size(); }
    const std::shared_ptr<const std::vector<Instance>>& data() const { return data_; }

private:
    StreamSchema schema_;
    std::shared_ptr<const std::vector<Instance>> data_;
    std::size_t cursor_ = 0;
};

}  // namespace driftmoe

#endif  // DRIFTMOE_STREAM_HPP
