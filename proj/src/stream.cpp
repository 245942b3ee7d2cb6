#include "driftmoe/stream.hpp"

#include <cmath>

namespace driftmoe {

void StreamSchema::validate() const {
    if (feature_kinds.size() != num_features) {
        throw ConfigError("schema: feature_kinds has " + std::to_string(feature_kinds.size()) +
                          " entries for " + std::to_string(num_features) + " features");
    }
    if (num_classes < 2) {
        throw ConfigError("schema: num_classes must be >= 2, got " + std::to_string(num_classes));
    }
    if (!class_names.empty() && class_names.size() != num_classes) {
        throw ConfigError("schema: class_names length does not match num_classes");
    }
}

StreamSchema StreamSchema::uniform(std::size_t num_features, FeatureKind kind, std::size_t num_classes) {
    StreamSchema s;
    s.num_features = num_features;
    s.feature_kinds.assign(num_features, kind);
    s.num_classes = num_classes;
    return s;
}

bool conforms(const Instance& instance, const StreamSchema& schema) {
    if (instance.features.size() != schema.num_features || instance.label >= schema.num_classes) {
        return false;
    }
    for (std::size_t j = 0; j < schema.num_features; ++j) {
        const double v = instance.features[j];
        if (!std::isfinite(v)) return false;
        if (schema.feature_kinds[j] == FeatureKind::Binary && v != 0.0 && v != 1.0) return false;
    }
    return true;
}

std::vector<Instance> take(StreamSource& source, std::size_t n) {
    std::vector<Instance> out;
    out.reserve(n);
    while (out.size() < n) {
        auto inst = source.next();
        if (!inst) break;
        out.push_back(std::move(*inst));
    }
    return out;
}

VectorStream::VectorStream(StreamSchema schema, std::shared_ptr<const std::vector<Instance>> data)
    : schema_(std::move(schema)), data_(std::move(data)) {
    schema_.validate();
}

VectorStream::VectorStream(StreamSchema schema, std::vector<Instance> data)
    : VectorStream(std::move(schema), std::make_shared<const std::vector<Instance>>(std::move(data))) {}

std::optional<Instance> VectorStream::next() {
    if (cursor_ >= data_->size()) return std::nullopt;
    return (*data_)[cursor_++];
}

}  // namespace driftmoe
