/**
 * Synthetic drifting streams: LED, SEA and random RBF generators plus a
 * composer that splices concepts together with sigmoid-mixed transitions.
 *
 * Each concept generator owns its random generator. A DriftStream draws one
 * uniform per nesting level from a separate mixing generator to decide which
 * concept emits the instance at position t; a concept that is not selected
 * does not advance.
 */

#ifndef DRIFTMOE_GENERATORS_HPP
#define DRIFTMOE_GENERATORS_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "driftmoe/rng.hpp"
#include "driftmoe/stream.hpp"

namespace driftmoe {

// ---------------------------------------------------------------- LED

inline constexpr std::size_t kLedInformative = 7;
inline constexpr std::size_t kLedIrrelevant = 17;
inline constexpr std::size_t kLedAttributes = kLedInformative + kLedIrrelevant;

/// Seven-segment pattern, segment order: top, upper-left, upper-right,
/// middle, lower-left, lower-right, bottom. Throws std::out_of_range for
/// digit >= 10.
std::array<std::uint8_t, kLedInformative> led_digit_segments(unsigned digit);

struct LedConcept {
    /// The first k informative positions swap places with the first k
    /// irrelevant positions.
    unsigned num_drift_attributes = 0;
    double noise_fraction = 0.1;

    void validate() const;
};

/// Position in the output vector of logical attribute `attribute` (0..6
/// informative, 7..23 irrelevant) under the concept's swap layout.
std::size_t led_output_position(const LedConcept& cfg, std::size_t attribute);

// ---------------------------------------------------------------- SEA

struct SeaConcept {
    double threshold = 8.0;
    double noise_fraction = 0.1;
    bool balance_classes = true;
};

/// Noise-free SEA label: 0 when a1 + a2 <= threshold, else 1.
std::size_t sea_label(double threshold, double a1, double a2) noexcept;

// ---------------------------------------------------------------- RBF

struct RbfConcept {
    std::size_t num_centroids = 50;
    std::size_t num_classes = 5;
    std::size_t num_features = 10;
    double drift_speed = 0.0;
};

struct RbfCentroid {
    std::vector<double> center;
    double std_dev = 0.0;
    double weight = 0.0;
    std::size_t label = 0;
    std::vector<double> direction;  // unit length
};

// ------------------------------------------------------- generator interface

/// An unbounded single-concept instance source.
class ConceptGenerator {
public:
    virtual ~ConceptGenerator() = default;
    virtual const StreamSchema& schema() const = 0;
    virtual Instance generate() = 0;
};

class LedGenerator final : public ConceptGenerator {
public:
    LedGenerator(LedConcept cfg, Rng rng);

    const StreamSchema& schema() const override { return schema_; }
    Instance generate() override;
    /// Same draw sequence as generate() but with the digit fixed.
    Instance generate_digit(unsigned digit);

    const LedConcept& params() const { return concept_; }

private:
    Instance emit(unsigned digit);

    LedConcept concept_;
    Rng rng_;
    StreamSchema schema_;
    std::array<std::size_t, kLedAttributes> layout_{};
};

class SeaGenerator final : public ConceptGenerator {
public:
    SeaGenerator(SeaConcept cfg, Rng rng);

    const StreamSchema& schema() const override { return schema_; }
    Instance generate() override;

    /// Number of emitted labels that were flipped by the noise process.
    std::uint64_t flipped() const { return flipped_; }

private:
    SeaConcept concept_;
    Rng rng_;
    StreamSchema schema_;
    bool next_class_zero_ = true;
    std::uint64_t flipped_ = 0;
};

class RbfGenerator final : public ConceptGenerator {
public:
    /// Centroids are drawn from `model_rng`, instances from `instance_rng`.
    RbfGenerator(RbfConcept cfg, Rng model_rng, Rng instance_rng);

    const StreamSchema& schema() const override { return schema_; }
    Instance generate() override;

    const std::vector<RbfCentroid>& centroids() const { return centroids_; }
    /// Index of the centroid that produced the last instance.
    std::size_t last_centroid() const { return last_centroid_; }

private:
    std::size_t choose_centroid();
    void advance_centroids();

    RbfConcept concept_;
    Rng rng_;
    StreamSchema schema_;
    std::vector<RbfCentroid> centroids_;
    double total_weight_ = 0.0;
    std::size_t last_centroid_ = 0;
};

// ------------------------------------------------------------ drift composer

/// Probability that position t is drawn from the incoming concept of a
/// transition centred at `position` with width `width`.
double drift_probability(double t, double position, double width) noexcept;

struct DriftStage {
    std::uint64_t position = 0;
    std::uint64_t width = 1;
    std::unique_ptr<ConceptGenerator> generator;
};

class DriftStream final : public StreamSource {
public:
    /// `length` = 0 means unbounded.
    DriftStream(std::unique_ptr<ConceptGenerator> base, std::vector<DriftStage> stages, Rng mixing_rng,
                std::uint64_t length);

    const StreamSchema& schema() const override { return schema_; }
    std::optional<Instance> next() override;

    /// Concept index (0 = base, s+1 = stage s) that produced the last instance.
    std::size_t last_concept() const { return last_concept_; }
    std::uint64_t position() const { return t_; }

private:
    std::unique_ptr<ConceptGenerator> base_;
    std::vector<DriftStage> stages_;
    Rng mixing_;
    std::uint64_t length_;
    std::uint64_t t_ = 0;
    std::size_t last_concept_ = 0;
    StreamSchema schema_;
};

// --------------------------------------------------------- benchmark streams

inline constexpr std::uint64_t kBenchmarkLength = 1'000'000;

/// The six synthetic benchmark stream identifiers.
const std::vector<std::string>& benchmark_stream_names();

struct BenchmarkOptions {
    std::uint64_t length = kBenchmarkLength;
};

/// Builds one of led_a, led_g, sea_a, sea_g, rbf_m, rbf_f. Throws
/// ConfigError for unknown names.
std::unique_ptr<DriftStream> make_benchmark_stream(std::string_view name, std::uint64_t seed,
                                                   BenchmarkOptions options = {});

/// Positions of the scheduled concept changes of a benchmark stream (empty
/// for the RBF streams).
std::vector<std::uint64_t> benchmark_drift_positions(std::string_view name);

/// Writes up to n instances (all if n = 0) as CSV with header f0..f{d-1},label.
/// Returns the number of rows written.
std::uint64_t write_stream_csv(StreamSource& source, std::ostream& out, std::uint64_t n = 0);

}  // namespace driftmoe

#endif  // DRIFTMOE_GENERATORS_HPP
