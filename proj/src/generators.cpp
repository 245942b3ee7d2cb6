#include "driftmoe/generators.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace driftmoe {

// ---------------------------------------------------------------- LED

namespace {

constexpr std::array<std::array<std::uint8_t, kLedInformative>, 10> kSegments = {{
    {1, 1, 1, 0, 1, 1, 1},  // 0
    {0, 0, 1, 0, 0, 1, 0},  // 1
    {1, 0, 1, 1, 1, 0, 1},  // 2
    {1, 0, 1, 1, 0, 1, 1},  // 3
    {0, 1, 1, 1, 0, 1, 0},  // 4
    {1, 1, 0, 1, 0, 1, 1},  // 5
    {1, 1, 0, 1, 1, 1, 1},  // 6
    {1, 0, 1, 0, 0, 1, 0},  // 7
    {1, 1, 1, 1, 1, 1, 1},  // 8
    {1, 1, 1, 1, 0, 1, 1},  // 9
}};

}  // namespace

std::array<std::uint8_t, kLedInformative> led_digit_segments(unsigned digit) {
    if (digit >= 10) throw std::out_of_range("led_digit_segments: digit must be < 10");
    return kSegments[digit];
}

void LedConcept::validate() const {
    if (num_drift_attributes > kLedInformative) {
        throw ConfigError("LED concept: at most 7 drifting attributes");
    }
    if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) {
        throw ConfigError("LED concept: noise_fraction must lie in [0, 1]");
    }
}

std::size_t led_output_position(const LedConcept& cfg, std::size_t attribute) {
    const std::size_t k = cfg.num_drift_attributes;
    if (attribute < k) return kLedInformative + attribute;
    if (attribute >= kLedInformative && attribute < kLedInformative + k) return attribute - kLedInformative;
    return attribute;
}

LedGenerator::LedGenerator(LedConcept cfg, Rng rng)
    : concept_(cfg), rng_(rng), schema_(StreamSchema::uniform(kLedAttributes, FeatureKind::Binary, 10)) {
    concept_.validate();
    for (std::size_t a = 0; a < kLedAttributes; ++a) layout_[a] = led_output_position(concept_, a);
}

Instance LedGenerator::generate() { return emit(static_cast<unsigned>(rng_.uniform_int(10))); }

Instance LedGenerator::generate_digit(unsigned digit) {
    if (digit >= 10) throw std::out_of_range("LedGenerator: digit must be < 10");
    rng_.uniform_int(10);
    return emit(digit);
}

Instance LedGenerator::emit(unsigned digit) {
    Instance inst;
    inst.features.assign(kLedAttributes, 0.0);
    inst.label = digit;
    const auto& seg = kSegments[digit];
    for (std::size_t a = 0; a < kLedInformative; ++a) {
        std::uint8_t bit = seg[a];
        if (rng_.bernoulli(concept_.noise_fraction)) bit ^= 1U;
        inst.features[layout_[a]] = bit;
    }
    for (std::size_t a = kLedInformative; a < kLedAttributes; ++a) {
        inst.features[layout_[a]] = static_cast<double>(rng_.uniform_int(2));
    }
    return inst;
}

// ---------------------------------------------------------------- SEA

std::size_t sea_label(double threshold, double a1, double a2) noexcept { return (a1 + a2 <= threshold) ? 0 : 1; }

SeaGenerator::SeaGenerator(SeaConcept cfg, Rng rng)
    : concept_(cfg), rng_(rng), schema_(StreamSchema::uniform(3, FeatureKind::Numeric, 2)) {
    if (!(concept_.noise_fraction >= 0.0 && concept_.noise_fraction <= 1.0)) {
        throw ConfigError("SEA concept: noise_fraction must lie in [0, 1]");
    }
}

Instance SeaGenerator::generate() {
    Instance inst;
    inst.features.resize(3);
    for (;;) {
        for (auto& v : inst.features) v = 10.0 * rng_.uniform();
        inst.label = sea_label(concept_.threshold, inst.features[0], inst.features[1]);
        if (!concept_.balance_classes) break;
        if ((inst.label == 0) == next_class_zero_) {
            next_class_zero_ = !next_class_zero_;
            break;
        }
    }
    if (rng_.bernoulli(concept_.noise_fraction)) {
        inst.label ^= 1U;
        ++flipped_;
    }
    return inst;
}

// ---------------------------------------------------------------- RBF

RbfGenerator::RbfGenerator(RbfConcept cfg, Rng model_rng, Rng instance_rng)
    : concept_(cfg),
      rng_(instance_rng),
      schema_(StreamSchema::uniform(cfg.num_features, FeatureKind::Numeric, cfg.num_classes)) {
    if (concept_.num_centroids == 0 || concept_.num_features == 0) {
        throw ConfigError("RBF concept: need at least one centroid and one feature");
    }
    schema_.validate();
    centroids_.resize(concept_.num_centroids);
    for (auto& c : centroids_) {
        c.center.resize(concept_.num_features);
        for (auto& x : c.center) x = model_rng.uniform();
        c.label = model_rng.uniform_int(concept_.num_classes);
        c.std_dev = 1.0 - model_rng.uniform();
        c.weight = 1.0 - model_rng.uniform();
        c.direction.resize(concept_.num_features);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& d : c.direction) {
                d = model_rng.gaussian();
                norm += d * d;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (auto& d : c.direction) d /= norm;
        total_weight_ += c.weight;
    }
}

std::size_t RbfGenerator::choose_centroid() {
    const double target = rng_.uniform() * total_weight_;
    double acc = 0.0;
    for (std::size_t i = 0; i < centroids_.size(); ++i) {
        acc += centroids_[i].weight;
        if (target < acc) return i;
    }
    return centroids_.size() - 1;
}

Instance RbfGenerator::generate() {
    last_centroid_ = choose_centroid();
    const RbfCentroid& c = centroids_[last_centroid_];
    Instance inst;
    inst.label = c.label;
    inst.features.resize(concept_.num_features);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& v : inst.features) {
            v = rng_.gaussian();
            norm += v * v;
        }
    } while (norm == 0.0);
    const double magnitude = std::abs(rng_.gaussian()) * c.std_dev;
    const double scale = magnitude / std::sqrt(norm);
    for (std::size_t j = 0; j < inst.features.size(); ++j) {
        inst.features[j] = c.center[j] + inst.features[j] * scale;
    }
    advance_centroids();
    return inst;
}

void RbfGenerator::advance_centroids() {
    const double speed = concept_.drift_speed;
    if (speed == 0.0) return;
    // Centres stay inside the unit box: a coordinate that leaves it is
    // clamped and that direction component is reflected.
    for (auto& c : centroids_) {
        for (std::size_t j = 0; j < c.center.size(); ++j) {
            c.center[j] += c.direction[j] * speed;
            if (c.center[j] > 1.0) {
                c.center[j] = 1.0;
                c.direction[j] = -c.direction[j];
            } else if (c.center[j] < 0.0) {
                c.center[j] = 0.0;
                c.direction[j] = -c.direction[j];
            }
        }
    }
}

// ------------------------------------------------------------ drift composer

double drift_probability(double t, double position, double width) noexcept {
    return 1.0 / (1.0 + std::exp(-4.0 * (t - position) / width));
}

DriftStream::DriftStream(std::unique_ptr<ConceptGenerator> base, std::vector<DriftStage> stages, Rng mixing_rng,
                         std::uint64_t length)
    : base_(std::move(base)), stages_(std::move(stages)), mixing_(mixing_rng), length_(length) {
    if (!base_) throw ConfigError("drift stream: missing base concept");
    schema_ = base_->schema();
    std::uint64_t previous = 0;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const auto& stage = stages_[s];
        if (!stage.generator) throw ConfigError("drift stream: missing concept for stage " + std::to_string(s));
        if (stage.width < 1) throw ConfigError("drift stream: width must be >= 1");
        if (s > 0 && stage.position <= previous) throw ConfigError("drift stream: positions must increase");
        if (!(stage.generator->schema() == schema_)) throw ConfigError("drift stream: stage schema mismatch");
        previous = stage.position;
    }
}

std::optional<Instance> DriftStream::next() {
    if (length_ != 0 && t_ >= length_) return std::nullopt;
    const double t = static_cast<double>(t_);
    std::size_t chosen = 0;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const double p = drift_probability(t, static_cast<double>(stages_[s].position),
                                           static_cast<double>(stages_[s].width));
        if (mixing_.uniform() < p) {
            chosen = s + 1;
        } else {
            break;
        }
    }
    ++t_;
    last_concept_ = chosen;
    return chosen == 0 ? base_->generate() : stages_[chosen - 1].generator->generate();
}

// --------------------------------------------------------- benchmark streams

namespace {

constexpr std::array<std::uint64_t, 3> kDriftPositions = {250'000, 500'000, 750'000};
constexpr std::uint64_t kAbruptWidth = 50;
constexpr std::uint64_t kGradualWidth = 50'000;

// Sub-stream identifiers for Rng::derive.
constexpr std::uint64_t kMixingStream = 0;
constexpr std::uint64_t kConceptStreamBase = 1;
constexpr std::uint64_t kRbfModelStream = 100;

}  // namespace

const std::vector<std::string>& benchmark_stream_names() {
    static const std::vector<std::string> names = {"led_a", "led_g", "sea_a", "sea_g", "rbf_m", "rbf_f"};
    return names;
}

std::vector<std::uint64_t> benchmark_drift_positions(std::string_view name) {
    if (name.starts_with("rbf_")) {
        if (name != "rbf_m" && name != "rbf_f") throw ConfigError("unknown stream '" + std::string(name) + "'");
        return {};
    }
    if (name != "led_a" && name != "led_g" && name != "sea_a" && name != "sea_g") {
        throw ConfigError("unknown stream '" + std::string(name) + "'");
    }
    return {kDriftPositions.begin(), kDriftPositions.end()};
}

std::unique_ptr<DriftStream> make_benchmark_stream(std::string_view name, std::uint64_t seed,
                                                   BenchmarkOptions options) {
    const auto concept_rng = [seed](std::size_t i) { return Rng::derive(seed, kConceptStreamBase + i); };
    const Rng mixing = Rng::derive(seed, kMixingStream);

    if (name == "led_a" || name == "led_g") {
        const std::uint64_t width = name == "led_a" ? kAbruptWidth : kGradualWidth;
        constexpr std::array<unsigned, 4> drifting = {0, 3, 5, 7};
        auto base = std::make_unique<LedGenerator>(LedConcept{drifting[0], 0.1}, concept_rng(0));
        std::vector<DriftStage> stages;
        for (std::size_t s = 0; s < kDriftPositions.size(); ++s) {
            stages.push_back({kDriftPositions[s], width,
                              std::make_unique<LedGenerator>(LedConcept{drifting[s + 1], 0.1}, concept_rng(s + 1))});
        }
        return std::make_unique<DriftStream>(std::move(base), std::move(stages), mixing, options.length);
    }
    if (name == "sea_a" || name == "sea_g") {
        const std::uint64_t width = name == "sea_a" ? kAbruptWidth : kGradualWidth;
        constexpr std::array<double, 4> thresholds = {8.0, 9.0, 7.0, 9.5};
        auto base = std::make_unique<SeaGenerator>(SeaConcept{thresholds[0], 0.1, true}, concept_rng(0));
        std::vector<DriftStage> stages;
        for (std::size_t s = 0; s < kDriftPositions.size(); ++s) {
            stages.push_back({kDriftPositions[s], width,
                              std::make_unique<SeaGenerator>(SeaConcept{thresholds[s + 1], 0.1, true},
                                                             concept_rng(s + 1))});
        }
        return std::make_unique<DriftStream>(std::move(base), std::move(stages), mixing, options.length);
    }
    if (name == "rbf_m" || name == "rbf_f") {
        RbfConcept cfg;
        cfg.drift_speed = name == "rbf_m" ? 0.0001 : 0.001;
        auto base = std::make_unique<RbfGenerator>(cfg, Rng::derive(seed, kRbfModelStream), concept_rng(0));
        return std::make_unique<DriftStream>(std::move(base), std::vector<DriftStage>{}, mixing, options.length);
    }
    throw ConfigError("unknown stream '" + std::string(name) + "'");
}

std::uint64_t write_stream_csv(StreamSource& source, std::ostream& out, std::uint64_t n) {
    const auto& schema = source.schema();
    for (std::size_t j = 0; j < schema.num_features; ++j) out << 'f' << j << ',';
    out << "label\n";
    out.precision(17);
    std::uint64_t rows = 0;
    while (n == 0 || rows < n) {
        auto inst = source.next();
        if (!inst) break;
        for (double v : inst->features) out << v << ',';
        out << inst->label << '\n';
        ++rows;
    }
    return rows;
}

}  // namespace driftmoe
