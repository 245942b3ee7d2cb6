// Dataset ingestion (ARFF / CSV) and online feature standardisation.

#ifndef DRIFTMOE_INGEST_HPP
#define DRIFTMOE_INGEST_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftmoe/stream.hpp"

namespace driftmoe {

/// Malformed input; carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t line);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A nominal value not declared in the header.
class EncodingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DatasetFormat { Arff, Csv };
enum class NominalEncoding { Index, OneHot };

struct DatasetManifest {
    std::string path;
    DatasetFormat format = DatasetFormat::Csv;
    /// Column name or 0-based index; empty selects the last column.
    std::string label_column;
    NominalEncoding nominal_encoding = NominalEncoding::Index;

    /// Format guessed from the file extension (.arff, otherwise CSV).
    static DatasetManifest for_path(std::string path, std::string label_column = {});
};

struct Dataset {
    StreamSchema schema;
    std::vector<std::string> feature_names;
    std::shared_ptr<const std::vector<Instance>> instances;

    /// A fresh stream over the shared instances, in file order.
    std::unique_ptr<VectorStream> stream() const;
};

Dataset load_dataset(const DatasetManifest& manifest);
Dataset parse_arff(std::istream& in, const DatasetManifest& manifest);
Dataset parse_csv(std::istream& in, const DatasetManifest& manifest);

/// Streaming per-feature mean and variance (Welford recurrence).
class RunningStandardizer {
public:
    static constexpr double kStdFloor = 1e-6;

    explicit RunningStandardizer(std::size_t num_features = 0);

    std::size_t num_features() const { return mean_.size(); }
    std::uint64_t count() const { return count_; }

    void update(std::span<const double> x);

    /// Standardises x with the statistics accumulated so far (x itself is not
    /// included). With no history the input passes through unchanged.
    void transform(std::span<const double> x, std::span<double> out) const;

    /// transform() followed by update().
    std::vector<double> standardize(std::span<const double> x);

    double mean(std::size_t j) const { return mean_[j]; }
    /// Population variance (divides by n).
    double variance(std::size_t j) const;

    void save(std::ostream& out) const;
    static RunningStandardizer load(std::istream& in);

private:
    std::uint64_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
    std::vector<double> inv_std_;
};

}  // namespace driftmoe

#endif  // DRIFTMOE_INGEST_HPP
