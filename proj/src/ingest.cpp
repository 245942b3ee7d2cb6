#include "driftmoe/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "driftmoe/binary_io.hpp"

namespace driftmoe {

ParseError::ParseError(const std::string& message, std::size_t line)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Splits one delimited record. Handles '…' and "…" quoting; a doubled quote
/// inside a quoted field is a literal quote (RFC 4180).
std::vector<std::string> split_record(std::string_view line, std::size_t line_no, bool allow_single_quotes) {
    std::vector<std::string> fields;
    std::string cur;
    std::size_t i = 0;
    bool any = false;
    while (i <= line.size()) {
        // skip leading blanks
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        cur.clear();
        if (i < line.size() && (line[i] == '"' || (allow_single_quotes && line[i] == '\''))) {
            const char q = line[i++];
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == q) {
                    if (i + 1 < line.size() && line[i + 1] == q) {
                        cur.push_back(q);
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                cur.push_back(line[i++]);
            }
            if (!closed) throw ParseError("unterminated quoted field", line_no);
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
            if (i < line.size() && line[i] != ',') throw ParseError("unexpected character after quoted field", line_no);
            fields.push_back(cur);
        } else {
            const auto end = line.find(',', i);
            const auto stop = end == std::string_view::npos ? line.size() : end;
            fields.push_back(trim(line.substr(i, stop - i)));
            i = stop;
        }
        any = true;
        if (i >= line.size()) break;
        ++i;  // comma
        if (i == line.size()) fields.emplace_back();  // trailing empty field
    }
    if (!any) fields.emplace_back();
    return fields;
}

struct Column {
    std::string name;
    bool nominal = false;
    std::vector<std::string> values;  // nominal values in code order
    std::map<std::string, std::size_t> index;

    void set_values(std::vector<std::string> v) {
        values = std::move(v);
        index.clear();
        for (std::size_t i = 0; i < values.size(); ++i) index.emplace(values[i], i);
    }
};

std::size_t resolve_label_column(const std::vector<Column>& columns, const std::string& label) {
    if (columns.size() < 2) throw ConfigError("dataset needs at least one feature column and a label column");
    if (label.empty()) return columns.size() - 1;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == label) return i;
    }
    if (auto idx = parse_number(label); idx && *idx >= 0 && std::floor(*idx) == *idx) {
        const auto i = static_cast<std::size_t>(*idx);
        if (i < columns.size()) return i;
    }
    throw ConfigError("label column '" + label + "' not found");
}

/// Converts parsed string rows into instances under a fixed column typing.
Dataset assemble(std::vector<Column> columns, const std::vector<std::pair<std::size_t, std::vector<std::string>>>& rows,
                 const DatasetManifest& manifest) {
    const std::size_t label_col = resolve_label_column(columns, manifest.label_column);
    Column& label = columns[label_col];

    // Label codes: declared order for nominal labels, numeric order otherwise.
    std::map<double, std::size_t> numeric_labels;
    if (!label.nominal) {
        for (const auto& [line_no, fields] : rows) {
            auto v = parse_number(fields[label_col]);
            if (!v) throw ParseError("non-numeric label '" + fields[label_col] + "'", line_no);
            numeric_labels.emplace(*v, 0);
        }
        std::size_t code = 0;
        for (auto& [v, c] : numeric_labels) c = code++;
    }

    Dataset ds;
    ds.schema.num_classes = label.nominal ? label.values.size() : numeric_labels.size();
    if (label.nominal) {
        ds.schema.class_names = label.values;
    } else {
        for (const auto& [v, c] : numeric_labels) {
            std::ostringstream os;
            os << v;
            ds.schema.class_names.push_back(os.str());
        }
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c == label_col) continue;
        const Column& col = columns[c];
        if (!col.nominal) {
            ds.schema.feature_kinds.push_back(FeatureKind::Numeric);
            ds.feature_names.push_back(col.name);
        } else if (manifest.nominal_encoding == NominalEncoding::OneHot) {
            for (const auto& v : col.values) {
                ds.schema.feature_kinds.push_back(FeatureKind::Binary);
                ds.feature_names.push_back(col.name + "=" + v);
            }
        } else {
            ds.schema.feature_kinds.push_back(col.values.size() <= 2 ? FeatureKind::Binary : FeatureKind::Numeric);
            ds.feature_names.push_back(col.name);
        }
    }
    ds.schema.num_features = ds.schema.feature_kinds.size();
    ds.schema.validate();

    auto data = std::make_shared<std::vector<Instance>>();
    data->reserve(rows.size());
    for (const auto& [line_no, fields] : rows) {
        Instance inst;
        inst.features.reserve(ds.schema.num_features);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const std::string& field = fields[c];
            const Column& col = columns[c];
            if (field == "?") throw ParseError("missing values are not supported (column '" + col.name + "')", line_no);
            std::size_t code = 0;
            if (col.nominal) {
                auto it = col.index.find(field);
                if (it == col.index.end()) {
                    throw EncodingError("line " + std::to_string(line_no) + ": value '" + field +
                                        "' not declared for attribute '" + col.name + "'");
                }
                code = it->second;
            }
            if (c == label_col) {
                inst.label = col.nominal ? code : numeric_labels.at(*parse_number(field));
                continue;
            }
            if (!col.nominal) {
                auto v = parse_number(field);
                if (!v) throw ParseError("non-numeric value '" + field + "' in column '" + col.name + "'", line_no);
                inst.features.push_back(*v);
            } else if (manifest.nominal_encoding == NominalEncoding::OneHot) {
                for (std::size_t k = 0; k < col.values.size(); ++k) inst.features.push_back(k == code ? 1.0 : 0.0);
            } else {
                inst.features.push_back(static_cast<double>(code));
            }
        }
        data->push_back(std::move(inst));
    }
    ds.instances = std::move(data);
    return ds;
}

}  // namespace

DatasetManifest DatasetManifest::for_path(std::string path, std::string label_column) {
    DatasetManifest m;
    const std::string ext = lower(path.size() >= 5 ? path.substr(path.size() - 5) : path);
    m.format = ext == ".arff" ? DatasetFormat::Arff : DatasetFormat::Csv;
    m.path = std::move(path);
    m.label_column = std::move(label_column);
    return m;
}

std::unique_ptr<VectorStream> Dataset::stream() const { return std::make_unique<VectorStream>(schema, instances); }

Dataset load_dataset(const DatasetManifest& manifest) {
    std::ifstream in(manifest.path);
    if (!in) throw ConfigError("cannot open dataset '" + manifest.path + "'");
    return manifest.format == DatasetFormat::Arff ? parse_arff(in, manifest) : parse_csv(in, manifest);
}

Dataset parse_arff(std::istream& in, const DatasetManifest& manifest) {
    std::vector<Column> columns;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    bool in_data = false;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '%') continue;
        if (!in_data) {
            if (line.front() != '@') throw ParseError("expected a header declaration", line_no);
            const std::string keyword = lower(line.substr(0, line.find_first_of(" \t")));
            if (keyword == "@relation") continue;
            if (keyword == "@data") {
                if (columns.empty()) throw ParseError("@data before any @attribute", line_no);
                in_data = true;
                continue;
            }
            if (keyword != "@attribute") throw ParseError("unknown declaration '" + keyword + "'", line_no);
            std::string rest = trim(std::string_view(line).substr(keyword.size()));
            Column col;
            if (!rest.empty() && (rest.front() == '\'' || rest.front() == '"')) {
                const char q = rest.front();
                const auto close = rest.find(q, 1);
                if (close == std::string::npos) throw ParseError("unterminated attribute name", line_no);
                col.name = rest.substr(1, close - 1);
                rest = trim(std::string_view(rest).substr(close + 1));
            } else {
                const auto sp = rest.find_first_of(" \t{");
                if (sp == std::string::npos) throw ParseError("attribute without a type", line_no);
                col.name = rest.substr(0, sp);
                rest = trim(std::string_view(rest).substr(sp));
            }
            if (!rest.empty() && rest.front() == '{') {
                const auto close = rest.rfind('}');
                if (close == std::string::npos) throw ParseError("unterminated nominal value list", line_no);
                auto values = split_record(std::string_view(rest).substr(1, close - 1), line_no, true);
                col.nominal = true;
                col.set_values(std::move(values));
                if (col.values.empty()) throw ParseError("empty nominal value list", line_no);
            } else {
                const std::string type = lower(rest);
                if (type != "numeric" && type != "real" && type != "integer") {
                    throw ParseError("unsupported attribute type '" + rest + "'", line_no);
                }
            }
            columns.push_back(std::move(col));
        } else {
            if (line.front() == '{') throw ParseError("sparse ARFF rows are not supported", line_no);
            auto fields = split_record(line, line_no, true);
            if (fields.size() != columns.size()) {
                throw ParseError("expected " + std::to_string(columns.size()) + " values, found " +
                                     std::to_string(fields.size()),
                                 line_no);
            }
            rows.emplace_back(line_no, std::move(fields));
        }
    }
    if (!in_data) throw ParseError("no @data section", line_no);
    return assemble(std::move(columns), rows, manifest);
}

Dataset parse_csv(std::istream& in, const DatasetManifest& manifest) {
    std::string raw;
    std::size_t line_no = 0;
    std::vector<Column> columns;
    while (std::getline(in, raw)) {
        ++line_no;
        if (trim(raw).empty()) continue;
        for (auto& name : split_record(raw, line_no, false)) {
            Column col;
            col.name = std::move(name);
            columns.push_back(std::move(col));
        }
        break;
    }
    if (columns.empty()) throw ParseError("missing header row", line_no);

    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (trim(raw).empty()) continue;
        auto fields = split_record(raw, line_no, false);
        if (fields.size() != columns.size()) {
            throw ParseError("expected " + std::to_string(columns.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        rows.emplace_back(line_no, std::move(fields));
    }

    // Header scan: a column is nominal if any value is non-numeric.
    resolve_label_column(columns, manifest.label_column);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        bool numeric = true;
        for (const auto& [ln, fields] : rows) {
            if (fields[c] != "?" && !parse_number(fields[c])) {
                numeric = false;
                break;
            }
        }
        if (numeric) continue;
        std::vector<std::string> values;
        for (const auto& [ln, fields] : rows) values.push_back(fields[c]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        columns[c].nominal = true;
        columns[c].set_values(std::move(values));
    }
    return assemble(std::move(columns), rows, manifest);
}

// ------------------------------------------------------ RunningStandardizer

RunningStandardizer::RunningStandardizer(std::size_t num_features)
    : mean_(num_features, 0.0), m2_(num_features, 0.0), inv_std_(num_features, 1.0 / kStdFloor) {}

void RunningStandardizer::update(std::span<const double> x) {
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t j = 0; j < mean_.size(); ++j) {
        const double delta = x[j] - mean_[j];
        mean_[j] += delta / n;
        m2_[j] += delta * (x[j] - mean_[j]);
        const double sd = std::sqrt(m2_[j] / n);
        inv_std_[j] = 1.0 / std::max(sd, kStdFloor);
    }
}

double RunningStandardizer::variance(std::size_t j) const {
    return count_ == 0 ? 0.0 : m2_[j] / static_cast<double>(count_);
}

void RunningStandardizer::transform(std::span<const double> x, std::span<double> out) const {
    if (count_ == 0) {
        std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(mean_.size()), out.begin());
        return;
    }
    for (std::size_t j = 0; j < mean_.size(); ++j) out[j] = (x[j] - mean_[j]) * inv_std_[j];
}

std::vector<double> RunningStandardizer::standardize(std::span<const double> x) {
    std::vector<double> out(mean_.size());
    transform(x, out);
    update(x);
    return out;
}

void RunningStandardizer::save(std::ostream& out) const {
    binio::write_u64(out, mean_.size());
    binio::write_u64(out, count_);
    for (std::size_t j = 0; j < mean_.size(); ++j) {
        binio::write_f64(out, mean_[j]);
        binio::write_f64(out, m2_[j]);
    }
}

RunningStandardizer RunningStandardizer::load(std::istream& in) {
    const auto d = binio::read_u64(in);
    if (d > (1u << 24)) throw std::runtime_error("standardizer: implausible dimension");
    RunningStandardizer s(d);
    s.count_ = binio::read_u64(in);
    for (std::size_t j = 0; j < d; ++j) {
        s.mean_[j] = binio::read_f64(in);
        s.m2_[j] = binio::read_f64(in);
        if (s.count_ > 0) {
            s.inv_std_[j] = 1.0 / std::max(std::sqrt(s.m2_[j] / static_cast<double>(s.count_)), kStdFloor);
        }
    }
    return s;
}

}  // namespace driftmoe
