#pragma once

// One-hot encoding of flow feature tables into numeric matrices, and seeded train/test splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowcast/flow_table.hpp"
#include "flowcast/rng.hpp"

namespace flowcast {

inline constexpr std::size_t kDefaultCardinalityCap = 256;
inline constexpr std::size_t kNoColumn = std::numeric_limits<std::size_t>::max();

/// One source feature and how it is laid out in the encoded matrix.
struct SourceColumn {
    std::string name;
    std::size_t source = 0;  ///< index into the feature table row
    bool categorical = false;
    /// Dedicated categories, most frequent first (ties by smaller value); the "other" indicator follows.
    std::vector<double> categories;

    std::size_t width() const { return categorical ? categories.size() + 1 : 1; }
};

class EncodingSchema {
public:
    EncodingSchema() = default;
    EncodingSchema(FeatureMode mode, std::size_t cap, std::vector<SourceColumn> columns)
        : mode_(mode), cap_(cap), columns_(std::move(columns)) {
        index();
    }

    FeatureMode mode() const { return mode_; }
    std::size_t cap() const { return cap_; }
    const std::vector<SourceColumn>& columns() const { return columns_; }
    std::size_t width() const { return width_; }
    std::size_t offset(std::size_t column) const { return offsets_[column]; }

    /// Encoded position of the indicator for `value` within categorical column `column`.
    std::size_t indicator(std::size_t column, double value) const {
        const auto& lookup = lookups_[column];
        const auto it = lookup.find(value);
        return offsets_[column] + (it == lookup.end() ? columns_[column].categories.size() : it->second);
    }

    /// Encoded index of a numeric column, or kNoColumn.
    std::size_t numeric_position(std::string_view name) const {
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (!columns_[c].categorical && columns_[c].name == name) return offsets_[c];
        }
        return kNoColumn;
    }

    std::vector<std::string> encoded_names() const {
        std::vector<std::string> names;
        names.reserve(width_);
        for (const auto& col : columns_) {
            if (!col.categorical) {
                names.push_back(col.name);
                continue;
            }
            for (double v : col.categories) {
                const bool ip = col.name == "src_ip" || col.name == "dst_ip";
                names.push_back(col.name + "=" + (ip ? to_string(Ipv4{static_cast<std::uint32_t>(v)}) : text::format_double(v)));
            }
            names.push_back(col.name + "=other");
        }
        return names;
    }

    friend bool operator==(const EncodingSchema& a, const EncodingSchema& b) {
        if (a.mode_ != b.mode_ || a.cap_ != b.cap_ || a.columns_.size() != b.columns_.size()) return false;
        for (std::size_t i = 0; i < a.columns_.size(); ++i) {
            const auto &x = a.columns_[i], &y = b.columns_[i];
            if (x.name != y.name || x.source != y.source || x.categorical != y.categorical || x.categories != y.categories) return false;
        }
        return true;
    }

private:
    void index() {
        offsets_.clear();
        lookups_.assign(columns_.size(), {});
        width_ = 0;
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            offsets_.push_back(width_);
            width_ += columns_[c].width();
            for (std::size_t k = 0; k < columns_[c].categories.size(); ++k) lookups_[c].emplace(columns_[c].categories[k], k);
        }
    }

    FeatureMode mode_ = FeatureMode::full;
    std::size_t cap_ = kDefaultCardinalityCap;
    std::vector<SourceColumn> columns_;
    std::vector<std::size_t> offsets_;
    std::vector<std::unordered_map<double, std::size_t>> lookups_;
    std::size_t width_ = 0;
};

/// Fits the encoding on the given rows of `table` (all rows when `rows` is empty). Each
/// categorical column keeps its cap-1 most frequent values plus an "other" indicator.
inline EncodingSchema build_schema(const FeatureTable& table, std::size_t cap = kDefaultCardinalityCap,
                                   std::span<const std::size_t> rows = {}) {
    if (table.rows() == 0) throw Error("cannot build an encoding schema from an empty dataset");
    if (cap < 1) throw Error("cardinality cap must be at least 1");

    const auto& names = table.columns();
    std::vector<SourceColumn> columns;
    for (std::size_t c = 0; c < names.size(); ++c) {
        SourceColumn col{names[c], c, is_categorical_feature(names[c]), {}};
        if (col.categorical) {
            std::unordered_map<double, std::size_t> counts;
            auto count_row = [&](std::size_t r) { ++counts[table.values[r * table.width() + c]]; };
            if (rows.empty()) {
                for (std::size_t r = 0; r < table.rows(); ++r) count_row(r);
            } else {
                for (auto r : rows) count_row(r);
            }
            std::vector<std::pair<double, std::size_t>> ranked(counts.begin(), counts.end());
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
            const std::size_t keep = std::min(ranked.size(), cap - 1);
            for (std::size_t k = 0; k < keep; ++k) col.categories.push_back(ranked[k].first);
        }
        columns.push_back(std::move(col));
    }
    return EncodingSchema(table.mode, cap, std::move(columns));
}

/// Non-owning row-major matrix with labels, the input type of every learner.
struct TrainingView {
    std::span<const double> x;
    std::size_t cols = 0;
    std::span<const double> y;

    std::size_t rows() const { return y.size(); }
    std::span<const double> row(std::size_t i) const { return x.subspan(i * cols, cols); }
    double at(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
};

struct EncodedDataset {
    std::vector<double> features;  ///< rows() x width, row-major
    std::size_t width = 0;
    std::vector<double> labels;    ///< bitrate_future, bit/s
    std::vector<RowKey> provenance;
    std::size_t bitrate_column = kNoColumn;  ///< current-slot bitrate, used by the baseline

    std::size_t rows() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * width, width}; }
    TrainingView view() const { return {features, width, labels}; }

    EncodedDataset subset(std::span<const std::size_t> rows) const {
        EncodedDataset out;
        out.width = width;
        out.bitrate_column = bitrate_column;
        out.features.reserve(rows.size() * width);
        for (auto r : rows) {
            const auto src = row(r);
            out.features.insert(out.features.end(), src.begin(), src.end());
            out.labels.push_back(labels[r]);
            out.provenance.push_back(provenance[r]);
        }
        return out;
    }
};

/// Encodes the given rows (all when empty) under `schema`; column order is the schema order.
inline EncodedDataset encode(const FeatureTable& table, const EncodingSchema& schema,
                             std::span<const std::size_t> rows = {}) {
    if (table.mode != schema.mode()) throw SchemaError("feature table mode does not match the encoding schema");
    EncodedDataset out;
    out.width = schema.width();
    out.bitrate_column = schema.numeric_position("bitrate");
    const std::size_t n = rows.empty() ? table.rows() : rows.size();
    out.features.assign(n * out.width, 0.0);
    out.labels.reserve(n);
    out.provenance.reserve(n);
    const auto& columns = schema.columns();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = rows.empty() ? i : rows[i];
        const auto src = table.row(r);
        double* dst = out.features.data() + i * out.width;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const double v = src[columns[c].source];
            if (columns[c].categorical) {
                dst[schema.indicator(c, v)] = 1.0;
            } else {
                dst[schema.offset(c)] = v;
            }
        }
        out.labels.push_back(table.labels[r]);
        out.provenance.push_back(table.keys[r]);
    }
    return out;
}

/// Recovers the source-table value of numeric column `column` from an encoded row.
inline double decode_numeric(const EncodingSchema& schema, std::size_t column, std::span<const double> encoded_row) {
    if (schema.columns()[column].categorical) throw SchemaError("column '" + schema.columns()[column].name + "' is categorical");
    return encoded_row[schema.offset(column)];
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Uniformly random partition: round(n * train_fraction) training rows (kept within [1, n-1]),
/// both sides sorted by original row index. Identical seeds give identical partitions.
inline SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("train fraction must be in (0, 1)");
    if (n < 2) throw Error("need at least 2 rows to split, got " + std::to_string(n));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(substream_seed(seed, 0x5b117));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);

    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction)), 1, n - 1);
    SplitIndices s;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

inline std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& ds, double train_fraction,
                                                       std::uint64_t seed) {
    const auto s = split_indices(ds.rows(), train_fraction, seed);
    return {ds.subset(s.train), ds.subset(s.test)};
}

// ---------------------------------------------------------------------------------------------
// Persistence: schema sidecar (text) and encoded matrix (delimited text).
// ---------------------------------------------------------------------------------------------

inline void write_schema(std::ostream& out, const EncodingSchema& schema) {
    out << "flowcast-schema 1\n";
    out << "mode " << to_string(schema.mode()) << '\n';
    out << "cap " << schema.cap() << '\n';
    for (const auto& col : schema.columns()) {
        out << "column " << col.name << ' ' << col.source << ' ';
        if (!col.categorical) {
            out << "numeric\n";
            continue;
        }
        out << "categorical " << col.categories.size();
        for (double v : col.categories) out << ' ' << text::format_double(v);
        out << '\n';
    }
}

inline EncodingSchema read_schema(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "flowcast-schema 1") throw FormatError("not a flowcast schema (bad magic line)");
    FeatureMode mode = FeatureMode::full;
    std::size_t cap = kDefaultCardinalityCap;
    std::vector<SourceColumn> columns;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "mode") {
            std::string m;
            ls >> m;
            mode = parse_feature_mode(m);
        } else if (tag == "cap") {
            ls >> cap;
        } else if (tag == "column") {
            SourceColumn col;
            std::string kind;
            if (!(ls >> col.name >> col.source >> kind)) throw FormatError("malformed schema column line: " + line);
            if (kind == "categorical") {
                col.categorical = true;
                std::size_t k = 0;
                ls >> k;
                for (std::size_t i = 0; i < k; ++i) {
                    std::string tok;
                    if (!(ls >> tok)) throw FormatError("truncated category list for column " + col.name);
                    const auto v = text::parse_number<double>(tok);
                    if (!v) throw FormatError("bad category value '" + tok + "'");
                    col.categories.push_back(*v);
                }
            } else if (kind != "numeric") {
                throw FormatError("unknown column kind '" + kind + "'");
            }
            columns.push_back(std::move(col));
        } else {
            throw FormatError("unknown schema entry '" + tag + "'");
        }
    }
    if (columns.size() != feature_count(mode)) throw FormatError("schema column count does not match its feature mode");
    return EncodingSchema(mode, cap, std::move(columns));
}

inline void save_schema(const std::string& path, const EncodingSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write schema '" + path + "'");
    write_schema(out, schema);
}

inline EncodingSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open schema '" + path + "'");
    return read_schema(in);
}

/// Writes the encoded matrix (header of encoded column names, label last) and `<path>.schema`.
inline void save_encoded(const std::string& path, const EncodedDataset& ds, const EncodingSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write encoded dataset '" + path + "'");
    for (const auto& name : schema.encoded_names()) out << name << ',';
    out << kLabelName << '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (double v : ds.row(r)) out << text::format_double(v) << ',';
        out << text::format_double(ds.labels[r]) << '\n';
    }
    save_schema(path + ".schema", schema);
}

inline std::pair<EncodedDataset, EncodingSchema> load_encoded(const std::string& path) {
    auto schema = load_schema(path + ".schema");
    std::ifstream in(path);
    if (!in) throw Error("cannot open encoded dataset '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("encoded dataset has no header");
    if (text::split(line, ',').size() != schema.width() + 1) throw SchemaError("encoded header width does not match schema");
    EncodedDataset ds;
    ds.width = schema.width();
    ds.bitrate_column = schema.numeric_position("bitrate");
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != ds.width + 1) throw SchemaError("line " + std::to_string(line_number) + ": wrong column count");
        for (std::size_t c = 0; c <= ds.width; ++c) {
            const auto v = text::parse_number<double>(fields[c]);
            if (!v) throw ParseError(line_number, std::to_string(c), "not a number");
            (c == ds.width ? ds.labels : ds.features).push_back(*v);
        }
        ds.provenance.push_back({});
    }
    return {std::move(ds), std::move(schema)};
}

}  // namespace flowcast
