#pragma once

// Row-major table of flow feature vectors and its delimited-text file format.

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "flowcast/flow.hpp"

namespace flowcast {

struct RowKey {
    FiveTuple key;
    std::int64_t timeslot = -1;  ///< -1 when the table does not carry the timeslot column

    friend bool operator==(const RowKey&, const RowKey&) = default;
    friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

struct FeatureTable {
    FeatureMode mode = FeatureMode::full;
    std::vector<double> values;  ///< rows() x width(), row-major
    std::vector<double> labels;
    std::vector<RowKey> keys;

    std::size_t width() const { return feature_count(mode); }
    std::size_t rows() const { return labels.size(); }
    const std::vector<std::string>& columns() const { return feature_names(mode); }

    std::span<const double> row(std::size_t i) const { return {values.data() + i * width(), width()}; }

    std::size_t column_index(std::string_view name) const {
        const auto& cols = columns();
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (cols[i] == name) return i;
        }
        throw SchemaError("feature table has no column '" + std::string(name) + "'");
    }
};

inline FeatureTable make_feature_table(std::span<const FlowSlotRecord> records, FeatureMode mode) {
    FeatureTable t;
    t.mode = mode;
    t.values.resize(records.size() * t.width());
    t.labels.reserve(records.size());
    t.keys.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        feature_values(records[i], mode, std::span<double>(t.values.data() + i * t.width(), t.width()));
        t.labels.push_back(records[i].bitrate_future);
        t.keys.push_back({records[i].key, records[i].timeslot});
    }
    return t;
}

namespace detail {

inline std::string format_feature(std::string_view column, double v) {
    if (column == "src_ip" || column == "dst_ip") return to_string(Ipv4{static_cast<std::uint32_t>(v)});
    return text::format_double(v);
}

}  // namespace detail

/// Header lists every input feature in schema order, then the label column `bitrate_future`.
inline void write_feature_table(std::ostream& out, const FeatureTable& t, char delimiter = ',') {
    const auto& cols = t.columns();
    for (const auto& c : cols) out << c << delimiter;
    out << kLabelName << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto row = t.row(r);
        for (std::size_t c = 0; c < cols.size(); ++c) out << detail::format_feature(cols[c], row[c]) << delimiter;
        out << text::format_double(t.labels[r]) << '\n';
    }
}

inline FeatureTable read_feature_table(std::istream& in, char delimiter = ',') {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("flow dataset is empty (no header)");
    const auto header = text::split(line, delimiter);

    FeatureTable t;
    bool matched = false;
    for (auto mode : {FeatureMode::full, FeatureMode::minimal}) {
        const auto& names = feature_names(mode);
        if (header.size() != names.size() + 1 || header.back() != kLabelName) continue;
        if (std::equal(names.begin(), names.end(), header.begin())) {
            t.mode = mode;
            matched = true;
            break;
        }
    }
    if (!matched) throw SchemaError("flow dataset header does not match the full or minimal feature layout");

    const auto& cols = t.columns();
    const std::size_t timeslot_col = t.mode == FeatureMode::full ? t.column_index("timeslot") : cols.size();
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(line, delimiter);
        if (fields.size() != cols.size() + 1) {
            throw SchemaError("line " + std::to_string(line_number) + ": expected " +
                              std::to_string(cols.size() + 1) + " columns, found " + std::to_string(fields.size()));
        }
        RowKey key;
        for (std::size_t c = 0; c <= cols.size(); ++c) {
            const std::string_view name = c < cols.size() ? std::string_view(cols[c]) : kLabelName;
            double v;
            if (name == "src_ip" || name == "dst_ip") {
                const auto ip = parse_ipv4(fields[c]);
                if (!ip) throw ParseError(line_number, std::string(name), "not an IPv4 address");
                v = ip->value;
            } else {
                const auto parsed = text::parse_number<double>(fields[c]);
                if (!parsed || !std::isfinite(*parsed)) throw ParseError(line_number, std::string(name), "not a number");
                v = *parsed;
            }
            if (c == cols.size()) {
                t.labels.push_back(v);
            } else {
                t.values.push_back(v);
            }
            if (name == "src_ip") key.key.src_ip.value = static_cast<std::uint32_t>(v);
            else if (name == "dst_ip") key.key.dst_ip.value = static_cast<std::uint32_t>(v);
            else if (name == "src_port") key.key.src_port = static_cast<std::uint16_t>(v);
            else if (name == "dst_port") key.key.dst_port = static_cast<std::uint16_t>(v);
            else if (name == "protocol") key.key.protocol = static_cast<std::uint8_t>(v);
            else if (c == timeslot_col) key.timeslot = static_cast<std::int64_t>(v);
        }
        t.keys.push_back(key);
    }
    return t;
}

inline void save_feature_table(const std::string& path, const FeatureTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write flow dataset '" + path + "'");
    write_feature_table(out, t);
    if (!out) throw Error("write failed for '" + path + "'");
}

inline FeatureTable load_feature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open flow dataset '" + path + "'");
    return read_feature_table(in);
}

}  // namespace flowcast
