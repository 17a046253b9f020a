#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "flowcast/packet.hpp"

namespace flowcast {

struct LoadOptions {
    /// Explicit layout. When empty, a header line (if present) defines the layout, otherwise the
    /// default column order is assumed.
    std::optional<CsvSchema> schema;
    char delimiter = ',';
    /// Error on decreasing timestamps instead of clamping delta_time to 0.
    bool strict_time_order = false;
};

struct Capture {
    std::vector<PacketRecord> packets;
    std::size_t skipped_ipv6 = 0;
    std::size_t clamped_timestamps = 0;  ///< decreasing timestamps seen in lenient mode

    std::size_t packet_count() const { return packets.size(); }
};

namespace detail {

inline bool looks_like_header(std::string_view line, char delimiter) {
    const auto fields = text::split(line, delimiter);
    return !fields.empty() && !text::parse_number<double>(fields.front());
}

inline bool is_ipv6_line(std::string_view line, const CsvSchema& schema) {
    const auto fields = text::split(line, schema.delimiter);
    for (std::size_t i = 0; i < fields.size() && i < schema.columns.size(); ++i) {
        const auto f = schema.columns[i];
        if ((f == PacketField::src_ip || f == PacketField::dst_ip) &&
            fields[i].find(':') != std::string_view::npos) {
            return true;
        }
    }
    return false;
}

}  // namespace detail

/// Reads a packet CSV stream in order. delta_time is recomputed from successive timestamps so
/// that it always refers to the previous emitted packet.
inline Capture read_capture(std::istream& in, const LoadOptions& options = {}) {
    Capture capture;
    std::optional<CsvSchema> schema = options.schema;
    std::string line;
    std::size_t line_number = 0;
    bool first = true;
    double previous_time = 0.0;

    while (std::getline(in, line)) {
        ++line_number;
        if (text::trim(line).empty()) continue;
        const char delim = schema ? schema->delimiter : options.delimiter;
        if (first) {
            first = false;
            if (detail::looks_like_header(line, delim)) {
                if (!schema) schema = CsvSchema::from_header(line, delim);
                continue;
            }
            if (!schema) schema = CsvSchema::default_schema(delim);
        }
        if (detail::is_ipv6_line(line, *schema)) {
            ++capture.skipped_ipv6;
            continue;
        }

        auto record = parse_packet_line(line, *schema, line_number);
        if (capture.packets.empty()) {
            record.delta_time = 0.0;
        } else if (record.time < previous_time) {
            if (options.strict_time_order) {
                throw ParseError(line_number, "time",
                                 "timestamp " + text::format_double(record.time) +
                                     " precedes previous packet at " + text::format_double(previous_time));
            }
            ++capture.clamped_timestamps;
            record.delta_time = 0.0;
        } else {
            record.delta_time = record.time - previous_time;
        }
        previous_time = record.time;
        capture.packets.push_back(record);
    }
    return capture;
}

inline Capture load_capture(const std::string& path, const LoadOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open capture '" + path + "'");
    return read_capture(in, options);
}

inline void write_capture(std::ostream& out, std::span<const PacketRecord> packets,
                          const CsvSchema& schema = CsvSchema::default_schema(), bool header = true) {
    if (header) out << schema.header() << '\n';
    for (const auto& p : packets) out << format_packet_line(p, schema) << '\n';
}

inline void save_capture(const std::string& path, std::span<const PacketRecord> packets,
                         const CsvSchema& schema = CsvSchema::default_schema()) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write capture '" + path + "'");
    write_capture(out, packets, schema);
    if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace flowcast
