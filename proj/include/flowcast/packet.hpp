#pragma once

// Packet records as exported by TShark field extraction, and the per-line parser.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowcast/error.hpp"
#include "flowcast/text.hpp"

namespace flowcast {

/// IPv4 address in host byte order.
struct Ipv4 {
    std::uint32_t value = 0;

    friend constexpr bool operator==(Ipv4, Ipv4) = default;
    friend constexpr auto operator<=>(Ipv4, Ipv4) = default;
};

inline std::optional<Ipv4> parse_ipv4(std::string_view s) {
    s = text::trim(s);
    std::uint32_t value = 0;
    for (int octet = 0; octet < 4; ++octet) {
        const auto dot = s.find('.');
        if ((octet < 3) == (dot == std::string_view::npos)) return std::nullopt;
        const auto part = s.substr(0, dot);
        if (part.empty() || part.size() > 3) return std::nullopt;
        const auto n = text::parse_number<unsigned>(part);
        if (!n || *n > 255) return std::nullopt;
        value = (value << 8) | *n;
        s = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    }
    return Ipv4{value};
}

inline std::string to_string(Ipv4 ip) {
    return std::to_string(ip.value >> 24) + '.' + std::to_string((ip.value >> 16) & 0xff) + '.' +
           std::to_string((ip.value >> 8) & 0xff) + '.' + std::to_string(ip.value & 0xff);
}

namespace protocol {
inline constexpr std::uint8_t icmp = 1;
inline constexpr std::uint8_t tcp = 6;
inline constexpr std::uint8_t udp = 17;
}  // namespace protocol

/// Directional flow key. The reverse direction is a distinct flow.
struct FiveTuple {
    Ipv4 src_ip;
    Ipv4 dst_ip;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t protocol = 0;

    friend constexpr bool operator==(const FiveTuple&, const FiveTuple&) = default;
    friend constexpr auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
};

struct FiveTupleHash {
    std::size_t operator()(const FiveTuple& k) const noexcept {
        std::uint64_t h = (std::uint64_t{k.src_ip.value} << 32) | k.dst_ip.value;
        h ^= (std::uint64_t{k.src_port} << 24 | std::uint64_t{k.dst_port} << 8 | k.protocol) *
             0x9e3779b97f4a7c15ULL;
        h ^= h >> 29;
        h *= 0xbf58476d1ce4e5b9ULL;
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

inline constexpr std::size_t kFlagCount = 9;

/// Order used everywhere flags are enumerated (columns, features).
inline constexpr std::array<std::string_view, kFlagCount> kFlagNames = {
    "ns", "cwr", "urg", "ack", "psh", "rst", "syn", "fin", "ecn"};

struct TcpFlags {
    std::array<std::uint8_t, kFlagCount> bits{};

    std::uint8_t ns() const { return bits[0]; }
    std::uint8_t cwr() const { return bits[1]; }
    std::uint8_t urg() const { return bits[2]; }
    std::uint8_t ack() const { return bits[3]; }
    std::uint8_t psh() const { return bits[4]; }
    std::uint8_t rst() const { return bits[5]; }
    std::uint8_t syn() const { return bits[6]; }
    std::uint8_t fin() const { return bits[7]; }
    std::uint8_t ecn() const { return bits[8]; }

    friend bool operator==(const TcpFlags&, const TcpFlags&) = default;
};

struct PacketRecord {
    double time = 0.0;        ///< seconds since capture start
    double delta_time = 0.0;  ///< seconds since the previous packet of the capture
    FiveTuple tuple;
    std::uint8_t dscp = 0;
    std::uint32_t length = 0;  ///< bytes
    TcpFlags flags;
    std::uint32_t tcp_window_size = 0;
    std::uint8_t tcp_window_scale = 0;
    std::uint8_t tcp_retransmission = 0;

    friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

enum class PacketField {
    time,
    delta_time,
    src_ip,
    dst_ip,
    src_port,
    dst_port,
    protocol,
    dscp,
    length,
    flag_ns,
    flag_cwr,
    flag_urg,
    flag_ack,
    flag_psh,
    flag_rst,
    flag_syn,
    flag_fin,
    flag_ecn,
    tcp_window_size,
    tcp_window_scale,
    tcp_retransmission,
    ignored,
};

inline constexpr std::size_t kPacketFieldCount = static_cast<std::size_t>(PacketField::ignored);

inline constexpr std::array<std::string_view, kPacketFieldCount> kPacketFieldNames = {
    "time",     "delta_time", "src_ip",  "dst_ip",  "src_port",
    "dst_port", "protocol",   "dscp",    "length",  "ns",
    "cwr",      "urg",        "ack",     "psh",     "rst",
    "syn",      "fin",        "ecn",     "tcp_window_size",
    "tcp_window_scale",       "tcp_retransmission"};

inline std::string_view field_name(PacketField f) {
    return f == PacketField::ignored ? std::string_view{"ignored"}
                                     : kPacketFieldNames[static_cast<std::size_t>(f)];
}

/// Maps a column header to a field. Accepts the canonical names and the TShark field names
/// of the reference export (see docs/tshark.md).
inline std::optional<PacketField> field_from_name(std::string_view name) {
    name = text::trim(name);
    for (std::size_t i = 0; i < kPacketFieldCount; ++i) {
        if (kPacketFieldNames[i] == name) return static_cast<PacketField>(i);
    }
    struct Alias {
        std::string_view name;
        PacketField field;
    };
    static constexpr std::array<Alias, 25> aliases = {{
        {"frame.time_relative", PacketField::time},
        {"frame.time_delta", PacketField::delta_time},
        {"frame.time_delta_displayed", PacketField::delta_time},
        {"ip.src", PacketField::src_ip},
        {"ip.dst", PacketField::dst_ip},
        {"tcp.srcport", PacketField::src_port},
        {"udp.srcport", PacketField::src_port},
        {"tcp.dstport", PacketField::dst_port},
        {"udp.dstport", PacketField::dst_port},
        {"ip.proto", PacketField::protocol},
        {"ip.dsfield.dscp", PacketField::dscp},
        {"frame.len", PacketField::length},
        {"tcp.flags.ns", PacketField::flag_ns},
        {"tcp.flags.cwr", PacketField::flag_cwr},
        {"tcp.flags.urg", PacketField::flag_urg},
        {"tcp.flags.ack", PacketField::flag_ack},
        {"tcp.flags.push", PacketField::flag_psh},
        {"tcp.flags.reset", PacketField::flag_rst},
        {"tcp.flags.syn", PacketField::flag_syn},
        {"tcp.flags.fin", PacketField::flag_fin},
        {"tcp.flags.ecn", PacketField::flag_ecn},
        {"tcp.window_size", PacketField::tcp_window_size},
        {"tcp.window_size_value", PacketField::tcp_window_size},
        {"tcp.options.wscale.shift", PacketField::tcp_window_scale},
        {"tcp.analysis.retransmission", PacketField::tcp_retransmission},
    }};
    for (const auto& a : aliases) {
        if (a.name == name) return a.field;
    }
    return std::nullopt;
}

/// Column layout of a packet CSV. Several columns may map to the same field (TShark exports
/// tcp.srcport and udp.srcport separately); the first non-empty one wins.
struct CsvSchema {
    std::vector<PacketField> columns;
    char delimiter = ',';

    static CsvSchema default_schema(char delimiter = ',') {
        CsvSchema s;
        s.delimiter = delimiter;
        for (std::size_t i = 0; i < kPacketFieldCount; ++i) {
            s.columns.push_back(static_cast<PacketField>(i));
        }
        return s;
    }

    /// Builds a schema from a header line; unknown names become ignored columns.
    static CsvSchema from_header(std::string_view header, char delimiter = ',') {
        CsvSchema s;
        s.delimiter = delimiter;
        for (auto name : text::split(header, delimiter)) {
            s.columns.push_back(field_from_name(name).value_or(PacketField::ignored));
        }
        return s;
    }

    bool has(PacketField f) const {
        for (auto c : columns) {
            if (c == f) return true;
        }
        return false;
    }

    std::string header() const {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += delimiter;
            out += field_name(columns[i]);
        }
        return out;
    }
};

namespace detail {

template <class T>
T parse_bounded(std::string_view raw, std::size_t line, PacketField f, long long lo, long long hi) {
    const auto v = text::parse_number<long long>(raw);
    if (!v) {
        throw ParseError(line, std::string(field_name(f)), "not an integer: '" + std::string(raw) + "'");
    }
    if (*v < lo || *v > hi) {
        throw ParseError(line, std::string(field_name(f)),
                         "value " + std::to_string(*v) + " outside [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
    }
    return static_cast<T>(*v);
}

inline std::uint8_t parse_indicator(std::string_view raw, std::size_t line, PacketField f) {
    if (raw == "True" || raw == "true") return 1;
    if (raw == "False" || raw == "false") return 0;
    return parse_bounded<std::uint8_t>(raw, line, f, 0, 1);
}

}  // namespace detail

/// Parses one packet line. Absent (empty) port and TCP columns default to 0; TCP-only fields are
/// forced to 0 for non-TCP packets. Throws SchemaError on a column-count mismatch and ParseError
/// (carrying line and column) on a malformed or out-of-range value.
inline PacketRecord parse_packet_line(std::string_view line, const CsvSchema& schema,
                                      std::size_t line_number = 1) {
    const auto fields = text::split(line, schema.delimiter);
    if (fields.size() != schema.columns.size()) {
        throw SchemaError("line " + std::to_string(line_number) + ": expected " +
                          std::to_string(schema.columns.size()) + " columns, found " +
                          std::to_string(fields.size()));
    }

    std::array<std::string_view, kPacketFieldCount> raw{};
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto f = schema.columns[i];
        if (f == PacketField::ignored) continue;
        auto& slot = raw[static_cast<std::size_t>(f)];
        if (slot.empty()) slot = fields[i];
    }
    auto get = [&](PacketField f) { return raw[static_cast<std::size_t>(f)]; };
    auto require = [&](PacketField f) {
        const auto v = get(f);
        if (v.empty()) throw ParseError(line_number, std::string(field_name(f)), "missing value");
        return v;
    };
    auto real = [&](PacketField f) {
        const auto s = require(f);
        const auto v = text::parse_number<double>(s);
        if (!v) throw ParseError(line_number, std::string(field_name(f)), "not a number: '" + std::string(s) + "'");
        if (!(*v >= 0.0) || *v == std::numeric_limits<double>::infinity()) {
            throw ParseError(line_number, std::string(field_name(f)), "must be finite and non-negative");
        }
        return *v;
    };
    auto optional_int = [&]<class T>(PacketField f, long long lo, long long hi, T) -> T {
        const auto s = get(f);
        return s.empty() ? T{0} : detail::parse_bounded<T>(s, line_number, f, lo, hi);
    };

    PacketRecord r;
    r.time = real(PacketField::time);
    r.delta_time = get(PacketField::delta_time).empty() ? 0.0 : real(PacketField::delta_time);

    for (auto f : {PacketField::src_ip, PacketField::dst_ip}) {
        const auto s = require(f);
        const auto ip = parse_ipv4(s);
        if (!ip) throw ParseError(line_number, std::string(field_name(f)), "not an IPv4 address: '" + std::string(s) + "'");
        (f == PacketField::src_ip ? r.tuple.src_ip : r.tuple.dst_ip) = *ip;
    }
    r.tuple.protocol = detail::parse_bounded<std::uint8_t>(require(PacketField::protocol), line_number,
                                                           PacketField::protocol, 0, 255);
    r.tuple.src_port = optional_int(PacketField::src_port, 0, 65535, std::uint16_t{});
    r.tuple.dst_port = optional_int(PacketField::dst_port, 0, 65535, std::uint16_t{});
    r.dscp = optional_int(PacketField::dscp, 0, 63, std::uint8_t{});
    r.length = detail::parse_bounded<std::uint32_t>(require(PacketField::length), line_number,
                                                    PacketField::length, 1, 0xffffffffLL);

    const bool is_tcp = r.tuple.protocol == protocol::tcp;
    const bool has_ports = is_tcp || r.tuple.protocol == protocol::udp || r.tuple.protocol == 132;
    if (!has_ports) {
        r.tuple.src_port = 0;
        r.tuple.dst_port = 0;
    }
    if (is_tcp) {
        for (std::size_t i = 0; i < kFlagCount; ++i) {
            const auto f = static_cast<PacketField>(static_cast<std::size_t>(PacketField::flag_ns) + i);
            const auto s = get(f);
            r.flags.bits[i] = s.empty() ? 0 : detail::parse_indicator(s, line_number, f);
        }
        r.tcp_window_size = optional_int(PacketField::tcp_window_size, 0, 0xffffffffLL, std::uint32_t{});
        // TShark reports -1/-2 when the shift is unknown or scaling is off.
        const auto shift = optional_int(PacketField::tcp_window_scale, -2, 14, std::int16_t{});
        r.tcp_window_scale = static_cast<std::uint8_t>(shift < 0 ? 0 : shift);
        const auto retrans = get(PacketField::tcp_retransmission);
        if (!retrans.empty()) {
            if (retrans == "True" || retrans == "true") {
                r.tcp_retransmission = 1;
            } else if (retrans == "False" || retrans == "false") {
                r.tcp_retransmission = 0;
            } else {
                const auto v = text::parse_number<double>(retrans);
                if (!v) throw ParseError(line_number, "tcp_retransmission", "not a number: '" + std::string(retrans) + "'");
                r.tcp_retransmission = *v != 0.0 ? 1 : 0;
            }
        }
    }
    return r;
}

/// Inverse of parse_packet_line for the given schema. Reals use the shortest round-trip form.
inline std::string format_packet_line(const PacketRecord& r, const CsvSchema& schema) {
    std::string out;
    for (std::size_t i = 0; i < schema.columns.size(); ++i) {
        if (i) out += schema.delimiter;
        const auto f = schema.columns[i];
        switch (f) {
            case PacketField::time: out += text::format_double(r.time); break;
            case PacketField::delta_time: out += text::format_double(r.delta_time); break;
            case PacketField::src_ip: out += to_string(r.tuple.src_ip); break;
            case PacketField::dst_ip: out += to_string(r.tuple.dst_ip); break;
            case PacketField::src_port: out += std::to_string(r.tuple.src_port); break;
            case PacketField::dst_port: out += std::to_string(r.tuple.dst_port); break;
            case PacketField::protocol: out += std::to_string(r.tuple.protocol); break;
            case PacketField::dscp: out += std::to_string(r.dscp); break;
            case PacketField::length: out += std::to_string(r.length); break;
            case PacketField::tcp_window_size: out += std::to_string(r.tcp_window_size); break;
            case PacketField::tcp_window_scale: out += std::to_string(r.tcp_window_scale); break;
            case PacketField::tcp_retransmission: out += std::to_string(r.tcp_retransmission); break;
            case PacketField::ignored: break;
            default: {
                const auto bit = static_cast<std::size_t>(f) - static_cast<std::size_t>(PacketField::flag_ns);
                out += std::to_string(r.flags.bits[bit]);
            }
        }
    }
    return out;
}

}  // namespace flowcast

template <>
struct std::hash<flowcast::FiveTuple> : flowcast::FiveTupleHash {};
