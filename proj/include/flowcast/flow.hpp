#pragma once

// Packet-to-flow aggregation: groups packets by directional 5-tuple into fixed time slots and
// computes the per-slot flow features together with the next-slot bitrate label.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowcast/error.hpp"
#include "flowcast/packet.hpp"

namespace flowcast {

struct WindowConfig {
    double window_seconds = 1.0;
    double capture_duration = 10.0;

    void validate() const {
        if (!(window_seconds > 0.0) || !std::isfinite(window_seconds)) {
            throw Error("window must be positive, got " + text::format_double(window_seconds));
        }
        if (!(window_seconds <= capture_duration) || !std::isfinite(capture_duration)) {
            throw Error("window " + text::format_double(window_seconds) + " s exceeds capture duration " +
                        text::format_double(capture_duration) + " s");
        }
    }

    std::int64_t slot_count() const {
        return static_cast<std::int64_t>(std::ceil(capture_duration / window_seconds - 1e-12));
    }
};

/// Slot of a timestamp under half-open slots [k*w, (k+1)*w). Quotients within a few ulps of an
/// integer snap to it, so decimal boundaries such as 0.3 / 0.1 land in the later slot.
inline std::int64_t slot_index(double time, double window_seconds) {
    const double q = time / window_seconds;
    const double nearest = std::nearbyint(q);
    if (std::abs(q - nearest) <= 1e-12 * std::max(1.0, std::abs(q))) {
        return static_cast<std::int64_t>(nearest);
    }
    return static_cast<std::int64_t>(std::floor(q));
}

/// Population statistics over the packets of one slot.
struct StatSummary {
    double max = 0.0;
    double min = 0.0;
    double average = 0.0;
    double std = 0.0;

    friend bool operator==(const StatSummary&, const StatSummary&) = default;
};

/// StatSummary plus the slot total (cumsum).
struct TotalSummary {
    double total = 0.0;
    double max = 0.0;
    double min = 0.0;
    double average = 0.0;
    double std = 0.0;

    friend bool operator==(const TotalSummary&, const TotalSummary&) = default;
};

struct CumulativeBitrate {
    double max = 0.0;
    double min = 0.0;
    double sum = 0.0;
    double average = 0.0;

    friend bool operator==(const CumulativeBitrate&, const CumulativeBitrate&) = default;
};

struct FlowSlotRecord {
    FiveTuple key;
    std::int64_t timeslot = 0;
    std::uint64_t flow_count = 0;    ///< distinct flows first seen in slots <= timeslot
    std::uint8_t dscp = 0;           ///< most frequent DSCP of the slot, ties to the smaller value
    std::uint64_t packet_total = 0;  ///< packets of this flow since capture start
    std::uint64_t slot_packets = 0;
    TotalSummary length;             ///< bytes; total is the slot cumsum
    std::array<TotalSummary, kFlagCount> flags;
    StatSummary delta_time;
    StatSummary tcp_window_size;
    StatSummary tcp_window_scale;
    TotalSummary tcp_retransmission;
    CumulativeBitrate cum_bitrate;   ///< over the flow's active slots <= timeslot
    double bitrate = 0.0;            ///< bit/s in this slot
    double bitrate_past = 0.0;       ///< bit/s in the previous slot, 0 when absent there
    double bitrate_future = 0.0;     ///< bit/s in the next slot, 0 when absent there (the label)

    friend bool operator==(const FlowSlotRecord&, const FlowSlotRecord&) = default;
};

/// Records for slots with an observable next slot, plus the final-slot records kept for inference.
struct FlowAggregation {
    std::vector<FlowSlotRecord> labeled;
    std::vector<FlowSlotRecord> unlabeled;
    std::size_t flows = 0;
    std::int64_t last_slot = -1;
};

namespace detail {

template <class Get>
TotalSummary summarize(std::span<const std::uint32_t> idx, std::span<const PacketRecord> packets, Get get) {
    TotalSummary s;
    const double first = get(packets[idx.front()]);
    s.max = s.min = first;
    for (auto i : idx) {
        const double v = get(packets[i]);
        s.total += v;
        s.max = std::max(s.max, v);
        s.min = std::min(s.min, v);
    }
    const double n = static_cast<double>(idx.size());
    s.average = std::clamp(s.total / n, s.min, s.max);
    if (idx.size() > 1 && s.max != s.min) {
        double ss = 0.0;
        for (auto i : idx) {
            const double d = get(packets[i]) - s.average;
            ss += d * d;
        }
        s.std = std::sqrt(ss / n);
    }
    return s;
}

inline StatSummary without_total(const TotalSummary& t) { return {t.max, t.min, t.average, t.std}; }

}  // namespace detail

/// Aggregates packets into per-(flow, slot) records. Packets are processed in time order (a
/// stable sort is applied when the input is not already ordered). Output is ordered by
/// (timeslot, first appearance of the flow).
inline FlowAggregation aggregate(std::span<const PacketRecord> packets, const WindowConfig& window) {
    window.validate();
    FlowAggregation out;
    if (packets.empty()) return out;

    std::vector<std::uint32_t> order(packets.size());
    std::iota(order.begin(), order.end(), 0u);
    const bool sorted = std::is_sorted(packets.begin(), packets.end(),
                                       [](const auto& a, const auto& b) { return a.time < b.time; });
    if (!sorted) {
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return packets[a].time < packets[b].time; });
    }

    std::unordered_map<FiveTuple, std::uint32_t, FiveTupleHash> flow_ids;
    std::vector<std::vector<std::uint32_t>> flow_packets;
    std::vector<std::int64_t> slot_of(packets.size());
    std::int64_t max_slot = 0;
    for (auto i : order) {
        const auto [it, inserted] = flow_ids.try_emplace(packets[i].tuple, static_cast<std::uint32_t>(flow_packets.size()));
        if (inserted) flow_packets.emplace_back();
        flow_packets[it->second].push_back(i);
        slot_of[i] = slot_index(packets[i].time, window.window_seconds);
        max_slot = std::max(max_slot, slot_of[i]);
    }
    out.flows = flow_packets.size();
    out.last_slot = std::max(window.slot_count() - 1, max_slot);

    // flow_count per slot: flows whose first packet falls in a slot <= t.
    std::vector<std::uint64_t> flows_by_slot(static_cast<std::size_t>(out.last_slot) + 1, 0);
    for (const auto& fp : flow_packets) ++flows_by_slot[static_cast<std::size_t>(slot_of[fp.front()])];
    std::partial_sum(flows_by_slot.begin(), flows_by_slot.end(), flows_by_slot.begin());

    struct Keyed {
        std::int64_t slot;
        std::uint32_t flow;
        FlowSlotRecord record;
    };
    std::vector<Keyed> all;

    for (std::uint32_t flow = 0; flow < flow_packets.size(); ++flow) {
        const auto& fp = flow_packets[flow];
        const std::size_t first_record = all.size();
        std::uint64_t packet_total = 0;
        CumulativeBitrate cum;
        std::size_t active_slots = 0;

        for (std::size_t begin = 0; begin < fp.size();) {
            const auto slot = slot_of[fp[begin]];
            std::size_t end = begin;
            while (end < fp.size() && slot_of[fp[end]] == slot) ++end;
            const std::span<const std::uint32_t> idx(fp.data() + begin, end - begin);

            FlowSlotRecord r;
            r.key = packets[idx.front()].tuple;
            r.timeslot = slot;
            r.flow_count = flows_by_slot[static_cast<std::size_t>(slot)];
            r.slot_packets = idx.size();
            packet_total += idx.size();
            r.packet_total = packet_total;

            std::array<std::uint32_t, 64> dscp_hist{};
            for (auto i : idx) ++dscp_hist[packets[i].dscp];
            r.dscp = static_cast<std::uint8_t>(std::max_element(dscp_hist.begin(), dscp_hist.end()) - dscp_hist.begin());

            r.length = detail::summarize(idx, packets, [](const PacketRecord& p) { return double(p.length); });
            for (std::size_t f = 0; f < kFlagCount; ++f) {
                r.flags[f] = detail::summarize(idx, packets, [f](const PacketRecord& p) { return double(p.flags.bits[f]); });
            }
            r.delta_time = detail::without_total(
                detail::summarize(idx, packets, [](const PacketRecord& p) { return p.delta_time; }));
            r.tcp_window_size = detail::without_total(
                detail::summarize(idx, packets, [](const PacketRecord& p) { return double(p.tcp_window_size); }));
            r.tcp_window_scale = detail::without_total(
                detail::summarize(idx, packets, [](const PacketRecord& p) { return double(p.tcp_window_scale); }));
            r.tcp_retransmission =
                detail::summarize(idx, packets, [](const PacketRecord& p) { return double(p.tcp_retransmission); });

            r.bitrate = r.length.total * 8.0 / window.window_seconds;
            ++active_slots;
            cum.sum += r.bitrate;
            cum.max = active_slots == 1 ? r.bitrate : std::max(cum.max, r.bitrate);
            cum.min = active_slots == 1 ? r.bitrate : std::min(cum.min, r.bitrate);
            cum.average = std::clamp(cum.sum / static_cast<double>(active_slots), cum.min, cum.max);
            r.cum_bitrate = cum;

            all.push_back({slot, flow, std::move(r)});
            begin = end;
        }

        for (std::size_t k = first_record; k < all.size(); ++k) {
            auto& cur = all[k];
            if (k > first_record && all[k - 1].slot + 1 == cur.slot) cur.record.bitrate_past = all[k - 1].record.bitrate;
            if (k + 1 < all.size() && all[k + 1].slot == cur.slot + 1) cur.record.bitrate_future = all[k + 1].record.bitrate;
        }
    }

    std::sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
        return a.slot != b.slot ? a.slot < b.slot : a.flow < b.flow;
    });
    for (auto& k : all) {
        (k.slot < out.last_slot ? out.labeled : out.unlabeled).push_back(std::move(k.record));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Feature schema
// ---------------------------------------------------------------------------------------------

enum class FeatureMode { full, minimal };

inline std::string_view to_string(FeatureMode m) { return m == FeatureMode::full ? "full" : "minimal"; }

inline FeatureMode parse_feature_mode(std::string_view s) {
    if (s == "full") return FeatureMode::full;
    if (s == "minimal") return FeatureMode::minimal;
    throw Error("unknown feature mode '" + std::string(s) + "' (expected full|minimal)");
}

inline constexpr std::string_view kLabelName = "bitrate_future";

/// Input feature names in the fixed column order (label excluded).
inline const std::vector<std::string>& feature_names(FeatureMode mode) {
    static const std::vector<std::string> full = [] {
        std::vector<std::string> n = {"src_ip", "dst_ip", "src_port", "dst_port", "protocol",
                                      "flow_count", "dscp", "timeslot", "packet_total",
                                      "length_cumsum", "length_max", "length_min", "length_avg", "length_std"};
        for (auto f : kFlagNames) {
            for (auto stat : {"total", "max", "min", "avg", "std"}) n.push_back("flag_" + std::string(f) + "_" + stat);
        }
        for (auto group : {"deltatime", "tcp_window_size", "tcp_window_scale"}) {
            for (auto stat : {"max", "min", "avg", "std"}) n.push_back(std::string(group) + "_" + stat);
        }
        for (auto stat : {"total", "max", "min", "avg", "std"}) n.push_back(std::string("tcp_retransmission_") + stat);
        for (auto stat : {"max", "min", "sum", "avg"}) n.push_back(std::string("cum_bitrate_") + stat);
        n.push_back("bitrate");
        n.push_back("bitrate_past");
        return n;
    }();
    static const std::vector<std::string> minimal = {"src_ip", "dst_ip", "src_port", "dst_port",
                                                     "protocol", "dscp", "bitrate"};
    return mode == FeatureMode::full ? full : minimal;
}

/// Number of input features in full mode.
inline constexpr std::size_t kFullFeatureCount = 82;
inline constexpr std::size_t kMinimalFeatureCount = 7;

inline std::size_t feature_count(FeatureMode mode) {
    return mode == FeatureMode::full ? kFullFeatureCount : kMinimalFeatureCount;
}

/// True for columns that are identifiers or codes rather than quantities.
inline bool is_categorical_feature(std::string_view name) {
    return name == "src_ip" || name == "dst_ip" || name == "src_port" || name == "dst_port" ||
           name == "protocol" || name == "dscp";
}

/// Writes the input features of `r` in feature_names(mode) order.
inline void feature_values(const FlowSlotRecord& r, FeatureMode mode, std::span<double> out) {
    const double key[] = {double(r.key.src_ip.value), double(r.key.dst_ip.value), double(r.key.src_port),
                          double(r.key.dst_port), double(r.key.protocol)};
    std::size_t i = 0;
    auto put = [&](double v) { out[i++] = v; };
    for (double v : key) put(v);
    if (mode == FeatureMode::minimal) {
        put(r.dscp);
        put(r.bitrate);
        return;
    }
    put(double(r.flow_count));
    put(r.dscp);
    put(double(r.timeslot));
    put(double(r.packet_total));
    auto put_total = [&](const TotalSummary& s) {
        put(s.total); put(s.max); put(s.min); put(s.average); put(s.std);
    };
    auto put_stat = [&](const StatSummary& s) {
        put(s.max); put(s.min); put(s.average); put(s.std);
    };
    put_total(r.length);
    for (const auto& f : r.flags) put_total(f);
    put_stat(r.delta_time);
    put_stat(r.tcp_window_size);
    put_stat(r.tcp_window_scale);
    put_total(r.tcp_retransmission);
    put(r.cum_bitrate.max);
    put(r.cum_bitrate.min);
    put(r.cum_bitrate.sum);
    put(r.cum_bitrate.average);
    put(r.bitrate);
    put(r.bitrate_past);
}

inline std::vector<double> feature_values(const FlowSlotRecord& r, FeatureMode mode) {
    std::vector<double> v(feature_count(mode));
    feature_values(r, mode, v);
    return v;
}

}  // namespace flowcast
