#pragma once

// Deterministic synthetic packet captures with AR(1) per-flow rate dynamics.
//
// Every flow draws its own mean rate mu_f (lognormal around mean_rate). Per base slot k the
// target rate follows
//     r_k = rho * r_{k-1} + (1 - rho) * mu_f + N(0, (noise_fraction * mu_f)^2),   clipped at 0,
// and the slot's byte budget r_k * slot_length / 8 (plus the carried remainder) is emitted as
// packets evenly spaced across the slot.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "flowcast/config.hpp"
#include "flowcast/error.hpp"
#include "flowcast/packet.hpp"
#include "flowcast/rng.hpp"

namespace flowcast {

struct SynthConfig {
    std::size_t n_flows = 50;
    double duration = 10.0;        ///< seconds
    double mean_rate = 100000.0;   ///< bit/s, population mean of the per-flow means
    double ar_coefficient = 0.9;   ///< rho in [0, 1)
    double on_off = 0.0;           ///< probability a flow is silent in a base slot
    std::uint32_t packet_min = 400;
    std::uint32_t packet_max = 1400;  ///< equal to packet_min for fixed-size packets
    double base_slot = 0.1;        ///< seconds between rate updates
    double noise_fraction = 0.3;   ///< innovation std relative to the flow mean
    double rate_spread = 0.5;      ///< lognormal sigma of per-flow means; 0 gives identical flows
    double tcp_fraction = 0.8;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_flows < 1) throw Error("synth: n_flows must be at least 1");
        if (!(duration > 0.0) || !std::isfinite(duration)) throw Error("synth: duration must be positive");
        if (!(mean_rate >= 0.0) || !std::isfinite(mean_rate)) throw Error("synth: mean_rate must be non-negative");
        if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0)) throw Error("synth: ar_coefficient must be in [0, 1)");
        if (!(on_off >= 0.0 && on_off <= 1.0)) throw Error("synth: on_off must be in [0, 1]");
        if (packet_min < 1 || packet_max < packet_min) throw Error("synth: need 1 <= packet_min <= packet_max");
        if (!(base_slot > 0.0)) throw Error("synth: base_slot must be positive");
        if (!(noise_fraction >= 0.0) || !(rate_spread >= 0.0)) throw Error("synth: noise and spread must be non-negative");
        if (!(tcp_fraction >= 0.0 && tcp_fraction <= 1.0)) throw Error("synth: tcp_fraction must be in [0, 1]");
    }

    /// Overrides fields from a key-value config (keys as the CLI long options, e.g. `mean-rate`).
    void apply(const KeyValueConfig& cfg) {
        if (auto v = cfg.number<std::size_t>("flows")) n_flows = *v;
        if (auto v = cfg.number<double>("duration")) duration = *v;
        if (auto v = cfg.number<double>("mean-rate")) mean_rate = *v;
        if (auto v = cfg.number<double>("rho")) ar_coefficient = *v;
        if (auto v = cfg.number<double>("on-off")) on_off = *v;
        if (auto v = cfg.number<std::uint32_t>("packet-min")) packet_min = *v;
        if (auto v = cfg.number<std::uint32_t>("packet-max")) packet_max = *v;
        if (auto v = cfg.number<double>("base-slot")) base_slot = *v;
        if (auto v = cfg.number<double>("noise")) noise_fraction = *v;
        if (auto v = cfg.number<double>("rate-spread")) rate_spread = *v;
        if (auto v = cfg.number<double>("tcp-fraction")) tcp_fraction = *v;
        if (auto v = cfg.number<std::uint64_t>("seed")) seed = *v;
    }

    std::size_t slot_count() const {
        return static_cast<std::size_t>(std::ceil(duration / base_slot - 1e-12));
    }
};

struct SynthFlowTrace {
    FiveTuple key;
    double mean_rate = 0.0;
    std::vector<double> target_rate;           ///< bit/s per base slot
    std::vector<std::uint64_t> emitted_bytes;  ///< per base slot
};

struct SynthCapture {
    std::vector<PacketRecord> packets;
    std::vector<SynthFlowTrace> flows;
};

namespace detail {

struct FlowPacket {
    double time;
    std::uint32_t flow;
    std::uint32_t seq;
    PacketRecord record;
};

inline FiveTuple synth_tuple(std::size_t flow, Rng& rng, double tcp_fraction) {
    static constexpr std::uint16_t services[] = {80, 443, 443, 53, 8080, 22, 1935, 5001};
    const std::size_t hosts = 64;
    FiveTuple k;
    const auto host = uniform_index(rng, hosts);
    k.src_ip = Ipv4{(10u << 24) | static_cast<std::uint32_t>(((flow / 64512) & 0xff) << 16) |
                    static_cast<std::uint32_t>(host + 1)};
    k.dst_ip = Ipv4{(192u << 24) | (168u << 16) | static_cast<std::uint32_t>(uniform_index(rng, 16) + 1)};
    k.src_port = static_cast<std::uint16_t>(1024 + flow % 64512);
    k.dst_port = services[uniform_index(rng, std::size(services))];
    k.protocol = uniform_unit(rng) < tcp_fraction ? protocol::tcp : protocol::udp;
    return k;
}

}  // namespace detail

inline SynthCapture generate(const SynthConfig& config) {
    config.validate();
    SynthCapture out;
    const std::size_t slots = config.slot_count();
    std::vector<detail::FlowPacket> all;

    for (std::size_t f = 0; f < config.n_flows; ++f) {
        Rng rng = make_rng(config.seed, f);
        SynthFlowTrace trace;
        trace.key = detail::synth_tuple(f, rng, config.tcp_fraction);
        const bool tcp = trace.key.protocol == protocol::tcp;
        static constexpr std::uint8_t dscps[] = {0, 0, 0, 10, 26, 46};
        const std::uint8_t dscp = dscps[uniform_index(rng, std::size(dscps))];
        const auto window_size = static_cast<std::uint32_t>(8192 + uniform_index(rng, 57344));
        const auto window_scale = static_cast<std::uint8_t>(uniform_index(rng, 9));

        const double sigma = config.rate_spread;
        trace.mean_rate = config.mean_rate * std::exp(sigma * standard_normal(rng) - 0.5 * sigma * sigma);
        const double mu = trace.mean_rate;
        auto draw_size = [&] {
            return config.packet_min + static_cast<std::uint32_t>(uniform_index(rng, config.packet_max - config.packet_min + 1));
        };

        double rate = mu;
        double carry = 0.0;
        std::uint32_t pending = draw_size();
        std::uint32_t seq = 0;
        std::vector<std::uint32_t> sizes;
        for (std::size_t k = 0; k < slots; ++k) {
            rate = config.ar_coefficient * rate + (1.0 - config.ar_coefficient) * mu +
                   config.noise_fraction * mu * standard_normal(rng);
            rate = std::max(rate, 0.0);
            trace.target_rate.push_back(rate);

            const double start = static_cast<double>(k) * config.base_slot;
            const double length = std::min(config.base_slot, config.duration - start);
            const bool silent = config.on_off > 0.0 && uniform_unit(rng) < config.on_off;
            sizes.clear();
            if (silent) {
                carry = 0.0;
            } else {
                double budget = carry + rate * length / 8.0;
                while (budget >= pending) {
                    budget -= pending;
                    sizes.push_back(pending);
                    pending = draw_size();
                }
                carry = budget;
            }

            std::uint64_t bytes = 0;
            for (std::size_t j = 0; j < sizes.size(); ++j) {
                PacketRecord p;
                p.time = start + (static_cast<double>(j) + 0.5) * length / static_cast<double>(sizes.size());
                p.tuple = trace.key;
                p.dscp = dscp;
                p.length = sizes[j];
                if (tcp) {
                    p.flags.bits[3] = 1;                                   // ack
                    p.flags.bits[4] = uniform_unit(rng) < 0.3 ? 1 : 0;    // psh
                    p.flags.bits[6] = seq == 0 ? 1 : 0;                    // syn
                    p.tcp_window_size = window_size;
                    p.tcp_window_scale = window_scale;
                    p.tcp_retransmission = uniform_unit(rng) < 0.01 ? 1 : 0;
                }
                bytes += sizes[j];
                all.push_back({p.time, static_cast<std::uint32_t>(f), seq++, p});
            }
            trace.emitted_bytes.push_back(bytes);
        }
        out.flows.push_back(std::move(trace));
    }

    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.flow != b.flow ? a.flow < b.flow : a.seq < b.seq;
    });
    out.packets.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto p = all[i].record;
        p.delta_time = i == 0 ? 0.0 : p.time - all[i - 1].time;
        out.packets.push_back(p);
    }
    return out;
}

}  // namespace flowcast
