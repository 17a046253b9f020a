#pragma once

// Helpers shared by the test suites.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "flowcast/packet.hpp"

namespace flowcast::testing {

inline FiveTuple tuple(const char* src, const char* dst, std::uint16_t sp, std::uint16_t dp,
                       std::uint8_t proto = protocol::tcp) {
    return {*parse_ipv4(src), *parse_ipv4(dst), sp, dp, proto};
}

inline PacketRecord packet(double time, const FiveTuple& key, std::uint32_t length) {
    PacketRecord p;
    p.time = time;
    p.tuple = key;
    p.length = length;
    return p;
}

/// Time-ordered capture with valid records: random flows, sizes, flags and TCP fields.
inline std::vector<PacketRecord> random_capture(std::mt19937_64& rng, std::size_t n_packets, std::size_t n_flows,
                                                double duration) {
    std::uniform_real_distribution<double> when(0.0, duration);
    std::uniform_int_distribution<std::size_t> which(0, n_flows - 1);
    std::uniform_int_distribution<std::uint32_t> size(40, 1500);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<FiveTuple> flows;
    for (std::size_t f = 0; f < n_flows; ++f) {
        const bool tcp = bit(rng) == 1;
        flows.push_back({Ipv4{0x0a000000u + static_cast<std::uint32_t>(f % 7)}, Ipv4{0xc0a80001u + static_cast<std::uint32_t>(f % 3)},
                         static_cast<std::uint16_t>(1024 + f), static_cast<std::uint16_t>(tcp ? 443 : 53),
                         tcp ? protocol::tcp : protocol::udp});
    }
    std::vector<double> times(n_packets);
    for (auto& t : times) t = when(rng);
    std::sort(times.begin(), times.end());
    std::vector<PacketRecord> out;
    for (std::size_t i = 0; i < n_packets; ++i) {
        PacketRecord p = packet(times[i], flows[which(rng)], size(rng));
        p.delta_time = i == 0 ? 0.0 : times[i] - times[i - 1];
        p.dscp = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 3)(rng) * 10);
        if (p.tuple.protocol == protocol::tcp) {
            for (auto& b : p.flags.bits) b = static_cast<std::uint8_t>(bit(rng));
            p.tcp_window_size = std::uniform_int_distribution<std::uint32_t>(0, 65535)(rng);
            p.tcp_window_scale = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 14)(rng));
            p.tcp_retransmission = static_cast<std::uint8_t>(bit(rng));
        }
        out.push_back(p);
    }
    return out;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("flowcast_" + name + "_" + std::to_string(std::random_device{}()))) {
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace flowcast::testing
