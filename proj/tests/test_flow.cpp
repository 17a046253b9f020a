#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "flowcast/flow_table.hpp"
#include "support.hpp"

using namespace flowcast;
using flowcast::testing::packet;

namespace {

const FiveTuple kA = flowcast::testing::tuple("10.0.0.1", "10.0.0.2", 1000, 80);
const FiveTuple kB = flowcast::testing::tuple("10.0.0.3", "10.0.0.2", 2000, 443);

std::vector<PacketRecord> with_deltas(std::vector<PacketRecord> p) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i].delta_time = i == 0 ? 0.0 : p[i].time - p[i - 1].time;
    return p;
}

}  // namespace

TEST(SlotIndex, Basics) {
    EXPECT_EQ(slot_index(0.0, 1.0), 0);
    EXPECT_EQ(slot_index(1.0, 1.0), 1);
    EXPECT_EQ(slot_index(0.999, 1.0), 0);
    EXPECT_EQ(slot_index(0.29, 0.03), 9);
    EXPECT_EQ(slot_index(0.3, 0.1), 3);
}

TEST(SlotIndex, MatchesExactDecimalFloor) {
    // times and windows with three decimals: floor(a / b) in integers is exact
    for (std::int64_t b = 1; b <= 400; b += 7) {
        for (std::int64_t a = 0; a <= 10000; a += 13) {
            const double t = static_cast<double>(a) / 1000.0;
            const double w = static_cast<double>(b) / 1000.0;
            ASSERT_EQ(slot_index(t, w), a / b) << "t=" << t << " w=" << w;
        }
    }
}

TEST(WindowConfig, Validation) {
    EXPECT_THROW((WindowConfig{0.0, 10.0}.validate()), Error);
    EXPECT_THROW((WindowConfig{11.0, 10.0}.validate()), Error);
    EXPECT_EQ((WindowConfig{0.03, 10.0}.slot_count()), 334);
    EXPECT_EQ((WindowConfig{0.1, 10.0}.slot_count()), 100);
}

TEST(Aggregate, SingleFlowTwoPackets) {
    const auto agg = aggregate(with_deltas({packet(0.1, kA, 500), packet(0.4, kA, 500)}), {1.0, 2.0});
    ASSERT_EQ(agg.labeled.size(), 1u);
    const auto& r = agg.labeled.front();
    EXPECT_EQ(r.timeslot, 0);
    EXPECT_EQ(r.bitrate, 8000.0);
    EXPECT_EQ(r.bitrate_past, 0.0);
    EXPECT_EQ(r.bitrate_future, 0.0);
    EXPECT_EQ(r.packet_total, 2u);
    EXPECT_EQ(r.length.total, 1000.0);
    EXPECT_TRUE(agg.unlabeled.empty());
}

TEST(Aggregate, NextSlotLabelAndUnlabeledFinalSlot) {
    const auto agg = aggregate(with_deltas({packet(0.1, kA, 500), packet(0.4, kA, 500), packet(1.2, kA, 250)}), {1.0, 2.0});
    ASSERT_EQ(agg.labeled.size(), 1u);
    EXPECT_EQ(agg.labeled[0].bitrate_future, 2000.0);
    ASSERT_EQ(agg.unlabeled.size(), 1u);
    EXPECT_EQ(agg.unlabeled[0].timeslot, 1);
    EXPECT_EQ(agg.unlabeled[0].bitrate_past, 8000.0);
    EXPECT_EQ(agg.unlabeled[0].packet_total, 3u);
}

TEST(Aggregate, FlowCountForFlowsStartingTogether) {
    const auto agg = aggregate(with_deltas({packet(0.1, kA, 100), packet(0.2, kB, 100), packet(1.5, kA, 100)}), {1.0, 3.0});
    ASSERT_EQ(agg.labeled.size(), 3u);
    EXPECT_EQ(agg.labeled[0].flow_count, 2u);
    EXPECT_EQ(agg.labeled[1].flow_count, 2u);
    EXPECT_EQ(agg.labeled[0].key, kA);
    EXPECT_EQ(agg.labeled[1].key, kB);
    EXPECT_EQ(agg.labeled[2].flow_count, 2u);
}

TEST(Aggregate, FlowCountMatchesBruteForce) {
    std::mt19937_64 rng(3);
    const auto packets = flowcast::testing::random_capture(rng, 3000, 60, 10.0);
    const WindowConfig w{0.25, 10.0};
    const auto agg = aggregate(packets, w);
    std::vector<FlowSlotRecord> all = agg.labeled;
    all.insert(all.end(), agg.unlabeled.begin(), agg.unlabeled.end());
    for (const auto& r : all) {
        std::set<FiveTuple> seen;
        for (const auto& p : packets) {
            if (slot_index(p.time, 0.25) <= r.timeslot) seen.insert(p.tuple);
        }
        ASSERT_EQ(r.flow_count, seen.size());
    }
}

TEST(Aggregate, EmptyCapture) {
    const auto agg = aggregate({}, {1.0, 10.0});
    EXPECT_TRUE(agg.labeled.empty());
    EXPECT_TRUE(agg.unlabeled.empty());
}

TEST(Aggregate, SinglePacketSlotStatistics) {
    auto p = packet(0.5, kA, 700);
    p.flags.bits[3] = 1;
    p.tcp_window_size = 4000;
    p.tcp_window_scale = 3;
    const auto agg = aggregate(std::vector{p, packet(3.5, kB, 10)}, {1.0, 4.0});
    const auto& r = agg.labeled.front();
    auto check = [](double max, double min, double avg, double sd) {
        EXPECT_EQ(sd, 0.0);
        EXPECT_EQ(min, max);
        EXPECT_EQ(avg, max);
    };
    check(r.length.max, r.length.min, r.length.average, r.length.std);
    for (const auto& f : r.flags) check(f.max, f.min, f.average, f.std);
    check(r.delta_time.max, r.delta_time.min, r.delta_time.average, r.delta_time.std);
    check(r.tcp_window_size.max, r.tcp_window_size.min, r.tcp_window_size.average, r.tcp_window_size.std);
    check(r.tcp_window_scale.max, r.tcp_window_scale.min, r.tcp_window_scale.average, r.tcp_window_scale.std);
    EXPECT_EQ(r.tcp_window_size.max, 4000.0);
    EXPECT_EQ(r.flags[3].total, 1.0);
}

TEST(Aggregate, PopulationStatisticsAndDscpMode) {
    std::vector<PacketRecord> p = {packet(0.1, kA, 100), packet(0.2, kA, 300), packet(0.3, kA, 200), packet(5.0, kB, 1)};
    p[0].dscp = 46;
    p[1].dscp = 10;
    p[2].dscp = 46;
    const auto agg = aggregate(with_deltas(p), {1.0, 6.0});
    const auto& r = agg.labeled.front();
    EXPECT_EQ(r.length.total, 600.0);
    EXPECT_EQ(r.length.max, 300.0);
    EXPECT_EQ(r.length.min, 100.0);
    EXPECT_DOUBLE_EQ(r.length.average, 200.0);
    EXPECT_NEAR(r.length.std, std::sqrt(20000.0 / 3.0), 1e-9);
    EXPECT_EQ(r.dscp, 46);

    std::vector<PacketRecord> tie = {packet(0.1, kA, 1), packet(0.2, kA, 1), packet(0.3, kA, 1), packet(0.35, kA, 1),
                                     packet(5.0, kB, 1)};
    tie[0].dscp = 46;
    tie[1].dscp = 10;
    tie[2].dscp = 46;
    tie[3].dscp = 10;
    EXPECT_EQ(aggregate(tie, {1.0, 6.0}).labeled.front().dscp, 10);  // 2-2 tie goes to the smaller value
}

TEST(Aggregate, ConservationAndCrossSlotConsistency) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const auto packets = flowcast::testing::random_capture(rng, 4000, 25, 10.0);
        for (double w : {0.03, 0.3, 1.0, 4.0}) {
            const auto agg = aggregate(packets, {w, 10.0});
            std::vector<FlowSlotRecord> all = agg.labeled;
            all.insert(all.end(), agg.unlabeled.begin(), agg.unlabeled.end());
            double bytes = 0.0;
            std::map<FiveTuple, std::uint64_t> final_total;
            std::map<std::pair<FiveTuple, std::int64_t>, const FlowSlotRecord*> by_key;
            for (const auto& r : all) {
                bytes += r.length.total;
                final_total[r.key] = std::max(final_total[r.key], r.packet_total);
                by_key[{r.key, r.timeslot}] = &r;
            }
            double capture_bytes = 0.0;
            for (const auto& p : packets) capture_bytes += p.length;
            EXPECT_EQ(bytes, capture_bytes);
            std::uint64_t total = 0;
            for (const auto& [k, v] : final_total) total += v;
            EXPECT_EQ(total, packets.size());
            for (const auto& [key, r] : by_key) {
                const auto next = by_key.find({key.first, key.second + 1});
                if (next != by_key.end()) {
                    EXPECT_EQ(r->bitrate_future, next->second->bitrate);
                    EXPECT_EQ(next->second->bitrate_past, r->bitrate);
                } else {
                    EXPECT_EQ(r->bitrate_future, 0.0);
                }
                EXPECT_EQ(r->bitrate, r->length.total * 8.0 / w);
                EXPECT_GE(r->cum_bitrate.max, r->cum_bitrate.average);
                EXPECT_GE(r->cum_bitrate.average, r->cum_bitrate.min);
            }
        }
    }
}

TEST(Aggregate, CumulativeBitrateOverHistory) {
    std::mt19937_64 rng(4);
    const auto packets = flowcast::testing::random_capture(rng, 2000, 10, 10.0);
    const auto agg = aggregate(packets, {0.5, 10.0});
    std::map<FiveTuple, std::vector<double>> history;
    for (const auto& r : agg.labeled) {
        auto& h = history[r.key];
        h.push_back(r.bitrate);
        EXPECT_NEAR(r.cum_bitrate.sum, std::accumulate(h.begin(), h.end(), 0.0), 1e-6);
        EXPECT_EQ(r.cum_bitrate.max, *std::max_element(h.begin(), h.end()));
        EXPECT_EQ(r.cum_bitrate.min, *std::min_element(h.begin(), h.end()));
    }
}

TEST(Aggregate, Deterministic) {
    std::mt19937_64 rng(8);
    const auto packets = flowcast::testing::random_capture(rng, 3000, 30, 10.0);
    const auto a = aggregate(packets, {0.2, 10.0});
    const auto b = aggregate(packets, {0.2, 10.0});
    EXPECT_EQ(a.labeled, b.labeled);
    EXPECT_EQ(a.unlabeled, b.unlabeled);
}

TEST(Aggregate, UnsortedInputMatchesSorted) {
    std::mt19937_64 rng(12);
    const auto packets = flowcast::testing::random_capture(rng, 500, 10, 10.0);
    auto shuffled = packets;
    std::reverse(shuffled.begin(), shuffled.end());
    EXPECT_EQ(aggregate(shuffled, {1.0, 10.0}).labeled.size(), aggregate(packets, {1.0, 10.0}).labeled.size());
}

TEST(Aggregate, WindowBoundsSlotCount) {
    std::mt19937_64 rng(1);
    const auto packets = flowcast::testing::random_capture(rng, 1000, 5, 10.0);
    const auto agg = aggregate(packets, {1.0, 10.0});
    std::set<std::int64_t> slots;
    for (const auto& r : agg.labeled) slots.insert(r.timeslot);
    for (const auto& r : agg.unlabeled) slots.insert(r.timeslot);
    EXPECT_LE(slots.size(), 10u);
    EXPECT_EQ(agg.last_slot, 9);
}

TEST(Features, Counts) {
    EXPECT_EQ(feature_count(FeatureMode::full), kFullFeatureCount);
    EXPECT_EQ(kFullFeatureCount, 82u);
    EXPECT_EQ(feature_names(FeatureMode::minimal),
              (std::vector<std::string>{"src_ip", "dst_ip", "src_port", "dst_port", "protocol", "dscp", "bitrate"}));
    const auto& full = feature_names(FeatureMode::full);
    EXPECT_EQ(std::set<std::string>(full.begin(), full.end()).size(), full.size());
    EXPECT_EQ(std::count(full.begin(), full.end(), std::string(kLabelName)), 0);
}

TEST(Features, ValuesFollowNames) {
    const auto agg = aggregate(with_deltas({packet(0.1, kA, 500), packet(0.4, kA, 300), packet(1.2, kA, 250)}), {1.0, 2.0});
    const auto& r = agg.labeled.front();
    const auto v = feature_values(r, FeatureMode::full);
    const auto& names = feature_names(FeatureMode::full);
    ASSERT_EQ(v.size(), names.size());
    auto at = [&](const std::string& n) { return v[static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin())]; };
    EXPECT_EQ(at("src_ip"), static_cast<double>(kA.src_ip.value));
    EXPECT_EQ(at("dst_port"), 80.0);
    EXPECT_EQ(at("bitrate"), 6400.0);
    EXPECT_EQ(at("length_cumsum"), 800.0);
    EXPECT_EQ(at("packet_total"), 2.0);
    EXPECT_EQ(at("cum_bitrate_sum"), 6400.0);
    const auto m = feature_values(r, FeatureMode::minimal);
    EXPECT_EQ(m.size(), 7u);
    EXPECT_EQ(m.back(), 6400.0);
}

TEST(FeatureTable, WriteReadRoundTrip) {
    std::mt19937_64 rng(2);
    const auto packets = flowcast::testing::random_capture(rng, 1500, 20, 10.0);
    const auto agg = aggregate(packets, {0.5, 10.0});
    for (auto mode : {FeatureMode::full, FeatureMode::minimal}) {
        const auto table = make_feature_table(agg.labeled, mode);
        std::stringstream buf;
        write_feature_table(buf, table);
        std::string header;
        std::getline(std::istringstream(buf.str()) >> std::ws, header);
        EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1,
                  static_cast<long>(feature_count(mode) + 1));
        const auto back = read_feature_table(buf);
        EXPECT_EQ(back.mode, mode);
        EXPECT_EQ(back.values, table.values);
        EXPECT_EQ(back.labels, table.labels);
        for (std::size_t i = 0; i < table.rows(); ++i) {
            EXPECT_EQ(back.keys[i].key, table.keys[i].key);
            if (mode == FeatureMode::full) {
                EXPECT_EQ(back.keys[i].timeslot, table.keys[i].timeslot);
            }
        }
    }
}

TEST(FeatureTable, RejectsUnknownHeader) {
    std::istringstream in("a,b,bitrate_future\n1,2,3\n");
    EXPECT_THROW(read_feature_table(in), SchemaError);
}
