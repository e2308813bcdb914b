#include <gtest/gtest.h>

#include <sstream>

#include "dnsburrow/report.hpp"

namespace dnsburrow {
namespace {

TraceRecord rec(double ts, std::string qname, std::uint16_t qtype, std::uint32_t payload,
                Direction dir, std::uint32_t covert, bool retrans = false) {
    return TraceRecord{ts, std::move(qname), qtype, payload, payload + kFramingOverhead,
                       dir, covert, retrans};
}

TEST(Stats, PayloadPacketOffset) {
    // The 42-byte framing constant reconciles payload and packet sizes.
    std::vector<DnsObservation> v = {
        DnsObservation{0, "a.test.com", 1, 61, 0, Direction::Query},
    };
    StatsBundle s = compute_stats(v);
    EXPECT_EQ(s.packet_len.min, 103u);
    EXPECT_EQ(s.packet_len.max, 103u);
}

TEST(Stats, DatasetExtremes) {
    std::vector<DnsObservation> v = {
        DnsObservation{0, "a.test.com", 1, 22, 64, Direction::Query},
        DnsObservation{1, "b.test.com", 1, 377, 419, Direction::Response},
    };
    StatsBundle s = compute_stats(v);
    EXPECT_EQ(s.payload_size.min, 22u);
    EXPECT_EQ(s.payload_size.max, 377u);
    EXPECT_EQ(s.packet_len.min, 64u);
    EXPECT_EQ(s.packet_len.max, 419u);
}

TEST(Stats, LabelDepthBuckets) {
    std::vector<DnsObservation> v = {
        DnsObservation{0, "a.b.test.com", 1, 50, 92, Direction::Query},
        DnsObservation{1, "x.test.com", 1, 50, 92, Direction::Query},
        DnsObservation{2, "test.com", 1, 50, 92, Direction::Query},
        DnsObservation{3, "a.b.test.com", 1, 90, 132, Direction::Response}, // not a query
    };
    StatsBundle s = compute_stats(v);
    EXPECT_EQ(s.label_depth[4], 1u);
    EXPECT_EQ(s.label_depth[3], 1u);
    EXPECT_EQ(s.label_depth[2], 1u);
    EXPECT_EQ(label_depth_of("a.b.test.com"), 4);
    EXPECT_EQ(label_depth_of("deep.er.still.a.b.test.com"), 7);
}

TEST(Report, CountsAndRatio) {
    std::vector<TraceRecord> trace = {
        rec(0.00, "aa.bb.test.com", 16, 57, Direction::Query, 6),
        rec(0.01, "aa.bb.test.com", 16, 120, Direction::Response, 0),
        rec(0.02, "cc.dd.test.com", 16, 57, Direction::Query, 6),
        rec(0.03, "cc.dd.test.com", 16, 57, Direction::Query, 6, true), // resend
        rec(0.04, "cc.dd.test.com", 16, 120, Direction::Response, 0),
    };
    RunReport rep = build_report(trace);
    EXPECT_EQ(rep.packet_count, 4u);
    EXPECT_EQ(rep.retransmit_count, 1u);
    EXPECT_EQ(rep.total_payload_bytes, 12u);
    EXPECT_DOUBLE_EQ(rep.bytes_per_packet, 3.0);
    EXPECT_DOUBLE_EQ(rep.duration_s, 0.04);
    EXPECT_EQ(rep.stats.qname_len.count, 5u);
}

TEST(Report, RecomputeFromFormattedTraceIsIdentical) {
    Rng rng(1);
    std::vector<TraceRecord> trace;
    double ts = 0;
    for (int i = 0; i < 120; ++i) {
        ts += 0.015625; // binary-exact step so the text round-trip is lossless
        bool query = i % 2 == 0;
        trace.push_back(rec(ts, "abc.def.test.com", query ? 16 : 16,
                            static_cast<std::uint32_t>(50 + rng() % 80),
                            query ? Direction::Query : Direction::Response,
                            query ? static_cast<std::uint32_t>(rng() % 11) : 0, rng() % 7 == 0));
    }
    RunReport first = build_report(trace);

    std::ostringstream file;
    for (const auto& r : trace) file << format_trace_line(r) << "\n";
    std::istringstream in(file.str());
    std::vector<TraceRecord> reparsed;
    std::string line;
    while (std::getline(in, line)) {
        auto r = parse_trace_line(line);
        ASSERT_TRUE(r.has_value()) << line;
        reparsed.push_back(*r);
    }
    RunReport second = build_report(reparsed);
    EXPECT_EQ(report_to_json(first).dump(), report_to_json(second).dump());
}

TEST(Report, PlainObservationLogParsesWithZeroExtras) {
    auto r = parse_trace_line("0.5 www.example.com A 60 102 query");
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->covert_bytes, 0u);
    EXPECT_FALSE(r->retransmission);
    auto full = parse_trace_line("0.5 www.example.com A 60 102 query 7 1");
    ASSERT_TRUE(full.has_value());
    EXPECT_EQ(full->covert_bytes, 7u);
    EXPECT_TRUE(full->retransmission);
}

TEST(Report, JsonShape) {
    std::vector<TraceRecord> trace = {
        rec(0.0, "aa.bb.test.com", 5, 57, Direction::Query, 4),
        rec(0.5, "aa.bb.test.com", 5, 90, Direction::Response, 0),
    };
    auto j = report_to_json(build_report(trace));
    EXPECT_EQ(j["packet_count"], 2);
    EXPECT_EQ(j["total_payload_bytes"], 4);
    EXPECT_TRUE(j.contains("payload_size"));
    EXPECT_TRUE(j.contains("qname_len"));
    EXPECT_TRUE(j.contains("packet_len"));
    EXPECT_TRUE(j.contains("label_depth"));
    EXPECT_EQ(j["label_depth"]["4"], 1);
}

TEST(Report, EmptyTrace) {
    RunReport rep = build_report({});
    EXPECT_EQ(rep.packet_count, 0u);
    EXPECT_DOUBLE_EQ(rep.bytes_per_packet, 0.0);
    EXPECT_DOUBLE_EQ(rep.duration_s, 0.0);
}

} // namespace
} // namespace dnsburrow
