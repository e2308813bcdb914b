#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "dnsburrow/adapt.hpp"

namespace dnsburrow {
namespace {

DnsObservation obs(double ts, std::string qname, std::uint16_t qtype, std::uint32_t payload,
                   std::uint32_t packet, Direction dir = Direction::Query) {
    return DnsObservation{ts, std::move(qname), qtype, payload, packet, dir};
}

const std::vector<RecordType> kSupported = {RecordType::A, RecordType::CNAME, RecordType::TXT};

TEST(Ingest, EmptyStream) {
    TrafficProfile p = ingest_observations({});
    EXPECT_EQ(p.observation_count, 0u);
    EXPECT_TRUE(p.type_counts.empty());
    EXPECT_EQ(p.payload_len.count, 0u);
}

TEST(Ingest, StatsAndCounts) {
    std::vector<DnsObservation> v = {
        obs(0.0, "a.example.com", 1, 60, 102),
        obs(1.0, "bb.example.com", 1, 80, 122),
        obs(2.0, "c.example.com", 16, 100, 142),
    };
    TrafficProfile p = ingest_observations(v);
    EXPECT_EQ(p.observation_count, 3u);
    EXPECT_EQ(p.type_counts[1], 2u);
    EXPECT_EQ(p.type_counts[16], 1u);
    EXPECT_EQ(p.payload_len.min, 60u);
    EXPECT_EQ(p.payload_len.max, 100u);
    EXPECT_DOUBLE_EQ(p.payload_len.mean(), 80.0);
    EXPECT_EQ(p.observation_count, p.type_counts[1] + p.type_counts[16]);
}

TEST(Ingest, OrderInsensitive) {
    std::vector<DnsObservation> v;
    Rng rng(50);
    for (int i = 0; i < 200; ++i) {
        v.push_back(obs(i, std::string(1 + rng() % 30, 'x') + ".example.com",
                        static_cast<std::uint16_t>(1 + rng() % 30), 40 + rng() % 200,
                        82 + rng() % 200, rng() % 2 ? Direction::Query : Direction::Response));
    }
    TrafficProfile a = ingest_observations(v);
    std::shuffle(v.begin(), v.end(), rng);
    TrafficProfile b = ingest_observations(v);
    EXPECT_EQ(a.type_counts, b.type_counts);
    EXPECT_EQ(a.qname_len.min, b.qname_len.min);
    EXPECT_EQ(a.qname_len.max, b.qname_len.max);
    EXPECT_DOUBLE_EQ(a.qname_len.mean(), b.qname_len.mean());
    EXPECT_DOUBLE_EQ(a.packet_len.mean(), b.packet_len.mean());
}

TEST(Ingest, LogParsingSkipsMalformed) {
    std::istringstream log(
        "0.5 www.example.com A 60 102 query\n"
        "# comment line\n"
        "\n"
        "0.7 mail.example.com MX 70 112 response\n"
        "not a record at all\n"
        "0.9 x.example.com TXT 90 132 query extra ignored fields\n");
    TrafficProfile p = ingest_log(log);
    EXPECT_EQ(p.observation_count, 3u);
    EXPECT_EQ(p.skipped_records, 1u);
    EXPECT_EQ(p.type_counts[15], 1u);
}

TEST(Ingest, MalformedVariants) {
    EXPECT_FALSE(parse_observation("1.0 name NOPE 10 20 query").has_value());
    EXPECT_FALSE(parse_observation("1.0 name A 10 20 sideways").has_value());
    EXPECT_FALSE(parse_observation("1.0 name A 30 20 query").has_value()); // payload > packet
    EXPECT_FALSE(parse_observation("1.0").has_value());
    EXPECT_TRUE(parse_observation("1.0 name A 10 20 query").has_value());
    EXPECT_TRUE(parse_observation("1.0 name 16 10 20 response").has_value());
}

TEST(Candidates, RankedByFrequency) {
    TrafficProfile p;
    p.type_counts = {{1, 50}, {16, 30}, {5, 20}, {15, 5}};
    auto got = select_candidates(p, kSupported, 3);
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0], RecordType::A);
    EXPECT_EQ(got[1], RecordType::TXT);
    EXPECT_EQ(got[2], RecordType::CNAME);
}

TEST(Candidates, EmptyProfileFailsOpen) {
    TrafficProfile p;
    auto got = select_candidates(p, kSupported, 3);
    EXPECT_EQ(got, kSupported);
}

TEST(Candidates, NoSupportedTypesObservedFailsOpen) {
    TrafficProfile p;
    p.type_counts = {{15, 100}};
    auto got = select_candidates(p, kSupported, 3);
    EXPECT_EQ(got, kSupported);
}

TEST(Candidates, TiesBrokenByAscendingCode) {
    TrafficProfile p;
    p.type_counts = {{16, 10}, {5, 10}, {1, 10}};
    auto got = select_candidates(p, kSupported, 3);
    EXPECT_EQ(got[0], RecordType::A);
    EXPECT_EQ(got[1], RecordType::CNAME);
    EXPECT_EQ(got[2], RecordType::TXT);
}

TEST(Candidates, KLimitsOutput) {
    TrafficProfile p;
    p.type_counts = {{1, 3}, {5, 2}, {16, 1}};
    auto got = select_candidates(p, kSupported, 2);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0], RecordType::A);
    EXPECT_EQ(got[1], RecordType::CNAME);
}

class PolicyDerivation : public ::testing::Test {
protected:
    ChannelDomain domain_ = ChannelDomain::parse("test.com");
    std::size_t capacity_ = max_message_capacity(domain_);

    TrafficProfile profile_with_mean_qname(double mean) {
        TrafficProfile p;
        p.qname_len.add(static_cast<std::uint64_t>(mean));
        return p;
    }

    // Reconstructs the qname length a message of m bytes produces with the
    // minimal two-label split over this domain.
    std::size_t qname_len_of(std::size_t m, std::size_t tag_len) {
        std::size_t wire = 4 + m + tag_len;
        std::size_t chars = (wire * 8 + 4) / 5;
        return chars + 1 + 1 + domain_.suffix.size();
    }
};

TEST_F(PolicyDerivation, EmptyProfileKeepsStockRange) {
    TrafficProfile p;
    LengthPolicy policy = derive_length_policy(p, domain_, 4, capacity_);
    EXPECT_EQ(policy.msg_min, 2u);
    EXPECT_EQ(policy.msg_max, 10u);
}

TEST_F(PolicyDerivation, ShortNameNetworkClampsDown) {
    LengthPolicy policy = derive_length_policy(profile_with_mean_qname(20), domain_, 4, capacity_);
    EXPECT_EQ(policy.msg_min, 2u);
    EXPECT_LE(policy.msg_max, 6u);
    EXPECT_GE(policy.msg_max, policy.msg_min);
}

TEST_F(PolicyDerivation, LongNameNetworkWidensButRespectsCapacity) {
    LengthPolicy policy = derive_length_policy(profile_with_mean_qname(60), domain_, 4, capacity_);
    EXPECT_GT(policy.msg_min, 10u);
    EXPECT_LE(policy.msg_max, capacity_);
    // The derived center reproduces the observed mean within rounding.
    std::size_t center = (policy.msg_min + policy.msg_max) / 2;
    std::size_t rebuilt = qname_len_of(center, 4);
    EXPECT_NEAR(static_cast<double>(rebuilt), 60.0, 1.5);
}

TEST_F(PolicyDerivation, InvariantsHoldForArbitraryProfiles) {
    Rng rng(60);
    for (int i = 0; i < 500; ++i) {
        TrafficProfile p;
        std::size_t n = rng() % 4;
        for (std::size_t j = 0; j < n; ++j) p.qname_len.add(1 + rng() % 300);
        LengthPolicy policy = derive_length_policy(p, domain_, 1 + rng() % 16, capacity_);
        EXPECT_GE(policy.msg_min, 1u);
        EXPECT_LE(policy.msg_min, policy.msg_max);
        EXPECT_LE(policy.msg_max, capacity_);
        EXPECT_GE(policy.min_data_labels, 2u);
    }
}

TEST(PickRecordType, SingleCandidate) {
    Rng rng(1);
    std::vector<RecordType> only_a = {RecordType::A};
    EXPECT_EQ(pick_record_type(only_a, rng), RecordType::A);
}

TEST(PickRecordType, ExclusionForcesRemainder) {
    Rng rng(2);
    std::vector<RecordType> cands = {RecordType::A, RecordType::TXT};
    std::vector<RecordType> excl = {RecordType::A};
    for (int i = 0; i < 32; ++i) EXPECT_EQ(pick_record_type(cands, rng, excl), RecordType::TXT);
}

TEST(PickRecordType, ExcludingEverythingFallsBack) {
    Rng rng(3);
    std::vector<RecordType> cands = {RecordType::A};
    std::vector<RecordType> excl = {RecordType::A};
    EXPECT_EQ(pick_record_type(cands, rng, excl), RecordType::A);
}

TEST(PickRecordType, UniformWithinThreeSigma) {
    Rng rng(4);
    std::vector<RecordType> cands = {RecordType::A, RecordType::CNAME, RecordType::TXT};
    std::map<RecordType, int> hist;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++hist[pick_record_type(cands, rng)];
    // Binomial(n, 1/3): sigma = sqrt(n * 1/3 * 2/3) ~ 47.1
    double expected = n / 3.0;
    double sigma = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
    for (RecordType t : cands) {
        EXPECT_NEAR(static_cast<double>(hist[t]), expected, 3.0 * sigma) << type_code(t);
    }
}

TEST(RecordTypes, ParseAndName) {
    EXPECT_EQ(parse_record_type("A"), 1);
    EXPECT_EQ(parse_record_type("txt"), 16);
    EXPECT_EQ(parse_record_type("Cname"), 5);
    EXPECT_EQ(parse_record_type("28"), 28);
    EXPECT_EQ(parse_record_type("TYPE65"), 65);
    EXPECT_EQ(parse_record_type("bogus"), 0);
    EXPECT_EQ(record_type_name(16), "TXT");
    EXPECT_EQ(record_type_name(999), "TYPE999");
}

} // namespace
} // namespace dnsburrow
