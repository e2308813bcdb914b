#include <gtest/gtest.h>

#include "dnsburrow/packet.hpp"

namespace dnsburrow {
namespace {

WireConfig test_config() {
    WireConfig cfg;
    cfg.domain = ChannelDomain::parse("test.com");
    return cfg;
}

TEST(Flags, BitLayout) {
    EXPECT_EQ((Flags{false, false, false}).to_byte(), 0x00);
    EXPECT_EQ((Flags{true, false, false}).to_byte(), 0x01);
    EXPECT_EQ((Flags{false, true, false}).to_byte(), 0x02);
    EXPECT_EQ((Flags{false, false, true}).to_byte(), 0x04);
    EXPECT_EQ((Flags{true, true, true}).to_byte(), 0x07);
    Flags f = Flags::from_byte(0x05);
    EXPECT_TRUE(f.data_type);
    EXPECT_FALSE(f.false_integrity);
    EXPECT_TRUE(f.fin);
}

TEST(Flags, HighBitsAlwaysZeroOnGenerated) {
    for (int b = 0; b < 8; ++b) {
        Flags f = Flags::from_byte(static_cast<std::uint8_t>(b));
        EXPECT_EQ(f.to_byte() & 0xF8, 0);
        EXPECT_EQ(f.to_byte(), b);
    }
}

TEST(Serialize, HeaderFixture) {
    // fin=1 -> flag byte 0b100; id 0x07; seq 0x0102 big-endian.
    WireConfig cfg = test_config();
    CovertPacket pkt;
    pkt.flags = Flags{false, false, true};
    pkt.id = 0x07;
    pkt.seq = 0x0102;
    pkt.message = {};
    pkt.tag = bytes{0xAA, 0xBB, 0xCC, 0xDD};
    bytes wire = serialize_packet(pkt, {}, cfg);
    ASSERT_EQ(wire.size(), 8u);
    EXPECT_EQ(wire[0], 0x04);
    EXPECT_EQ(wire[1], 0x07);
    EXPECT_EQ(wire[2], 0x01);
    EXPECT_EQ(wire[3], 0x02);
}

TEST(Serialize, IdentityKeystreamLeavesMessage) {
    WireConfig cfg = test_config();
    CovertPacket pkt;
    pkt.id = 1;
    pkt.seq = 10;
    pkt.message = bytes{0x41};
    pkt.tag = bytes(4, 0);
    bytes wire = serialize_packet(pkt, bytes{0x00}, cfg);
    EXPECT_EQ(wire[4], 0x41);
}

TEST(Serialize, LengthArithmetic) {
    WireConfig cfg = test_config();
    Rng rng(2);
    CovertPacket pkt;
    pkt.id = 9;
    pkt.seq = 500;
    pkt.message = random_bytes(10, rng);
    pkt.tag = bytes(cfg.tag_len, 0x11);
    bytes ks = random_bytes(10, rng);
    EXPECT_EQ(serialize_packet(pkt, ks, cfg).size(), 18u); // 4 + 10 + 4
}

TEST(Serialize, KeystreamMismatchRejected) {
    WireConfig cfg = test_config();
    CovertPacket pkt;
    pkt.message = bytes{1, 2, 3};
    pkt.tag = bytes(4, 0);
    EXPECT_THROW(serialize_packet(pkt, bytes{1, 2}, cfg), KeystreamLengthMismatch);
}

TEST(Parse, InverseOfSerialize) {
    WireConfig cfg = test_config();
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        CovertPacket pkt;
        pkt.flags = Flags{bool(rng() & 1), bool(rng() & 1), bool(rng() & 1)};
        pkt.id = static_cast<std::uint8_t>(rng());
        pkt.seq = static_cast<std::uint16_t>(rng());
        std::size_t n = std::uniform_int_distribution<std::size_t>(0, 20)(rng);
        pkt.message = random_bytes(n, rng);
        pkt.tag = random_bytes(cfg.tag_len, rng);
        bytes ks = random_bytes(n, rng);
        bytes wire = serialize_packet(pkt, ks, cfg);
        auto back = parse_packet(wire, cfg);
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(back->flags.to_byte(), pkt.flags.to_byte());
        EXPECT_EQ(back->id, pkt.id);
        EXPECT_EQ(back->seq, pkt.seq);
        EXPECT_EQ(back->message.size(), pkt.message.size());
        EXPECT_EQ(back->message, obfuscate(pkt.message, ks)); // parse is structural
        EXPECT_EQ(back->tag, pkt.tag);
    }
}

TEST(Parse, TooShortDropped) {
    WireConfig cfg = test_config(); // needs >= 8 bytes with tag_len 4
    EXPECT_FALSE(parse_packet(bytes{1, 2, 3, 4, 5}, cfg).has_value());
    EXPECT_FALSE(parse_packet(bytes{}, cfg).has_value());
}

TEST(Parse, ZeroLengthMessageBoundary) {
    WireConfig cfg = test_config();
    bytes wire = {0x00, 0x01, 0x00, 0x05, 0xDE, 0xAD, 0xBE, 0xEF}; // exactly 4 + tag_len
    auto pkt = parse_packet(wire, cfg);
    ASSERT_TRUE(pkt.has_value());
    EXPECT_TRUE(pkt->message.empty());
    EXPECT_EQ(pkt->tag, (bytes{0xDE, 0xAD, 0xBE, 0xEF}));
}

TEST(WireLength, DefaultsKeepQnamesUnderDetectionThreshold) {
    // msg 2-10 bytes, tag 4: wire 10-18 bytes, 16-29 base32 characters,
    // full qnames 26-48 characters over test.com.
    WireConfig cfg = test_config();
    for (std::size_t msg = cfg.policy.msg_min; msg <= cfg.policy.msg_max; ++msg) {
        std::size_t wire = cfg.wire_len(msg);
        EXPECT_GE(wire, 10u);
        EXPECT_LE(wire, 18u);
        std::size_t chars = (wire * 8 + 4) / 5;
        EXPECT_GE(chars, 16u);
        EXPECT_LE(chars, 29u);
        std::size_t qname_min = chars + 1 + 1 + 8; // 2 labels
        EXPECT_LE(qname_min, 48u);
    }
}

} // namespace
} // namespace dnsburrow
