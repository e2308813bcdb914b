#pragma once

#include <optional>

#include "dnsburrow/codec.hpp"
#include "dnsburrow/crypto.hpp"

namespace dnsburrow {

class KeystreamLengthMismatch : public Error {
public:
    using Error::Error;
};

/// Control bits, one per flag, packed LSB-first into a single byte.
/// Bits 3-7 are always zero on generated packets.
struct Flags {
    bool data_type = false;       // 0 = binary payload, 1 = text payload
    bool false_integrity = false; // set on a tag-failure signal packet
    bool fin = false;             // sender has no more data

    std::uint8_t to_byte() const {
        return static_cast<std::uint8_t>((data_type ? 1 : 0) | (false_integrity ? 2 : 0) |
                                         (fin ? 4 : 0));
    }

    static Flags from_byte(std::uint8_t b) {
        Flags f;
        f.data_type = b & 1;
        f.false_integrity = b & 2;
        f.fin = b & 4;
        return f;
    }

    /// Filler packets carry random bytes instead of user data.
    bool is_filler() const { return fin || false_integrity; }
};

/// One covert-layer unit. `message` holds plaintext before serialization
/// and the still-obfuscated bytes right after parsing; deobfuscation and
/// tag verification are the session layer's job.
struct CovertPacket {
    Flags flags;
    std::uint8_t id = 0;
    std::uint16_t seq = 0;
    bytes message;
    bytes tag;
};

/// Channel-wide constants shared by both endpoints.
struct WireConfig {
    ChannelDomain domain;
    LengthPolicy policy;
    std::size_t tag_len = 4; // leading bytes of the MD5-HMAC digest, 1-16
    TagMode tag_mode = TagMode::HmacMd5;
    std::vector<RecordType> candidate_types = {RecordType::A, RecordType::CNAME, RecordType::TXT};

    std::size_t header_len() const { return 4; }
    std::size_t wire_len(std::size_t message_len) const { return header_len() + message_len + tag_len; }
};

/// flags(1) || id(1) || seq(2, big-endian) || message XOR keystream || tag.
/// The header travels in clear; only the message field is obfuscated.
inline bytes serialize_packet(const CovertPacket& pkt, byte_view ks, const WireConfig& cfg) {
    if (ks.size() != pkt.message.size())
        throw KeystreamLengthMismatch("keystream must cover exactly the message bytes");
    if (pkt.tag.size() != cfg.tag_len)
        throw Error("tag length disagrees with channel configuration");
    bytes wire;
    wire.reserve(cfg.wire_len(pkt.message.size()));
    wire.push_back(pkt.flags.to_byte());
    wire.push_back(pkt.id);
    wire.push_back(static_cast<std::uint8_t>(pkt.seq >> 8));
    wire.push_back(static_cast<std::uint8_t>(pkt.seq & 0xFF));
    bytes obfuscated = obfuscate(pkt.message, ks);
    wire.insert(wire.end(), obfuscated.begin(), obfuscated.end());
    wire.insert(wire.end(), pkt.tag.begin(), pkt.tag.end());
    return wire;
}

/// Structural split of the wire layout. Returns nothing when the payload
/// is too short to be a channel packet; callers drop those silently.
/// The returned message is still obfuscated.
inline std::optional<CovertPacket> parse_packet(byte_view wire, const WireConfig& cfg) {
    if (wire.size() < cfg.header_len() + cfg.tag_len) return std::nullopt;
    CovertPacket pkt;
    pkt.flags = Flags::from_byte(wire[0]);
    pkt.id = wire[1];
    pkt.seq = static_cast<std::uint16_t>(wire[2] << 8 | wire[3]);
    std::size_t msg_len = wire.size() - cfg.header_len() - cfg.tag_len;
    pkt.message.assign(wire.begin() + 4, wire.begin() + 4 + static_cast<std::ptrdiff_t>(msg_len));
    pkt.tag.assign(wire.end() - static_cast<std::ptrdiff_t>(cfg.tag_len), wire.end());
    return pkt;
}

} // namespace dnsburrow
