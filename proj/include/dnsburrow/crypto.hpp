#pragma once

#include "dnsburrow/common.hpp"
#include "dnsburrow/md5.hpp"

namespace dnsburrow {

class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// Pre-shared out of band; never serialized onto the wire.
struct SharedSecret {
    bytes data;

    explicit SharedSecret(bytes b) : data(std::move(b)) {
        if (data.empty()) throw Error("shared secret must not be empty");
    }
    static SharedSecret from_string(std::string_view s) { return SharedSecret(to_bytes(s)); }
};

/// Deterministic function of (secret, ISN); identical on both endpoints.
struct KeystreamSeed {
    std::array<std::uint8_t, 16> value{};
};

/// seed = MD5(secret) with the big-endian ISN folded into the first two
/// bytes. Hashing first gives the XOR well-defined widths for secrets of
/// any length.
inline KeystreamSeed derive_seed(const SharedSecret& secret, std::uint16_t isn) {
    KeystreamSeed seed;
    seed.value = md5(secret.data);
    seed.value[0] ^= static_cast<std::uint8_t>(isn >> 8);
    seed.value[1] ^= static_cast<std::uint8_t>(isn & 0xFF);
    return seed;
}

/// Counter-mode digest chain: block j of packet `index` is
/// MD5(seed || index_be32 || j_be32). Distinct indices never share a
/// block input, so the stream never repeats within a session, and a
/// retransmitted packet (same index) reuses exactly the same bytes.
inline bytes keystream(const KeystreamSeed& seed, std::uint16_t index, std::size_t len) {
    bytes out;
    out.reserve(len);
    std::array<std::uint8_t, 24> block_input{};
    std::copy(seed.value.begin(), seed.value.end(), block_input.begin());
    block_input[16] = 0;
    block_input[17] = 0;
    block_input[18] = static_cast<std::uint8_t>(index >> 8);
    block_input[19] = static_cast<std::uint8_t>(index & 0xFF);
    std::uint32_t counter = 0;
    while (out.size() < len) {
        block_input[20] = static_cast<std::uint8_t>(counter >> 24);
        block_input[21] = static_cast<std::uint8_t>(counter >> 16);
        block_input[22] = static_cast<std::uint8_t>(counter >> 8);
        block_input[23] = static_cast<std::uint8_t>(counter);
        md5_digest d = md5(block_input);
        std::size_t take = std::min<std::size_t>(d.size(), len - out.size());
        out.insert(out.end(), d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take));
        ++counter;
    }
    return out;
}

/// Bytewise XOR; applying it twice with the same keystream restores the
/// input.
inline bytes obfuscate(byte_view data, byte_view ks) {
    if (data.size() != ks.size()) throw LengthMismatch("keystream length must match data length");
    bytes out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i] ^ ks[i];
    return out;
}

/// How the integrity tag is computed. HmacMd5 is a genuine RFC 2104 HMAC
/// keyed with MD5(secret || ISN); PlainMd5 is the raw digest
/// MD5(message || ISN || secret), kept for compatibility experiments.
enum class TagMode {
    HmacMd5,
    PlainMd5,
};

/// Tag over the plaintext message (header excluded), bound to the ISN,
/// truncated to tag_len bytes.
inline bytes integrity_tag(byte_view message, std::uint16_t isn, const SharedSecret& secret,
                           std::size_t tag_len, TagMode mode = TagMode::HmacMd5) {
    if (tag_len < 1 || tag_len > 16) throw Error("tag length must be 1-16 bytes");
    std::array<std::uint8_t, 2> isn_be = {static_cast<std::uint8_t>(isn >> 8),
                                          static_cast<std::uint8_t>(isn & 0xFF)};
    md5_digest d;
    if (mode == TagMode::HmacMd5) {
        bytes key_input = secret.data;
        key_input.insert(key_input.end(), isn_be.begin(), isn_be.end());
        md5_digest key = md5(key_input);
        bytes authed(message.begin(), message.end());
        authed.insert(authed.end(), isn_be.begin(), isn_be.end());
        d = hmac_md5(key, authed);
    } else {
        Md5 h;
        h.update(message);
        h.update(isn_be);
        h.update(secret.data);
        d = h.finish();
    }
    return bytes(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(tag_len));
}

/// Constant-shape comparison against a freshly computed tag.
inline bool verify_tag(byte_view message, std::uint16_t isn, const SharedSecret& secret,
                       byte_view received_tag, TagMode mode = TagMode::HmacMd5) {
    if (received_tag.empty() || received_tag.size() > 16) return false;
    bytes expected = integrity_tag(message, isn, secret, received_tag.size(), mode);
    std::uint8_t diff = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) diff |= expected[i] ^ received_tag[i];
    return diff == 0;
}

} // namespace dnsburrow
