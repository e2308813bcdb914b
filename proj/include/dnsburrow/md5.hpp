#pragma once

#include <array>
#include <bit>
#include <cstring>

#include "dnsburrow/common.hpp"

namespace dnsburrow {

using md5_digest = std::array<std::uint8_t, 16>;

/// Streaming MD5. The channel leans on MD5 for seed derivation, the
/// keystream chain and the integrity tag, so the primitive is implemented
/// here rather than pulled in as a heavyweight dependency.
class Md5 {
public:
    Md5() { reset(); }

    void reset() {
        state_ = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u};
        total_ = 0;
        buffered_ = 0;
    }

    void update(byte_view data) {
        if (data.empty()) return;
        total_ += data.size();
        std::size_t off = 0;
        if (buffered_ > 0) {
            std::size_t take = std::min<std::size_t>(64 - buffered_, data.size());
            std::memcpy(buf_.data() + buffered_, data.data(), take);
            buffered_ += take;
            off += take;
            if (buffered_ == 64) {
                compress(buf_.data());
                buffered_ = 0;
            }
        }
        while (off + 64 <= data.size()) {
            compress(data.data() + off);
            off += 64;
        }
        if (off < data.size()) {
            std::memcpy(buf_.data(), data.data() + off, data.size() - off);
            buffered_ = data.size() - off;
        }
    }

    md5_digest finish() {
        std::uint64_t bit_len = total_ * 8;
        static constexpr std::uint8_t pad_byte = 0x80;
        update(byte_view(&pad_byte, 1));
        static constexpr std::uint8_t zero = 0x00;
        while (buffered_ != 56) update(byte_view(&zero, 1));
        std::array<std::uint8_t, 8> len_le;
        for (int i = 0; i < 8; ++i) len_le[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(bit_len >> (8 * i));
        update(len_le);
        md5_digest out;
        for (int i = 0; i < 4; ++i) {
            out[static_cast<std::size_t>(4 * i + 0)] = static_cast<std::uint8_t>(state_[static_cast<std::size_t>(i)]);
            out[static_cast<std::size_t>(4 * i + 1)] = static_cast<std::uint8_t>(state_[static_cast<std::size_t>(i)] >> 8);
            out[static_cast<std::size_t>(4 * i + 2)] = static_cast<std::uint8_t>(state_[static_cast<std::size_t>(i)] >> 16);
            out[static_cast<std::size_t>(4 * i + 3)] = static_cast<std::uint8_t>(state_[static_cast<std::size_t>(i)] >> 24);
        }
        reset();
        return out;
    }

private:
    void compress(const std::uint8_t* block) {
        // Sine-derived constants and per-round shifts, RFC 1321 layout.
        static constexpr std::array<std::uint32_t, 64> k = {
            0xd76aa478u, 0xe8c7b756u, 0x242070dbu, 0xc1bdceeeu, 0xf57c0fafu, 0x4787c62au,
            0xa8304613u, 0xfd469501u, 0x698098d8u, 0x8b44f7afu, 0xffff5bb1u, 0x895cd7beu,
            0x6b901122u, 0xfd987193u, 0xa679438eu, 0x49b40821u, 0xf61e2562u, 0xc040b340u,
            0x265e5a51u, 0xe9b6c7aau, 0xd62f105du, 0x02441453u, 0xd8a1e681u, 0xe7d3fbc8u,
            0x21e1cde6u, 0xc33707d6u, 0xf4d50d87u, 0x455a14edu, 0xa9e3e905u, 0xfcefa3f8u,
            0x676f02d9u, 0x8d2a4c8au, 0xfffa3942u, 0x8771f681u, 0x6d9d6122u, 0xfde5380cu,
            0xa4beea44u, 0x4bdecfa9u, 0xf6bb4b60u, 0xbebfbc70u, 0x289b7ec6u, 0xeaa127fau,
            0xd4ef3085u, 0x04881d05u, 0xd9d4d039u, 0xe6db99e5u, 0x1fa27cf8u, 0xc4ac5665u,
            0xf4292244u, 0x432aff97u, 0xab9423a7u, 0xfc93a039u, 0x655b59c3u, 0x8f0ccc92u,
            0xffeff47du, 0x85845dd1u, 0x6fa87e4fu, 0xfe2ce6e0u, 0xa3014314u, 0x4e0811a1u,
            0xf7537e82u, 0xbd3af235u, 0x2ad7d2bbu, 0xeb86d391u};
        static constexpr std::array<std::uint32_t, 64> s = {
            7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22, 7, 12, 17, 22,
            5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20, 5, 9,  14, 20,
            4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23, 4, 11, 16, 23,
            6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21, 6, 10, 15, 21};

        std::array<std::uint32_t, 16> m;
        for (std::size_t i = 0; i < 16; ++i) {
            m[i] = static_cast<std::uint32_t>(block[4 * i]) |
                   static_cast<std::uint32_t>(block[4 * i + 1]) << 8 |
                   static_cast<std::uint32_t>(block[4 * i + 2]) << 16 |
                   static_cast<std::uint32_t>(block[4 * i + 3]) << 24;
        }

        std::uint32_t a = state_[0], b = state_[1], c = state_[2], d = state_[3];
        for (std::uint32_t i = 0; i < 64; ++i) {
            std::uint32_t f;
            std::size_t g;
            if (i < 16) {
                f = (b & c) | (~b & d);
                g = i;
            } else if (i < 32) {
                f = (d & b) | (~d & c);
                g = (5 * i + 1) % 16;
            } else if (i < 48) {
                f = b ^ c ^ d;
                g = (3 * i + 5) % 16;
            } else {
                f = c ^ (b | ~d);
                g = (7 * i) % 16;
            }
            std::uint32_t tmp = d;
            d = c;
            c = b;
            b += std::rotl(a + f + k[i] + m[g], static_cast<int>(s[i]));
            a = tmp;
        }
        state_[0] += a;
        state_[1] += b;
        state_[2] += c;
        state_[3] += d;
    }

    std::array<std::uint32_t, 4> state_{};
    std::array<std::uint8_t, 64> buf_{};
    std::uint64_t total_ = 0;
    std::size_t buffered_ = 0;
};

inline md5_digest md5(byte_view data) {
    Md5 h;
    h.update(data);
    return h.finish();
}

/// RFC 2104 HMAC over MD5 (block size 64).
inline md5_digest hmac_md5(byte_view key, byte_view message) {
    std::array<std::uint8_t, 64> k{};
    if (key.size() > 64) {
        md5_digest kd = md5(key);
        std::memcpy(k.data(), kd.data(), kd.size());
    } else if (!key.empty()) {
        std::memcpy(k.data(), key.data(), key.size());
    }
    std::array<std::uint8_t, 64> ipad, opad;
    for (std::size_t i = 0; i < 64; ++i) {
        ipad[i] = static_cast<std::uint8_t>(k[i] ^ 0x36);
        opad[i] = static_cast<std::uint8_t>(k[i] ^ 0x5c);
    }
    Md5 inner;
    inner.update(ipad);
    inner.update(message);
    md5_digest inner_digest = inner.finish();
    Md5 outer;
    outer.update(opad);
    outer.update(inner_digest);
    return outer.finish();
}

} // namespace dnsburrow
