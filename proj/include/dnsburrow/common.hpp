#pragma once

#include <cctype>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dnsburrow {

using bytes = std::vector<std::uint8_t>;
using byte_view = std::span<const std::uint8_t>;

/// All deliberate randomness flows through an injected engine so that
/// simulation runs are reproducible from a single seed.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// DNS record type codes this channel can carry data on, plus the common
/// types seen in observation logs.
enum class RecordType : std::uint16_t {
    A = 1,
    NS = 2,
    CNAME = 5,
    SOA = 6,
    PTR = 12,
    MX = 15,
    TXT = 16,
    AAAA = 28,
    SRV = 33,
};

inline constexpr std::uint16_t type_code(RecordType t) {
    return static_cast<std::uint16_t>(t);
}

inline std::string record_type_name(std::uint16_t code) {
    switch (code) {
    case 1: return "A";
    case 2: return "NS";
    case 5: return "CNAME";
    case 6: return "SOA";
    case 12: return "PTR";
    case 15: return "MX";
    case 16: return "TXT";
    case 28: return "AAAA";
    case 33: return "SRV";
    default: return "TYPE" + std::to_string(code);
    }
}

/// Accepts a mnemonic ("TXT", case-insensitive) or a bare numeric code.
/// Returns 0 for unparseable input (0 is not a valid record type).
inline std::uint16_t parse_record_type(std::string_view s) {
    std::string up;
    up.reserve(s.size());
    for (char c : s) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (up == "A") return 1;
    if (up == "NS") return 2;
    if (up == "CNAME") return 5;
    if (up == "SOA") return 6;
    if (up == "PTR") return 12;
    if (up == "MX") return 15;
    if (up == "TXT") return 16;
    if (up == "AAAA") return 28;
    if (up == "SRV") return 33;
    if (up.rfind("TYPE", 0) == 0) up = up.substr(4);
    std::uint32_t v = 0;
    for (char c : up) {
        if (c < '0' || c > '9') return 0;
        v = v * 10 + static_cast<std::uint32_t>(c - '0');
        if (v > 0xFFFF) return 0;
    }
    return up.empty() ? 0 : static_cast<std::uint16_t>(v);
}

/// Single-pass min/max/mean accumulator. Sums are kept in integers so the
/// result is exactly order-insensitive.
struct MinMaxMean {
    std::uint64_t count = 0;
    std::uint64_t min = 0;
    std::uint64_t max = 0;
    std::uint64_t sum = 0;

    void add(std::uint64_t v) {
        if (count == 0) {
            min = max = v;
        } else {
            if (v < min) min = v;
            if (v > max) max = v;
        }
        sum += v;
        ++count;
    }

    double mean() const { return count == 0 ? 0.0 : static_cast<double>(sum) / static_cast<double>(count); }
};

inline std::string to_hex(byte_view data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

inline bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw Error("from_hex: odd length");
    bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) throw Error("from_hex: bad digit");
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

inline bytes to_bytes(std::string_view s) {
    return bytes(s.begin(), s.end());
}

inline std::string to_string(byte_view b) {
    return std::string(b.begin(), b.end());
}

inline bytes random_bytes(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<int> d(0, 255);
    bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(d(rng));
    return out;
}

/// True when the payload decodes as plausible text: valid UTF-8 and no
/// control bytes other than tab/newline/carriage return.
inline bool looks_like_text(byte_view data) {
    if (data.empty()) return false;
    std::size_t i = 0;
    while (i < data.size()) {
        std::uint8_t b = data[i];
        if (b < 0x20 && b != '\t' && b != '\n' && b != '\r') return false;
        if (b < 0x80) {
            ++i;
            continue;
        }
        std::size_t extra;
        if ((b & 0xE0) == 0xC0 && b >= 0xC2) extra = 1;
        else if ((b & 0xF0) == 0xE0) extra = 2;
        else if ((b & 0xF8) == 0xF0 && b <= 0xF4) extra = 3;
        else return false;
        if (i + extra >= data.size()) return false;
        for (std::size_t j = 1; j <= extra; ++j) {
            if ((data[i + j] & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

} // namespace dnsburrow
