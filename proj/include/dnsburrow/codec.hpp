#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "dnsburrow/common.hpp"

namespace dnsburrow {

class InvalidCharacter : public Error {
public:
    using Error::Error;
};
class InvalidLength : public Error {
public:
    using Error::Error;
};
class InvalidPadding : public Error {
public:
    using Error::Error;
};
class TooLong : public Error {
public:
    using Error::Error;
};
class InvalidDomain : public Error {
public:
    using Error::Error;
};

/// The registered domain the channel answers for, e.g. "test.com".
/// Everything to the left of it in a query name is data.
struct ChannelDomain {
    std::string suffix;               // normalized to lowercase
    std::vector<std::string> labels;  // suffix split at dots

    /// Validates and normalizes. The suffix must have at least two labels,
    /// each 1-63 LDH characters with no leading/trailing hyphen, and stay
    /// within 64 characters so data labels have room in the 255-char name.
    static ChannelDomain parse(std::string_view s) {
        ChannelDomain d;
        if (s.empty() || s.size() > 64) throw InvalidDomain("channel domain must be 1-64 characters");
        std::string cur;
        auto flush = [&] {
            if (cur.empty()) throw InvalidDomain("empty label in channel domain");
            if (cur.size() > 63) throw InvalidDomain("label longer than 63 characters");
            if (cur.front() == '-' || cur.back() == '-') throw InvalidDomain("label may not start or end with '-'");
            d.labels.push_back(cur);
            cur.clear();
        };
        for (char raw : s) {
            char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
            if (c == '.') {
                flush();
                continue;
            }
            bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
            if (!ok) throw InvalidDomain("channel domain contains non-hostname character");
            cur.push_back(c);
        }
        flush();
        if (d.labels.size() < 2) throw InvalidDomain("channel domain needs at least two labels");
        for (std::size_t i = 0; i < d.labels.size(); ++i) {
            if (i) d.suffix.push_back('.');
            d.suffix += d.labels[i];
        }
        return d;
    }
};

/// Bounds for the covert message field of one packet, in plaintext bytes,
/// plus the minimum number of data labels per query name. Two data labels
/// keep every query at the 4th level or deeper.
struct LengthPolicy {
    std::size_t msg_min = 2;
    std::size_t msg_max = 10;
    std::size_t min_data_labels = 2;
};

namespace detail {
inline constexpr char kBase32Alphabet[] = "abcdefghijklmnopqrstuvwxyz234567";
inline constexpr char kBase64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline int base32_value(char c) {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= '2' && c <= '7') return c - '2' + 26;
    return -1;
}

inline int base64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

/// Longest presentation-form name is 255 characters including dots.
inline constexpr std::size_t kMaxNameChars = 255;
inline constexpr std::size_t kMaxLabelChars = 63;
} // namespace detail

/// Unpadded lowercase Base32 (RFC 4648 alphabet). Padding is dropped
/// because '=' is not a hostname character and the length is recoverable.
inline std::string base32_encode(byte_view data) {
    std::string out;
    out.reserve((data.size() * 8 + 4) / 5);
    std::uint32_t acc = 0;
    int bits = 0;
    for (std::uint8_t b : data) {
        acc = acc << 8 | b;
        bits += 8;
        while (bits >= 5) {
            out.push_back(detail::kBase32Alphabet[(acc >> (bits - 5)) & 0x1F]);
            bits -= 5;
        }
    }
    if (bits > 0) out.push_back(detail::kBase32Alphabet[(acc << (5 - bits)) & 0x1F]);
    return out;
}

/// Case-insensitive inverse of base32_encode. Rejects padding and any
/// length that no byte sequence can produce (mod 8 in {1,3,6}).
inline bytes base32_decode(std::string_view text) {
    std::size_t rem = text.size() % 8;
    if (rem == 1 || rem == 3 || rem == 6) throw InvalidLength("impossible unpadded base32 length");
    bytes out;
    out.reserve(text.size() * 5 / 8);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        int v = detail::base32_value(c);
        if (v < 0) throw InvalidCharacter(std::string("not a base32 character: '") + c + "'");
        acc = acc << 5 | static_cast<std::uint32_t>(v);
        bits += 5;
        if (bits >= 8) {
            out.push_back(static_cast<std::uint8_t>((acc >> (bits - 8)) & 0xFF));
            bits -= 8;
        }
    }
    return out;
}

/// Standard padded Base64 for TXT record payloads.
inline std::string base64_encode(byte_view data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16 |
                          static_cast<std::uint32_t>(data[i + 1]) << 8 | data[i + 2];
        out.push_back(detail::kBase64Alphabet[v >> 18 & 0x3F]);
        out.push_back(detail::kBase64Alphabet[v >> 12 & 0x3F]);
        out.push_back(detail::kBase64Alphabet[v >> 6 & 0x3F]);
        out.push_back(detail::kBase64Alphabet[v & 0x3F]);
    }
    std::size_t left = data.size() - i;
    if (left == 1) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        out.push_back(detail::kBase64Alphabet[v >> 18 & 0x3F]);
        out.push_back(detail::kBase64Alphabet[v >> 12 & 0x3F]);
        out += "==";
    } else if (left == 2) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16 |
                          static_cast<std::uint32_t>(data[i + 1]) << 8;
        out.push_back(detail::kBase64Alphabet[v >> 18 & 0x3F]);
        out.push_back(detail::kBase64Alphabet[v >> 12 & 0x3F]);
        out.push_back(detail::kBase64Alphabet[v >> 6 & 0x3F]);
        out.push_back('=');
    }
    return out;
}

inline bytes base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw InvalidPadding("base64 length must be a multiple of 4");
    bytes out;
    out.reserve(text.size() / 4 * 3);
    std::size_t pad = 0;
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t v = 0;
        int chars = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=') {
                // '=' is only legal in the last group, trailing.
                if (i + 4 != text.size() || (j == 2 && text[i + 3] != '=') || j < 2)
                    throw InvalidPadding("misplaced base64 padding");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) throw InvalidPadding("data after base64 padding");
            int d = detail::base64_value(c);
            if (d < 0) throw InvalidCharacter(std::string("not a base64 character: '") + c + "'");
            v = v << 6 | static_cast<std::uint32_t>(d);
            ++chars;
        }
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        if (chars >= 3) out.push_back(static_cast<std::uint8_t>(v >> 8));
        if (chars == 4) out.push_back(static_cast<std::uint8_t>(v));
    }
    return out;
}

namespace detail {
/// Fewest data labels that can carry `chars` characters.
inline std::size_t min_labels_for(std::size_t chars) {
    return (chars + kMaxLabelChars - 1) / kMaxLabelChars;
}

/// Presentation length of `chars` data characters in `k` labels in front
/// of the suffix: data + separating dots + dot before suffix + suffix.
inline std::size_t name_chars(std::size_t chars, std::size_t k, std::size_t suffix_len) {
    return chars + (k - 1) + 1 + suffix_len;
}
} // namespace detail

/// Splits an encoded string into randomly sized labels. The label count is
/// the smallest one allowed (policy minimum, or more if 63-char labels
/// force it) and the cut points are drawn from the rng, so the joined
/// labels always equal the input while the shape varies run to run.
inline std::vector<std::string> split_labels(std::string_view encoded, Rng& rng,
                                             const LengthPolicy& policy,
                                             const ChannelDomain& domain) {
    if (encoded.empty()) throw InvalidLength("cannot split an empty string");
    std::size_t n = encoded.size();
    std::size_t k = std::max(policy.min_data_labels, detail::min_labels_for(n));
    if (k > n) k = n; // short strings: one character per label
    if (detail::name_chars(n, k, domain.suffix.size()) > detail::kMaxNameChars)
        throw TooLong("encoded data does not fit the 255-character name budget");

    std::vector<std::string> out;
    out.reserve(k);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t remaining_labels = k - i - 1;
        std::size_t remaining_chars = n - pos;
        // Keep every later label satisfiable: 1..63 characters each.
        std::size_t lo = remaining_chars > remaining_labels * detail::kMaxLabelChars
                             ? remaining_chars - remaining_labels * detail::kMaxLabelChars
                             : 1;
        std::size_t hi = std::min(detail::kMaxLabelChars, remaining_chars - remaining_labels);
        std::size_t len = lo == hi ? lo : std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
        out.emplace_back(encoded.substr(pos, len));
        pos += len;
    }
    return out;
}

inline std::string build_qname(const std::vector<std::string>& data_labels, const ChannelDomain& domain) {
    std::string name;
    for (const auto& l : data_labels) {
        if (l.empty() || l.size() > detail::kMaxLabelChars) throw TooLong("data label outside 1-63 characters");
        name += l;
        name.push_back('.');
    }
    name += domain.suffix;
    if (name.size() > detail::kMaxNameChars) throw TooLong("assembled name exceeds 255 characters");
    return name;
}

/// Strips the channel suffix and the label dots, returning the encoded
/// data characters. Empty optional means the name is not under the
/// channel domain and should be ignored.
inline std::optional<std::string> parse_qname(std::string_view qname, const ChannelDomain& domain) {
    auto lower = [](std::string_view v) {
        std::string s(v);
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    std::string name = lower(qname);
    if (!name.empty() && name.back() == '.') name.pop_back();
    const std::string& suffix = domain.suffix;
    if (name.size() <= suffix.size() + 1) return std::nullopt;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
    if (name[name.size() - suffix.size() - 1] != '.') return std::nullopt;
    std::string data = name.substr(0, name.size() - suffix.size() - 1);
    std::string joined;
    joined.reserve(data.size());
    for (char c : data) {
        if (c != '.') joined.push_back(c);
    }
    if (joined.empty()) return std::nullopt;
    return joined;
}

/// Largest whole-byte payload that fits a 255-character name over the
/// domain with unpadded Base32 and 63-character labels. "test.com"
/// yields 151 bytes (243 data characters = 1215 bits).
inline std::size_t max_message_capacity(const ChannelDomain& domain) {
    std::size_t best = 0;
    for (std::size_t n = 1; n <= 256; ++n) {
        std::size_t enc = (n * 8 + 4) / 5;
        std::size_t k = detail::min_labels_for(enc);
        if (detail::name_chars(enc, k, domain.suffix.size()) <= detail::kMaxNameChars)
            best = n;
    }
    return best;
}

/// Uniform draw from [msg_min, msg_max], clamped to what is left to send.
inline std::size_t choose_message_len(std::size_t remaining, const LengthPolicy& policy, Rng& rng) {
    std::size_t u = policy.msg_min == policy.msg_max
                        ? policy.msg_min
                        : std::uniform_int_distribution<std::size_t>(policy.msg_min, policy.msg_max)(rng);
    return std::min(remaining, u);
}

} // namespace dnsburrow
