#pragma once

#include <array>
#include <optional>
#include <variant>

#include "dnsburrow/packet.hpp"

namespace dnsburrow {

class Truncated : public Error {
public:
    using Error::Error;
};
class BadPointer : public Error {
public:
    using Error::Error;
};
class PayloadTooLarge : public Error {
public:
    using Error::Error;
};

namespace rcode {
inline constexpr std::uint8_t kNoError = 0;
inline constexpr std::uint8_t kFormErr = 1;
inline constexpr std::uint8_t kServFail = 2;
inline constexpr std::uint8_t kNxDomain = 3;
} // namespace rcode

struct HeaderFlags {
    bool response = false;      // QR
    std::uint8_t opcode = 0;    // standard query
    bool authoritative = false; // AA
    bool recursion_desired = true;
    bool recursion_available = false;
    std::uint8_t rcode = rcode::kNoError;
};

struct Question {
    std::string qname;
    std::uint16_t qtype = type_code(RecordType::A);
    std::uint16_t qclass = 1; // IN
};

/// Decoded resource record. Only one of addr/target/txt is meaningful,
/// selected by rtype; records of other types are skipped on decode.
struct ResourceRecord {
    std::string name;
    std::uint16_t rtype = 0;
    std::uint32_t ttl = 0;
    std::array<std::uint8_t, 4> addr{}; // A
    std::string target;                 // CNAME
    bytes txt;                          // TXT, single character-string

    static ResourceRecord a(std::string name, std::array<std::uint8_t, 4> addr, std::uint32_t ttl) {
        ResourceRecord rr;
        rr.name = std::move(name);
        rr.rtype = type_code(RecordType::A);
        rr.addr = addr;
        rr.ttl = ttl;
        return rr;
    }
    static ResourceRecord cname(std::string name, std::string target, std::uint32_t ttl) {
        ResourceRecord rr;
        rr.name = std::move(name);
        rr.rtype = type_code(RecordType::CNAME);
        rr.target = std::move(target);
        rr.ttl = ttl;
        return rr;
    }
    static ResourceRecord txt_record(std::string name, bytes value, std::uint32_t ttl) {
        ResourceRecord rr;
        rr.name = std::move(name);
        rr.rtype = type_code(RecordType::TXT);
        rr.txt = std::move(value);
        rr.ttl = ttl;
        return rr;
    }
};

/// Minimal RFC 1035 message: header, exactly one question, answers.
struct DnsMessage {
    std::uint16_t txid = 0;
    HeaderFlags flags;
    Question question;
    std::vector<ResourceRecord> answers;
};

namespace detail {

inline void put_u16(bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_u32(bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

/// Uncompressed wire form of a dotted name.
inline void put_name(bytes& out, std::string_view name) {
    if (!name.empty() && name.back() == '.') name.remove_suffix(1);
    std::size_t wire_len = name.empty() ? 1 : name.size() + 2;
    if (wire_len > 255) throw PayloadTooLarge("name exceeds 255 octets on the wire");
    std::size_t start = 0;
    while (start <= name.size() && !name.empty()) {
        std::size_t dot = name.find('.', start);
        std::size_t end = dot == std::string_view::npos ? name.size() : dot;
        std::size_t len = end - start;
        if (len == 0 || len > 63) throw PayloadTooLarge("label outside 1-63 octets");
        out.push_back(static_cast<std::uint8_t>(len));
        out.insert(out.end(), name.begin() + static_cast<std::ptrdiff_t>(start),
                   name.begin() + static_cast<std::ptrdiff_t>(end));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    out.push_back(0);
}

class Reader {
public:
    Reader(byte_view data, std::size_t pos) : data_(data), pos_(pos) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) << 24 |
                          static_cast<std::uint32_t>(data_[pos_ + 1]) << 16 |
                          static_cast<std::uint32_t>(data_[pos_ + 2]) << 8 |
                          static_cast<std::uint32_t>(data_[pos_ + 3]);
        pos_ += 4;
        return v;
    }
    byte_view raw(std::size_t n) {
        need(n);
        byte_view v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }

    /// Decompresses a name starting at the current position. Pointers must
    /// point strictly backwards; anything else is treated as hostile.
    std::string name() {
        std::string out;
        std::size_t pos = pos_;
        bool jumped = false;
        std::size_t end_pos = pos_;
        int guard = 0;
        while (true) {
            if (++guard > 128) throw BadPointer("compression pointer chain too long");
            if (pos >= data_.size()) throw Truncated("name runs past the end of the message");
            std::uint8_t len = data_[pos];
            if ((len & 0xC0) == 0xC0) {
                if (pos + 1 >= data_.size()) throw Truncated("dangling compression pointer");
                std::size_t target = static_cast<std::size_t>(len & 0x3F) << 8 | data_[pos + 1];
                if (target >= pos) throw BadPointer("forward or self compression pointer");
                if (!jumped) end_pos = pos + 2;
                jumped = true;
                pos = target;
                continue;
            }
            if ((len & 0xC0) != 0) throw BadPointer("reserved label type");
            if (len == 0) {
                if (!jumped) end_pos = pos + 1;
                break;
            }
            if (pos + 1 + len > data_.size()) throw Truncated("label runs past the end of the message");
            if (!out.empty()) out.push_back('.');
            out.append(reinterpret_cast<const char*>(data_.data() + pos + 1), len);
            pos += 1 + len;
        }
        pos_ = end_pos;
        return out;
    }

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw Truncated("message shorter than its contents claim");
    }
    byte_view data_;
    std::size_t pos_;
};

} // namespace detail

/// Emits the standard wire format with uncompressed names.
inline bytes encode_message(const DnsMessage& msg) {
    bytes out;
    detail::put_u16(out, msg.txid);
    std::uint16_t flags = 0;
    if (msg.flags.response) flags |= 0x8000;
    flags |= static_cast<std::uint16_t>((msg.flags.opcode & 0x0F) << 11);
    if (msg.flags.authoritative) flags |= 0x0400;
    if (msg.flags.recursion_desired) flags |= 0x0100;
    if (msg.flags.recursion_available) flags |= 0x0080;
    flags |= msg.flags.rcode & 0x0F;
    detail::put_u16(out, flags);
    detail::put_u16(out, 1); // QDCOUNT
    detail::put_u16(out, static_cast<std::uint16_t>(msg.answers.size()));
    detail::put_u16(out, 0); // NSCOUNT
    detail::put_u16(out, 0); // ARCOUNT

    detail::put_name(out, msg.question.qname);
    detail::put_u16(out, msg.question.qtype);
    detail::put_u16(out, msg.question.qclass);

    for (const auto& rr : msg.answers) {
        detail::put_name(out, rr.name);
        detail::put_u16(out, rr.rtype);
        detail::put_u16(out, 1); // IN
        detail::put_u32(out, rr.ttl);
        if (rr.rtype == type_code(RecordType::A)) {
            detail::put_u16(out, 4);
            out.insert(out.end(), rr.addr.begin(), rr.addr.end());
        } else if (rr.rtype == type_code(RecordType::CNAME)) {
            bytes name_wire;
            detail::put_name(name_wire, rr.target);
            detail::put_u16(out, static_cast<std::uint16_t>(name_wire.size()));
            out.insert(out.end(), name_wire.begin(), name_wire.end());
        } else if (rr.rtype == type_code(RecordType::TXT)) {
            if (rr.txt.size() > 255) throw PayloadTooLarge("TXT character-string limited to 255 bytes");
            detail::put_u16(out, static_cast<std::uint16_t>(rr.txt.size() + 1));
            out.push_back(static_cast<std::uint8_t>(rr.txt.size()));
            out.insert(out.end(), rr.txt.begin(), rr.txt.end());
        } else {
            throw PayloadTooLarge("cannot encode unsupported record type");
        }
    }
    return out;
}

/// Parses header, the question and the answer section. Compressed names
/// are followed; answer records of unsupported types are skipped.
inline DnsMessage decode_message(byte_view wire) {
    if (wire.size() < 12) throw Truncated("DNS message shorter than its header");
    detail::Reader r(wire, 0);
    DnsMessage msg;
    msg.txid = r.u16();
    std::uint16_t flags = r.u16();
    msg.flags.response = flags & 0x8000;
    msg.flags.opcode = static_cast<std::uint8_t>((flags >> 11) & 0x0F);
    msg.flags.authoritative = flags & 0x0400;
    msg.flags.recursion_desired = flags & 0x0100;
    msg.flags.recursion_available = flags & 0x0080;
    msg.flags.rcode = static_cast<std::uint8_t>(flags & 0x0F);
    std::uint16_t qd = r.u16();
    std::uint16_t an = r.u16();
    r.u16(); // NSCOUNT, ignored
    r.u16(); // ARCOUNT, ignored
    if (qd != 1) throw Truncated("expected exactly one question");

    msg.question.qname = r.name();
    msg.question.qtype = r.u16();
    msg.question.qclass = r.u16();

    for (std::uint16_t i = 0; i < an; ++i) {
        ResourceRecord rr;
        rr.name = r.name();
        rr.rtype = r.u16();
        r.u16(); // class
        rr.ttl = r.u32();
        std::uint16_t rdlen = r.u16();
        std::size_t rdata_end = r.pos() + rdlen;
        if (rdata_end > wire.size()) throw Truncated("rdata runs past the end of the message");
        if (rr.rtype == type_code(RecordType::A)) {
            if (rdlen != 4) throw Truncated("A rdata must be 4 bytes");
            byte_view v = r.raw(4);
            std::copy(v.begin(), v.end(), rr.addr.begin());
            msg.answers.push_back(std::move(rr));
        } else if (rr.rtype == type_code(RecordType::CNAME)) {
            rr.target = r.name();
            if (r.pos() != rdata_end) r.seek(rdata_end);
            msg.answers.push_back(std::move(rr));
        } else if (rr.rtype == type_code(RecordType::TXT)) {
            if (rdlen < 1) throw Truncated("TXT rdata missing its length byte");
            std::uint8_t slen = r.u8();
            if (slen + 1u > rdlen) throw Truncated("TXT character-string longer than rdata");
            byte_view v = r.raw(slen);
            rr.txt.assign(v.begin(), v.end());
            r.seek(rdata_end);
            msg.answers.push_back(std::move(rr));
        } else {
            // Unsupported type: skip the record, not the message.
            r.seek(rdata_end);
        }
    }
    return msg;
}

inline DnsMessage make_query(std::uint16_t txid, std::string qname, RecordType qtype) {
    DnsMessage msg;
    msg.txid = txid;
    msg.flags.response = false;
    msg.flags.recursion_desired = true;
    msg.question.qname = std::move(qname);
    msg.question.qtype = type_code(qtype);
    return msg;
}

/// A-record answers cannot hold a covert packet; the address itself acks
/// or rejects the query. TEST-NET-1 addresses stand in for a deployment's
/// real address pool.
enum class CarrierCode {
    Ack,
    IntegrityFail,
};

inline constexpr std::array<std::uint8_t, 4> kCarrierAckAddr = {192, 0, 2, 1};
inline constexpr std::array<std::uint8_t, 4> kCarrierNackAddr = {192, 0, 2, 2};

/// Downstream payload of a response: either covert packet bytes riding
/// the rdata, or a bare carrier acknowledgement for A queries.
using ResponsePayload = std::variant<bytes, CarrierCode>;

inline std::uint32_t draw_ttl(Rng& rng) {
    static constexpr std::array<std::uint32_t, 4> choices = {60, 300, 600, 3600};
    return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
}

/// Builds the response for a channel query: echoes txid and question,
/// copies RD, sets RA, and embeds the payload according to the query
/// type (CNAME target labels, TXT Base64 string, or an A address).
inline DnsMessage make_response(const DnsMessage& query, const ResponsePayload& payload,
                                const WireConfig& cfg, Rng& rng) {
    DnsMessage resp;
    resp.txid = query.txid;
    resp.flags.response = true;
    resp.flags.recursion_desired = query.flags.recursion_desired;
    resp.flags.recursion_available = true;
    resp.question = query.question;
    std::uint32_t ttl = draw_ttl(rng);

    if (std::holds_alternative<CarrierCode>(payload)) {
        if (query.question.qtype != type_code(RecordType::A))
            throw PayloadTooLarge("carrier-only answers are A records");
        auto addr = std::get<CarrierCode>(payload) == CarrierCode::Ack ? kCarrierAckAddr
                                                                       : kCarrierNackAddr;
        resp.answers.push_back(ResourceRecord::a(query.question.qname, addr, ttl));
        return resp;
    }

    const bytes& covert = std::get<bytes>(payload);
    if (query.question.qtype == type_code(RecordType::CNAME)) {
        auto labels = split_labels(base32_encode(covert), rng, cfg.policy, cfg.domain);
        resp.answers.push_back(
            ResourceRecord::cname(query.question.qname, build_qname(labels, cfg.domain), ttl));
    } else if (query.question.qtype == type_code(RecordType::TXT)) {
        std::string b64 = base64_encode(covert);
        if (b64.size() > 255) throw PayloadTooLarge("payload exceeds one TXT character-string");
        resp.answers.push_back(
            ResourceRecord::txt_record(query.question.qname, to_bytes(b64), ttl));
    } else {
        throw PayloadTooLarge("record type cannot carry a covert payload");
    }
    return resp;
}

/// A plausible answer for queries the covert layer ignores: name under
/// our domain but not a decodable packet, stale duplicates of type A,
/// and similar. Anything outside the channel domain gets NXDOMAIN.
inline DnsMessage make_innocuous_response(const DnsMessage& query, bool our_domain, Rng& rng) {
    DnsMessage resp;
    resp.txid = query.txid;
    resp.flags.response = true;
    resp.flags.recursion_desired = query.flags.recursion_desired;
    resp.flags.recursion_available = true;
    resp.question = query.question;
    if (!our_domain) {
        resp.flags.rcode = rcode::kNxDomain;
        return resp;
    }
    if (query.question.qtype == type_code(RecordType::A)) {
        resp.answers.push_back(
            ResourceRecord::a(query.question.qname, kCarrierAckAddr, draw_ttl(rng)));
    }
    return resp;
}

/// What the client extracted from a response.
struct ExtractedReply {
    enum class Kind {
        Covert,    // covert packet bytes recovered from the rdata
        Ack,       // A answer, delivery confirmed
        Nack,      // A answer, integrity failure signalled
        Unusable,  // present but undecodable; treat like a lost response
    } kind = Kind::Unusable;
    bytes covert;
};

inline ExtractedReply extract_reply(const DnsMessage& resp, const WireConfig& cfg) {
    ExtractedReply out;
    for (const auto& rr : resp.answers) {
        if (rr.rtype != resp.question.qtype) continue;
        try {
            if (rr.rtype == type_code(RecordType::A)) {
                if (rr.addr == kCarrierAckAddr) out.kind = ExtractedReply::Kind::Ack;
                else if (rr.addr == kCarrierNackAddr) out.kind = ExtractedReply::Kind::Nack;
                return out;
            }
            if (rr.rtype == type_code(RecordType::CNAME)) {
                auto encoded = parse_qname(rr.target, cfg.domain);
                if (!encoded) return out;
                out.covert = base32_decode(*encoded);
                out.kind = ExtractedReply::Kind::Covert;
                return out;
            }
            if (rr.rtype == type_code(RecordType::TXT)) {
                out.covert = base64_decode(to_string(rr.txt));
                out.kind = ExtractedReply::Kind::Covert;
                return out;
            }
        } catch (const Error&) {
            return out; // corrupt encoding: unusable
        }
    }
    return out;
}

} // namespace dnsburrow
