#pragma once

#include <functional>
#include <mutex>

#include "dnsburrow/adapt.hpp"
#include "dnsburrow/dnswire.hpp"

namespace dnsburrow {

class Terminated : public Error {
public:
    using Error::Error;
};

/// RFC 1982 serial comparison with a 2^15 window, so sequence numbers
/// survive wrapping at 2^16.
inline bool seq_greater(std::uint16_t a, std::uint16_t b) {
    return a != b && static_cast<std::uint16_t>(a - b) < 0x8000;
}

enum class SeqVerdict {
    Accept,           // fresh packet, process it
    Duplicate,        // equal or older than what we already consumed
    RetransmitSignal, // peer echoed the last seq we sent: resend that packet
};

/// Discard rule plus its one exception: a packet numbered like the last
/// packet this side itself sent asks for a retransmission of it.
/// `last_sent` must be the seq of the last regular (non-signal) packet.
inline SeqVerdict seq_accept(std::uint16_t last_seq_received, std::uint16_t last_seq_sent,
                             std::uint16_t incoming_seq) {
    if (incoming_seq == last_seq_sent) return SeqVerdict::RetransmitSignal;
    if (seq_greater(incoming_seq, last_seq_received)) return SeqVerdict::Accept;
    return SeqVerdict::Duplicate;
}

/// The connection-scoped secret material both state machines share.
struct ChannelKeys {
    SharedSecret secret;
    WireConfig cfg;
};

// ---------------------------------------------------------------------------
// Client side
// ---------------------------------------------------------------------------

/// One outbound DNS query plus the covert metadata the driver needs for
/// accounting. Retransmissions reuse the cached instance byte for byte.
struct OutgoingQuery {
    DnsMessage msg;
    std::uint16_t seq = 0;
    bool fin = false;
    bool nack = false;
    bool retransmission = false;
    std::uint32_t data_bytes = 0; // user payload bytes carried (0 for filler)
    bool expects_covert_reply = false;
};

/// Client connection state machine: chunked upstream transfer in query
/// names, downstream reassembly from answer rdata, NACK/resend recovery,
/// and Fin/Fin termination. Single-owner, one outstanding query at a time.
class ClientSession {
public:
    /// One of three things the session wants transmitted next.
    enum class NextKind { Fresh, Resend, Nack };

    /// What the driver should do after a reply was processed.
    enum class Action { Continue, Finished };

    ClientSession(SharedSecret secret, WireConfig cfg, bytes payload, Rng& rng)
        : secret_(std::move(secret)), cfg_(std::move(cfg)), send_(std::move(payload)) {
        id_ = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 255)(rng));
        isn_ = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(0, 0xFFFF)(rng));
        next_seq_ = isn_;
        last_recv_ = static_cast<std::uint16_t>(isn_ - 1);
        last_data_seq_ = static_cast<std::uint16_t>(isn_ - 1);
        seed_ = derive_seed(secret_, isn_);
        data_type_ = looks_like_text(send_);
    }

    std::uint8_t id() const { return id_; }
    std::uint16_t isn() const { return isn_; }
    bool data_type() const { return data_type_; }
    bool finished() const { return finished_; }
    bool peer_fin() const { return peer_fin_; }
    bool own_fin() const { return cursor_ >= send_.size(); }
    const bytes& received() const { return recv_; }
    NextKind pending() const { return next_; }

    /// Builds (or re-issues) the next query. Fresh queries consume one
    /// sequence number; resends are byte-identical to the original so the
    /// wire never shows two different packets with the same seq.
    const OutgoingQuery& next_query(Rng& rng) {
        if (finished_) throw Terminated("transfer already finished");
        switch (next_) {
        case NextKind::Resend:
            last_.retransmission = true;
            break;
        case NextKind::Nack:
            build_nack(rng);
            break;
        case NextKind::Fresh:
            build_fresh(rng);
            break;
        }
        next_ = NextKind::Resend; // until a reply says otherwise
        return last_;
    }

    /// Feeds the transport's outcome for the outstanding query: a DNS
    /// response, or nothing on timeout. Decides whether to progress,
    /// resend, or signal corruption, and detects termination.
    Action handle_reply(const std::optional<DnsMessage>& resp) {
        if (finished_) return Action::Finished;
        if (!resp) {
            next_ = NextKind::Resend;
            return Action::Continue;
        }
        ExtractedReply got = extract_reply(*resp, cfg_);
        switch (got.kind) {
        case ExtractedReply::Kind::Unusable:
            next_ = NextKind::Resend;
            return Action::Continue;
        case ExtractedReply::Kind::Ack:
            if (last_.nack) { // an ack cannot answer a NACK; treat as noise
                next_ = NextKind::Resend;
                return Action::Continue;
            }
            // Carrier-only answer: the query is confirmed but no covert
            // packet rode back, so the response consumed no seq.
            if (last_.fin) fin_acked_ = true;
            next_seq_ = static_cast<std::uint16_t>(last_.seq + 1);
            next_ = NextKind::Fresh;
            return check_finished();
        case ExtractedReply::Kind::Nack:
            next_ = NextKind::Resend;
            return Action::Continue;
        case ExtractedReply::Kind::Covert:
            break;
        }
        return handle_covert(got.covert);
    }

    /// Statistics hooks for the driver.
    std::uint64_t data_packets_built() const { return data_packets_built_; }

private:
    Action handle_covert(const bytes& wire) {
        auto parsed = parse_packet(wire, cfg_);
        if (!parsed || parsed->id != id_) {
            next_ = NextKind::Resend;
            return Action::Continue;
        }
        CovertPacket& pkt = *parsed;
        if (pkt.flags.false_integrity) {
            // Server could not verify our last packet: resend it as-is.
            next_ = NextKind::Resend;
            return Action::Continue;
        }
        switch (seq_accept(last_recv_, last_data_seq_, pkt.seq)) {
        case SeqVerdict::RetransmitSignal:
        case SeqVerdict::Duplicate:
            next_ = NextKind::Resend;
            return Action::Continue;
        case SeqVerdict::Accept:
            break;
        }
        std::uint16_t index = static_cast<std::uint16_t>(pkt.seq - isn_);
        bytes plain = obfuscate(pkt.message, keystream(seed_, index, pkt.message.size()));
        if (!pkt.flags.is_filler() &&
            !verify_tag(plain, isn_, secret_, pkt.tag, cfg_.tag_mode)) {
            // Corrupted response: ask for a retransmission under the
            // corrupted packet's own sequence number.
            nack_seq_ = pkt.seq;
            next_ = NextKind::Nack;
            return Action::Continue;
        }
        last_recv_ = pkt.seq;
        next_seq_ = static_cast<std::uint16_t>(pkt.seq + 1);
        if (pkt.flags.fin) {
            peer_fin_ = true;
            peer_data_pending_ = false;
        } else {
            recv_.insert(recv_.end(), plain.begin(), plain.end());
            peer_data_pending_ = true;
        }
        // A NACK's fin bit is never processed by the peer (retransmit
        // signals bypass content handling), so it cannot count as acked.
        if (last_.fin && !last_.nack) fin_acked_ = true;
        next_ = NextKind::Fresh;
        return check_finished();
    }

    Action check_finished() {
        if (own_fin() && fin_acked_ && peer_fin_) {
            finished_ = true;
            return Action::Finished;
        }
        return Action::Continue;
    }

    void build_fresh(Rng& rng) {
        CovertPacket pkt;
        pkt.id = id_;
        pkt.seq = next_seq_;
        std::size_t remaining = send_.size() - cursor_;
        std::uint32_t data_bytes = 0;
        if (remaining > 0) {
            std::size_t len = choose_message_len(remaining, cfg_.policy, rng);
            pkt.message.assign(send_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               send_.begin() + static_cast<std::ptrdiff_t>(cursor_ + len));
            cursor_ += len;
            pkt.flags = Flags{data_type_, false, false};
            data_bytes = static_cast<std::uint32_t>(len);
            ++data_packets_built_;
        } else {
            filler_message(pkt, rng);
            pkt.flags = Flags{data_type_, false, true};
        }
        last_data_seq_ = pkt.seq;
        next_seq_ = static_cast<std::uint16_t>(next_seq_ + 1);
        finish_build(pkt, data_bytes, false, rng);
    }

    void build_nack(Rng& rng) {
        CovertPacket pkt;
        pkt.id = id_;
        pkt.seq = nack_seq_;
        filler_message(pkt, rng);
        pkt.flags = Flags{data_type_, true, own_fin()};
        finish_build(pkt, 0, true, rng);
    }

    void filler_message(CovertPacket& pkt, Rng& rng) {
        std::size_t len = cfg_.policy.msg_min == cfg_.policy.msg_max
                              ? cfg_.policy.msg_min
                              : std::uniform_int_distribution<std::size_t>(cfg_.policy.msg_min,
                                                                           cfg_.policy.msg_max)(rng);
        pkt.message = random_bytes(len, rng);
    }

    void finish_build(CovertPacket& pkt, std::uint32_t data_bytes, bool nack, Rng& rng) {
        pkt.tag = integrity_tag(pkt.message, isn_, secret_, cfg_.tag_len, cfg_.tag_mode);
        std::uint16_t index = static_cast<std::uint16_t>(pkt.seq - isn_);
        bytes wire = serialize_packet(pkt, keystream(seed_, index, pkt.message.size()), cfg_);
        auto labels = split_labels(base32_encode(wire), rng, cfg_.policy, cfg_.domain);
        std::string qname = build_qname(labels, cfg_.domain);

        // A answers cannot carry covert data, so avoid A whenever this
        // transaction must bring covert bytes back: a NACK retransmission
        // or pending server data.
        bool needs_covert_reply = nack || peer_data_pending_;
        std::array<RecordType, 1> exclude_a = {RecordType::A};
        RecordType rtype = pick_record_type(
            cfg_.candidate_types, rng,
            needs_covert_reply ? std::span<const RecordType>(exclude_a) : std::span<const RecordType>());

        OutgoingQuery out;
        out.msg = make_query(static_cast<std::uint16_t>(
                                 std::uniform_int_distribution<int>(0, 0xFFFF)(rng)),
                             qname, rtype);
        out.seq = pkt.seq;
        out.fin = pkt.flags.fin;
        out.nack = nack;
        out.retransmission = false;
        out.data_bytes = data_bytes;
        out.expects_covert_reply = rtype != RecordType::A;
        last_ = std::move(out);
    }

    SharedSecret secret_;
    WireConfig cfg_;
    bytes send_;
    bytes recv_;
    std::size_t cursor_ = 0;

    std::uint8_t id_ = 0;
    std::uint16_t isn_ = 0;
    std::uint16_t next_seq_ = 0;
    std::uint16_t last_recv_ = 0;     // seq of last accepted covert reply
    std::uint16_t last_data_seq_ = 0; // seq of last regular query sent
    std::uint16_t nack_seq_ = 0;
    KeystreamSeed seed_;
    bool data_type_ = false;

    bool peer_fin_ = false;
    bool peer_data_pending_ = false;
    bool fin_acked_ = false;
    bool finished_ = false;

    NextKind next_ = NextKind::Fresh;
    OutgoingQuery last_;
    std::uint64_t data_packets_built_ = 0;
};

// ---------------------------------------------------------------------------
// Server side
// ---------------------------------------------------------------------------

/// What the server wants sent back at the covert layer.
struct ServerReply {
    enum class Kind {
        Covert,  // covert packet bytes to embed in the rdata
        Carrier, // A answer carrying only an ack/nack address
        None,    // ignore at the covert layer; answer innocuously
    } kind = Kind::None;
    bytes covert;
    CarrierCode carrier = CarrierCode::Ack;

    static ServerReply covert_reply(bytes wire) {
        return ServerReply{Kind::Covert, std::move(wire), CarrierCode::Ack};
    }
    static ServerReply carrier_reply(CarrierCode c) { return ServerReply{Kind::Carrier, {}, c}; }
    static ServerReply none() { return ServerReply{}; }
};

/// Called once per completed inbound transfer (both fins seen).
using CompletionSink = std::function<void(std::uint8_t id, const bytes& data, double now)>;

/// Per-client connection table keyed by the one-byte client id. The first
/// packet of an unknown id establishes the session and its seq defines
/// the ISN; idle sessions expire after `timeout_s` and a returning id is
/// then treated as a brand-new connection.
class ServerSessionTable {
public:
    ServerSessionTable(SharedSecret secret, WireConfig cfg, double timeout_s = 300.0)
        : secret_(std::move(secret)), cfg_(std::move(cfg)), timeout_s_(timeout_s) {}

    /// Payload handed to every new session for the downstream direction.
    void set_outbound_payload(bytes payload) {
        std::lock_guard lock(mutex_);
        outbound_ = std::move(payload);
    }

    void set_completion_sink(CompletionSink sink) {
        std::lock_guard lock(mutex_);
        on_complete_ = std::move(sink);
    }

    /// Covert-layer handling of one decoded query. Thread-safe; per-id
    /// state is serialized under the table lock.
    ServerReply handle_query(byte_view wire, std::uint16_t qtype, double now, Rng& rng) {
        std::lock_guard lock(mutex_);
        auto parsed = parse_packet(wire, cfg_);
        if (!parsed) return ServerReply::none();
        CovertPacket& pkt = *parsed;

        auto [it, created] = sessions_.try_emplace(pkt.id);
        Session& s = it->second;
        if (created) {
            s.isn = pkt.seq;
            s.last_seq_seen = static_cast<std::uint16_t>(pkt.seq - 1);
            s.seed = derive_seed(secret_, s.isn);
            s.send = outbound_;
            s.data_type = looks_like_text(s.send);
        }
        s.last_activity = now;

        SeqVerdict verdict =
            s.have_resp ? seq_accept(s.last_seq_seen, s.last_resp_seq, pkt.seq)
                        : (seq_greater(pkt.seq, s.last_seq_seen) ? SeqVerdict::Accept
                                                                 : SeqVerdict::Duplicate);
        if (verdict != SeqVerdict::Accept) {
            // Retransmit signal: repeat the previous reply byte-for-byte.
            // Duplicates get the same treatment so reissued queries stay
            // indistinguishable from resolver retries.
            return repeat_last(s, qtype);
        }

        std::uint16_t index = static_cast<std::uint16_t>(pkt.seq - s.isn);
        bytes plain = obfuscate(pkt.message, keystream(s.seed, index, pkt.message.size()));
        if (!pkt.flags.is_filler() &&
            !verify_tag(plain, s.isn, secret_, pkt.tag, cfg_.tag_mode)) {
            // Integrity failure: answer under the corrupted packet's own
            // seq so the client resends it. State is left untouched.
            if (qtype == type_code(RecordType::A))
                return ServerReply::carrier_reply(CarrierCode::IntegrityFail);
            return ServerReply::covert_reply(build_packet(s, pkt.id, pkt.seq, true, rng));
        }

        s.last_seq_seen = pkt.seq;
        if (pkt.flags.fin) s.peer_fin = true;
        if (!pkt.flags.is_filler()) s.recv.insert(s.recv.end(), plain.begin(), plain.end());

        ServerReply reply;
        if (qtype == type_code(RecordType::A)) {
            // Carrier-only: the ack rides the answer address and the seq
            // space is not consumed; any pending data waits for a query
            // type that can carry it.
            s.last_reply_covert = false;
            s.last_carrier = CarrierCode::Ack;
            reply = ServerReply::carrier_reply(CarrierCode::Ack);
        } else {
            std::uint16_t resp_seq = static_cast<std::uint16_t>(pkt.seq + 1);
            bytes covert = build_packet(s, pkt.id, resp_seq, false, rng);
            s.last_resp_seq = resp_seq;
            s.have_resp = true;
            s.last_reply_covert = true;
            s.last_covert = covert;
            reply = ServerReply::covert_reply(std::move(covert));
        }
        maybe_complete(s, pkt.id, now);
        return reply;
    }

    /// Removes every session idle for strictly longer than the timeout.
    std::vector<std::uint8_t> expire_sessions(double now) {
        std::lock_guard lock(mutex_);
        std::vector<std::uint8_t> removed;
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (now - it->second.last_activity > timeout_s_) {
                removed.push_back(it->first);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
        return removed;
    }

    std::size_t session_count() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

    std::optional<std::uint16_t> session_isn(std::uint8_t id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return std::nullopt;
        return it->second.isn;
    }

    std::optional<bytes> session_received(std::uint8_t id) const {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) return std::nullopt;
        return it->second.recv;
    }

    double timeout_seconds() const { return timeout_s_; }

private:
    struct Session {
        std::uint16_t isn = 0;
        std::uint16_t last_seq_seen = 0;
        std::uint16_t last_resp_seq = 0;
        bool have_resp = false;
        bytes recv;
        bytes send;
        std::size_t cursor = 0;
        bool data_type = false;
        bool peer_fin = false;
        bool completed = false;
        double last_activity = 0;
        KeystreamSeed seed;
        bool last_reply_covert = false;
        bytes last_covert;
        CarrierCode last_carrier = CarrierCode::Ack;
    };

    ServerReply repeat_last(Session& s, std::uint16_t qtype) {
        if (qtype == type_code(RecordType::A)) return ServerReply::carrier_reply(s.last_carrier);
        if (s.last_reply_covert) return ServerReply::covert_reply(s.last_covert);
        return ServerReply::none();
    }

    /// Serializes the next covert reply: a data chunk while payload
    /// remains, otherwise policy-length filler with Fin set. NACK replies
    /// reuse the offending seq and never touch the send cursor.
    bytes build_packet(Session& s, std::uint8_t id, std::uint16_t seq, bool nack, Rng& rng) {
        CovertPacket pkt;
        pkt.id = id;
        pkt.seq = seq;
        std::size_t remaining = s.send.size() - s.cursor;
        if (!nack && remaining > 0) {
            std::size_t len = choose_message_len(remaining, cfg_.policy, rng);
            pkt.message.assign(s.send.begin() + static_cast<std::ptrdiff_t>(s.cursor),
                               s.send.begin() + static_cast<std::ptrdiff_t>(s.cursor + len));
            s.cursor += len;
            pkt.flags = Flags{s.data_type, false, false};
        } else {
            std::size_t len = cfg_.policy.msg_min == cfg_.policy.msg_max
                                  ? cfg_.policy.msg_min
                                  : std::uniform_int_distribution<std::size_t>(
                                        cfg_.policy.msg_min, cfg_.policy.msg_max)(rng);
            pkt.message = random_bytes(len, rng);
            pkt.flags = Flags{s.data_type, nack, s.cursor >= s.send.size()};
        }
        pkt.tag = integrity_tag(pkt.message, s.isn, secret_, cfg_.tag_len, cfg_.tag_mode);
        std::uint16_t index = static_cast<std::uint16_t>(seq - s.isn);
        return serialize_packet(pkt, keystream(s.seed, index, pkt.message.size()), cfg_);
    }

    void maybe_complete(Session& s, std::uint8_t id, double now) {
        if (!s.completed && s.peer_fin && s.cursor >= s.send.size()) {
            s.completed = true;
            if (on_complete_) on_complete_(id, s.recv, now);
        }
    }

    SharedSecret secret_;
    WireConfig cfg_;
    double timeout_s_;
    bytes outbound_;
    CompletionSink on_complete_;
    std::map<std::uint8_t, Session> sessions_;
    mutable std::mutex mutex_;
};

} // namespace dnsburrow
