#pragma once

#include <memory>

#include "dnsburrow/report.hpp"
#include "dnsburrow/session.hpp"
#include "dnsburrow/transport.hpp"

namespace dnsburrow {

class MaxRetriesExceeded : public Error {
public:
    using Error::Error;
};

struct ClientLimits {
    std::chrono::milliseconds rto{2000};
    int max_retries = 5;
};

/// Wraps the covert-layer session table as a DNS request handler: decodes
/// channel queries, routes everything else to plausible stock answers.
inline ServerHandler make_server_handler(ServerSessionTable& table, WireConfig cfg,
                                         std::shared_ptr<Rng> rng) {
    return [&table, cfg = std::move(cfg), rng](const DnsMessage& q,
                                               double now) -> std::optional<DnsMessage> {
        if (q.flags.response) return std::nullopt;
        auto encoded = parse_qname(q.question.qname, cfg.domain);
        if (!encoded) return make_innocuous_response(q, false, *rng);
        std::uint16_t qt = q.question.qtype;
        bool supported = qt == type_code(RecordType::A) || qt == type_code(RecordType::CNAME) ||
                         qt == type_code(RecordType::TXT);
        if (!supported) return make_innocuous_response(q, true, *rng);
        bytes wire;
        try {
            wire = base32_decode(*encoded);
        } catch (const Error&) {
            return make_innocuous_response(q, true, *rng);
        }
        ServerReply reply = table.handle_query(wire, qt, now, *rng);
        try {
            switch (reply.kind) {
            case ServerReply::Kind::Covert:
                return make_response(q, reply.covert, cfg, *rng);
            case ServerReply::Kind::Carrier:
                return make_response(q, reply.carrier, cfg, *rng);
            case ServerReply::Kind::None:
                break;
            }
        } catch (const Error&) {
            // fall through to an innocuous answer
        }
        return make_innocuous_response(q, true, *rng);
    };
}

struct TransferOutcome {
    bytes received;
    std::uint64_t queries_sent = 0;      // datagrams, retransmissions included
    std::uint64_t responses_received = 0;
    std::uint64_t retransmits = 0;       // byte-identical resends
};

/// Drives one client transfer to completion over the given transport,
/// resending on timeout up to the retry budget. Every datagram sent or
/// received is appended to `trace` when provided.
inline TransferOutcome run_client_transfer(Transport& transport, ClientSession& session,
                                           const ClientLimits& limits, Rng& rng,
                                           std::vector<TraceRecord>* trace = nullptr,
                                           std::uint32_t framing = kFramingOverhead) {
    TransferOutcome out;
    int attempts = 0;
    while (!session.finished()) {
        const OutgoingQuery& oq = session.next_query(rng);
        ++out.queries_sent;
        if (oq.retransmission) ++out.retransmits;
        if (trace) {
            bytes qwire = encode_message(oq.msg);
            trace->push_back(TraceRecord{transport.now(), oq.msg.question.qname,
                                         oq.msg.question.qtype,
                                         static_cast<std::uint32_t>(qwire.size()),
                                         static_cast<std::uint32_t>(qwire.size()) + framing,
                                         Direction::Query, oq.data_bytes, oq.retransmission});
        }
        bool was_nack = oq.nack;
        auto resp = transport.query(oq.msg, limits.rto);
        std::size_t recv_before = session.received().size();
        auto action = session.handle_reply(resp);
        if (resp) {
            ++out.responses_received;
            if (trace) {
                bytes rwire = encode_message(*resp);
                std::uint32_t delivered =
                    static_cast<std::uint32_t>(session.received().size() - recv_before);
                // The reply to a NACK is the server re-sending its last
                // packet; repeats triggered by lost responses cannot be
                // told apart from first deliveries and count as unique.
                trace->push_back(TraceRecord{transport.now(), resp->question.qname,
                                             resp->question.qtype,
                                             static_cast<std::uint32_t>(rwire.size()),
                                             static_cast<std::uint32_t>(rwire.size()) + framing,
                                             Direction::Response, delivered, was_nack});
            }
        }
        if (action == ClientSession::Action::Finished) break;
        if (session.pending() == ClientSession::NextKind::Fresh) {
            attempts = 0;
        } else if (++attempts > limits.max_retries) {
            throw MaxRetriesExceeded("no usable reply after " +
                                     std::to_string(limits.max_retries) + " retries");
        }
    }
    out.received = session.received();
    return out;
}

/// Everything one in-process simulation run needs.
struct SimulationSpec {
    SharedSecret secret;
    WireConfig cfg;
    FaultPlan faults;
    std::uint64_t seed = 0;
    std::size_t payload_size = 0;
    bool bidirectional = false;
    double server_timeout_s = 300.0;
    ClientLimits limits;
};

struct SimulationResult {
    RunReport report;
    std::vector<TraceRecord> trace;
    bool upstream_exact = false;
    bool downstream_exact = false;
    std::uint64_t retransmit_datagrams = 0;
};

/// Runs client and server in-process over the simulated resolver. All
/// randomness (payload content, session identity, splits, fault schedule)
/// derives from spec.seed, so results are bit-reproducible.
inline SimulationResult run_simulation(const SimulationSpec& spec) {
    Rng payload_rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
    bytes upstream = random_bytes(spec.payload_size, payload_rng);
    bytes downstream = spec.bidirectional ? random_bytes(spec.payload_size, payload_rng) : bytes{};

    ServerSessionTable table(spec.secret, spec.cfg, spec.server_timeout_s);
    table.set_outbound_payload(downstream);
    auto server_rng = std::make_shared<Rng>(spec.seed + 1);
    FaultPlan plan = spec.faults;
    plan.seed = spec.seed + 2;
    SimulatedResolver resolver(make_server_handler(table, spec.cfg, server_rng), plan,
                               spec.cfg.domain);

    Rng client_rng(spec.seed + 3);
    ClientSession session(spec.secret, spec.cfg, upstream, client_rng);

    SimulationResult result;
    TransferOutcome outcome =
        run_client_transfer(resolver, session, spec.limits, client_rng, &result.trace);
    result.retransmit_datagrams = outcome.retransmits;

    auto server_got = table.session_received(session.id());
    result.upstream_exact = server_got && *server_got == upstream;
    result.downstream_exact = outcome.received == downstream;
    result.report = build_report(result.trace);
    return result;
}

/// The transfer sizes exercised by the stock `simulate` run.
inline constexpr std::array<std::size_t, 12> kDefaultSimulationSizes = {12, 19, 23,  30,  41,  52,
                                                                        69, 76, 87,  93, 100, 112};

} // namespace dnsburrow
