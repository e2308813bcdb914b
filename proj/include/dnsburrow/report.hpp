#pragma once

#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "dnsburrow/adapt.hpp"

namespace dnsburrow {

/// One transmitted or received datagram as the channel saw it. Extends a
/// plain observation with the covert payload bytes it carried and whether
/// it was a retransmission, which lets reports be recomputed from a saved
/// trace alone.
struct TraceRecord {
    double ts = 0;
    std::string qname;
    std::uint16_t qtype = 0;
    std::uint32_t payload_len = 0; // DNS message bytes (UDP payload)
    std::uint32_t packet_len = 0;  // payload + link/IP/UDP framing
    Direction direction = Direction::Query;
    std::uint32_t covert_bytes = 0; // user payload carried, 0 for filler
    bool retransmission = false;

    DnsObservation to_observation() const {
        return DnsObservation{ts, qname, qtype, payload_len, packet_len, direction};
    }
};

/// Ethernet + IPv4 + UDP framing; reconciles observed payload sizes with
/// on-the-wire packet sizes (61-byte payload <-> 103-byte packet).
inline constexpr std::uint32_t kFramingOverhead = 42;

inline std::string format_trace_line(const TraceRecord& r) {
    std::ostringstream out;
    out << std::setprecision(6) << std::fixed << r.ts << ' ' << r.qname << ' '
        << record_type_name(r.qtype) << ' ' << r.payload_len << ' ' << r.packet_len << ' '
        << (r.direction == Direction::Query ? "query" : "response") << ' ' << r.covert_bytes << ' '
        << (r.retransmission ? 1 : 0);
    return out.str();
}

/// Reads a trace line; the covert and retransmission columns are optional
/// so plain observation logs parse too (with zeros).
inline std::optional<TraceRecord> parse_trace_line(std::string_view line) {
    auto obs = parse_observation(line);
    if (!obs) return std::nullopt;
    TraceRecord r;
    r.ts = obs->ts;
    r.qname = obs->qname;
    r.qtype = obs->qtype;
    r.payload_len = obs->payload_len;
    r.packet_len = obs->packet_len;
    r.direction = obs->direction;
    std::istringstream in{std::string(line)};
    std::string skip;
    for (int i = 0; i < 6; ++i) in >> skip;
    std::uint32_t covert = 0;
    int retrans = 0;
    if (in >> covert) r.covert_bytes = covert;
    if (in >> retrans) r.retransmission = retrans != 0;
    return r;
}

/// Aggregate length statistics plus the label-depth histogram, mirroring
/// what a capture-side observer would tabulate.
struct StatsBundle {
    MinMaxMean payload_size;
    MinMaxMean qname_len;
    MinMaxMean packet_len;
    std::map<int, std::uint64_t> label_depth; // depth -> query count
};

inline int label_depth_of(std::string_view qname) {
    if (qname.empty()) return 0;
    if (qname.back() == '.') qname.remove_suffix(1);
    int depth = 1;
    for (char c : qname) {
        if (c == '.') ++depth;
    }
    return depth;
}

/// Single pass over observations. Payload size is the DNS message length;
/// packet length defaults to payload + 42 bytes of framing when the log
/// does not carry it; qname length counts characters including dots, for
/// every record that has a name; label depth is tallied for queries only.
inline StatsBundle compute_stats(std::span<const DnsObservation> obs,
                                 std::uint32_t framing = kFramingOverhead) {
    StatsBundle s;
    for (const auto& o : obs) {
        s.payload_size.add(o.payload_len);
        s.packet_len.add(o.packet_len != 0 ? o.packet_len : o.payload_len + framing);
        if (!o.qname.empty()) s.qname_len.add(o.qname.size());
        if (o.direction == Direction::Query) ++s.label_depth[label_depth_of(o.qname)];
    }
    return s;
}

/// Per-transfer metrics. bytes_per_packet divides the covert payload
/// delivered by the unique datagrams exchanged; retransmissions are
/// reported separately so fault runs stay comparable to clean ones.
struct RunReport {
    std::uint64_t total_payload_bytes = 0;
    std::uint64_t packet_count = 0; // unique queries + responses
    double bytes_per_packet = 0;
    StatsBundle stats;
    std::uint64_t retransmit_count = 0;
    double duration_s = 0;
};

inline RunReport build_report(std::span<const TraceRecord> trace,
                              std::uint32_t framing = kFramingOverhead) {
    RunReport rep;
    std::vector<DnsObservation> obs;
    obs.reserve(trace.size());
    double t_min = 0, t_max = 0;
    bool first = true;
    for (const auto& r : trace) {
        obs.push_back(r.to_observation());
        if (r.retransmission) {
            ++rep.retransmit_count;
        } else {
            ++rep.packet_count;
            rep.total_payload_bytes += r.covert_bytes;
        }
        if (first) {
            t_min = t_max = r.ts;
            first = false;
        } else {
            t_min = std::min(t_min, r.ts);
            t_max = std::max(t_max, r.ts);
        }
    }
    rep.stats = compute_stats(obs, framing);
    rep.duration_s = t_max - t_min;
    if (rep.packet_count > 0)
        rep.bytes_per_packet =
            static_cast<double>(rep.total_payload_bytes) / static_cast<double>(rep.packet_count);
    return rep;
}

inline nlohmann::json stats_to_json(const MinMaxMean& m) {
    return {{"min", m.min}, {"max", m.max}, {"mean", m.mean()}, {"count", m.count}};
}

inline nlohmann::json report_to_json(const RunReport& r) {
    nlohmann::json depth = nlohmann::json::object();
    for (const auto& [d, n] : r.stats.label_depth) depth[std::to_string(d)] = n;
    return {{"total_payload_bytes", r.total_payload_bytes},
            {"packet_count", r.packet_count},
            {"bytes_per_packet", r.bytes_per_packet},
            {"payload_size", stats_to_json(r.stats.payload_size)},
            {"qname_len", stats_to_json(r.stats.qname_len)},
            {"packet_len", stats_to_json(r.stats.packet_len)},
            {"label_depth", depth},
            {"retransmit_count", r.retransmit_count},
            {"duration_s", r.duration_s}};
}

/// Human-readable table in the style of a capture summary.
inline void print_report(std::ostream& out, const RunReport& r) {
    auto row = [&](const char* name, const MinMaxMean& m) {
        out << "  " << std::left << std::setw(14) << name << " min " << std::setw(6) << m.min
            << " max " << std::setw(6) << m.max << " mean " << std::fixed << std::setprecision(2)
            << m.mean() << "\n";
    };
    out << "transfer: " << r.total_payload_bytes << " payload bytes in " << r.packet_count
        << " packets (" << std::fixed << std::setprecision(2) << r.bytes_per_packet
        << " bytes/packet), " << r.retransmit_count << " retransmits, " << std::setprecision(3)
        << r.duration_s << " s\n";
    row("payload size", r.stats.payload_size);
    row("qname length", r.stats.qname_len);
    row("packet length", r.stats.packet_len);
    out << "  label depth   ";
    std::uint64_t deep = 0, l1 = 0, l2 = 0, l3 = 0;
    for (const auto& [d, n] : r.stats.label_depth) {
        if (d >= 4) deep += n;
        else if (d == 3) l3 += n;
        else if (d == 2) l2 += n;
        else l1 += n;
    }
    out << "4th+ " << deep << "  3rd " << l3 << "  2nd " << l2 << "  1st " << l1 << "\n";
}

} // namespace dnsburrow
