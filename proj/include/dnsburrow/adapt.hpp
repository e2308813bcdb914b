#pragma once

#include <istream>
#include <map>
#include <sstream>

#include "dnsburrow/codec.hpp"

namespace dnsburrow {

enum class Direction { Query, Response };

/// One line of an observation log: a DNS datagram seen on the network.
/// payload_len is the DNS message size (UDP payload), packet_len the
/// on-the-wire frame size.
struct DnsObservation {
    double ts = 0;
    std::string qname;
    std::uint16_t qtype = 0;
    std::uint32_t payload_len = 0;
    std::uint32_t packet_len = 0;
    Direction direction = Direction::Query;
};

/// Record-type frequencies and length statistics distilled from observed
/// traffic. Immutable once built; share freely.
struct TrafficProfile {
    std::map<std::uint16_t, std::uint64_t> type_counts;
    MinMaxMean qname_len;
    MinMaxMean payload_len;
    MinMaxMean packet_len;
    std::uint64_t observation_count = 0;
    std::uint64_t skipped_records = 0;
};

/// Parses one observation-log line. Fixed field order
/// `ts qname qtype payload_len packet_len direction`; extra trailing
/// fields are ignored so extended trace files remain valid input.
inline std::optional<DnsObservation> parse_observation(std::string_view line) {
    std::istringstream in{std::string(line)};
    DnsObservation o;
    std::string qtype, dir;
    if (!(in >> o.ts >> o.qname >> qtype >> o.payload_len >> o.packet_len >> dir)) return std::nullopt;
    o.qtype = parse_record_type(qtype);
    if (o.qtype == 0) return std::nullopt;
    if (dir == "query") o.direction = Direction::Query;
    else if (dir == "response") o.direction = Direction::Response;
    else return std::nullopt;
    if (o.direction == Direction::Query && o.qname.empty()) return std::nullopt;
    if (o.payload_len > o.packet_len) return std::nullopt;
    return o;
}

inline void accumulate(TrafficProfile& p, const DnsObservation& o) {
    ++p.type_counts[o.qtype];
    ++p.observation_count;
    if (!o.qname.empty()) p.qname_len.add(o.qname.size());
    p.payload_len.add(o.payload_len);
    p.packet_len.add(o.packet_len);
}

inline TrafficProfile ingest_observations(std::span<const DnsObservation> obs) {
    TrafficProfile p;
    for (const auto& o : obs) accumulate(p, o);
    return p;
}

/// Streaming ingestion: malformed lines are counted and skipped, never
/// fatal. Blank lines and '#' comments are not counted as malformed.
inline TrafficProfile ingest_log(std::istream& in) {
    TrafficProfile p;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (auto o = parse_observation(line)) accumulate(p, *o);
        else ++p.skipped_records;
    }
    return p;
}

/// Top-k most frequent observed types restricted to what the channel
/// supports, most frequent first, ties broken by ascending type code.
/// Falls open to the full supported set when the intersection is empty,
/// so a hostile or empty profile never blocks the channel.
inline std::vector<RecordType> select_candidates(const TrafficProfile& profile,
                                                 std::span<const RecordType> supported,
                                                 std::size_t k) {
    std::vector<std::pair<std::uint16_t, std::uint64_t>> ranked(profile.type_counts.begin(),
                                                                profile.type_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<RecordType> out;
    for (const auto& [code, count] : ranked) {
        if (out.size() >= k) break;
        for (RecordType t : supported) {
            if (type_code(t) == code) {
                out.push_back(t);
                break;
            }
        }
    }
    if (out.empty()) out.assign(supported.begin(), supported.end());
    return out;
}

/// Inverts the qname-length arithmetic to center the message range on the
/// observed mean: a message of m bytes rides a (4 + m + tag_len)-byte
/// packet, Base32 expands it 8/5, and two data labels plus the suffix add
/// their dots. The derived range spans center +/- 4 clamped to
/// [2, capacity], and an empty profile keeps the stock (2, 10) range.
inline LengthPolicy derive_length_policy(const TrafficProfile& profile, const ChannelDomain& domain,
                                         std::size_t tag_len, std::size_t capacity_limit) {
    if (capacity_limit == 0) throw Error("channel domain leaves no room for a message");
    LengthPolicy policy; // (2, 10, 2)
    auto clamp_cap = [&](std::size_t v) { return std::clamp<std::size_t>(v, 1, capacity_limit); };
    if (profile.qname_len.count == 0) {
        policy.msg_min = clamp_cap(policy.msg_min);
        policy.msg_max = std::max(clamp_cap(policy.msg_max), policy.msg_min);
        return policy;
    }
    double mean = profile.qname_len.mean();
    std::size_t overhead = domain.suffix.size() + policy.min_data_labels; // suffix + dots
    double target_chars = mean - static_cast<double>(overhead);
    std::size_t center = 2;
    if (target_chars > 0) {
        std::size_t wire = static_cast<std::size_t>(target_chars * 5.0 / 8.0);
        std::size_t header_and_tag = 4 + tag_len;
        center = wire > header_and_tag + 2 ? wire - header_and_tag : 2;
    }
    policy.msg_min = clamp_cap(center > 4 + 2 ? center - 4 : 2);
    policy.msg_max = std::max(clamp_cap(center + 4), policy.msg_min);
    return policy;
}

/// Uniform draw over candidates minus the excluded set; falls back to the
/// full candidate list when the exclusion empties it.
inline RecordType pick_record_type(std::span<const RecordType> candidates, Rng& rng,
                                   std::span<const RecordType> exclude = {}) {
    std::vector<RecordType> allowed;
    allowed.reserve(candidates.size());
    for (RecordType t : candidates) {
        bool excluded = std::find(exclude.begin(), exclude.end(), t) != exclude.end();
        if (!excluded) allowed.push_back(t);
    }
    if (allowed.empty()) allowed.assign(candidates.begin(), candidates.end());
    if (allowed.empty()) throw Error("no candidate record types configured");
    if (allowed.size() == 1) return allowed[0];
    return allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)];
}

} // namespace dnsburrow
