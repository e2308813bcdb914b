#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "dnsburrow/dnswire.hpp"

namespace dnsburrow {

class BindFailure : public Error {
public:
    using Error::Error;
};

/// Blocking request/response interface the client drives. Returns the
/// matching response or nothing after the timeout.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::optional<DnsMessage> query(const DnsMessage& msg, std::chrono::milliseconds rto) = 0;
    /// Seconds on this transport's clock; wall time for UDP, virtual
    /// deterministic time for the simulator.
    virtual double now() = 0;
};

/// Handler invoked for every inbound query; `now` is seconds on the
/// serving transport's clock. Returning nothing drops the datagram.
using ServerHandler = std::function<std::optional<DnsMessage>(const DnsMessage&, double now)>;

namespace detail {
inline sockaddr_in parse_endpoint(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw BindFailure("not an IPv4 address: " + host);
    return addr;
}
} // namespace detail

/// One-shot UDP client: sends the query to the configured resolver and
/// waits for a response with a matching transaction id. Datagrams with a
/// foreign txid are ignored and the wait continues.
class UdpTransport : public Transport {
public:
    UdpTransport(std::string resolver_host, std::uint16_t resolver_port)
        : dest_(detail::parse_endpoint(resolver_host, resolver_port)) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd_ < 0) throw BindFailure("cannot create UDP socket");
        start_ = std::chrono::steady_clock::now();
    }

    ~UdpTransport() override {
        if (fd_ >= 0) ::close(fd_);
    }

    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;

    std::optional<DnsMessage> query(const DnsMessage& msg, std::chrono::milliseconds rto) override {
        bytes wire = encode_message(msg);
        if (::sendto(fd_, wire.data(), wire.size(), 0, reinterpret_cast<const sockaddr*>(&dest_),
                     sizeof(dest_)) < 0)
            return std::nullopt;
        auto deadline = std::chrono::steady_clock::now() + rto;
        std::array<std::uint8_t, 2048> buf;
        while (true) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) return std::nullopt;
            pollfd pfd{fd_, POLLIN, 0};
            int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (r <= 0) return std::nullopt;
            ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
            if (n < 12) continue; // short read: not a DNS message
            try {
                DnsMessage resp = decode_message(byte_view(buf.data(), static_cast<std::size_t>(n)));
                if (resp.txid != msg.txid || !resp.flags.response) continue;
                return resp;
            } catch (const Error&) {
                continue; // undecodable datagram: keep waiting
            }
        }
    }

    double now() override {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    sockaddr_in dest_;
    int fd_ = -1;
    std::chrono::steady_clock::time_point start_;
};

/// Threaded UDP server: one response per query, 512-byte limit, handler
/// errors answered with SERVFAIL so the port never goes silent by accident.
class UdpServer {
public:
    UdpServer(const std::string& bind_host, std::uint16_t port, ServerHandler handler)
        : handler_(std::move(handler)) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd_ < 0) throw BindFailure("cannot create UDP socket");
        sockaddr_in addr = detail::parse_endpoint(bind_host, port);
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
            ::close(fd_);
            fd_ = -1;
            throw BindFailure("cannot bind " + bind_host + ":" + std::to_string(port));
        }
        sockaddr_in actual{};
        socklen_t len = sizeof(actual);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&actual), &len);
        port_ = ntohs(actual.sin_port);
        start_ = std::chrono::steady_clock::now();
    }

    ~UdpServer() {
        stop();
        if (fd_ >= 0) ::close(fd_);
    }

    UdpServer(const UdpServer&) = delete;
    UdpServer& operator=(const UdpServer&) = delete;

    std::uint16_t port() const { return port_; }

    void start() {
        running_ = true;
        thread_ = std::thread([this] { loop(); });
    }

    void stop() {
        running_ = false;
        if (thread_.joinable()) thread_.join();
    }

    /// Invoked roughly four times a second from the serving thread; used
    /// for session expiry sweeps.
    void set_tick(std::function<void(double now)> tick) { tick_ = std::move(tick); }

private:
    void loop() {
        std::array<std::uint8_t, 2048> buf;
        while (running_) {
            pollfd pfd{fd_, POLLIN, 0};
            int r = ::poll(&pfd, 1, 250);
            double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
            if (tick_) tick_(t);
            if (r <= 0) continue;
            sockaddr_in from{};
            socklen_t from_len = sizeof(from);
            ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                   reinterpret_cast<sockaddr*>(&from), &from_len);
            if (n < 12) continue;
            std::optional<DnsMessage> resp;
            try {
                DnsMessage q = decode_message(byte_view(buf.data(), static_cast<std::size_t>(n)));
                if (q.flags.response) continue;
                resp = handler_(q, t);
            } catch (const Error&) {
                continue; // not parseable as DNS: drop
            }
            if (!resp) continue;
            try {
                bytes wire = encode_message(*resp);
                if (wire.size() > 512) continue; // never emit oversized UDP answers
                ::sendto(fd_, wire.data(), wire.size(), 0, reinterpret_cast<const sockaddr*>(&from),
                         from_len);
            } catch (const Error&) {
                continue;
            }
        }
    }

    ServerHandler handler_;
    std::function<void(double)> tick_;
    int fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread thread_;
    std::chrono::steady_clock::time_point start_;
};

/// Fault schedule for the simulated resolver. Deterministic under a
/// fixed seed.
struct FaultPlan {
    double loss = 0.0;
    double dup = 0.0;
    double reorder = 0.0;
    double corrupt = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        for (double p : {loss, dup, reorder, corrupt}) {
            if (p < 0.0 || p > 1.0) throw Error("fault probabilities must be within [0, 1]");
        }
    }
};

namespace detail {

/// Replaces one character of the encoded payload region with a different
/// character from the same alphabet, so the carrier still decodes but the
/// recovered covert bytes differ and the integrity tag fails. Only
/// characters entirely past the 4-byte packet header are touched: the
/// header travels untagged by design, so corrupting it would not model
/// the payload corruption the integrity check is there to catch. The
/// final character is also skipped since its trailing bits may be
/// padding.
inline void corrupt_text(std::string& text, std::string_view alphabet, std::size_t bits_per_char,
                         Rng& rng) {
    std::size_t first = (32 + bits_per_char - 1) / bits_per_char; // past the header bits
    if (text.size() < first + 2) return;                          // no corruptible payload chars
    std::size_t last = text.size() - 2;
    while (last > first && text[last] == '=') --last; // stay clear of base64 padding
    if (last < first) return;
    std::size_t pos = first == last
                          ? first
                          : std::uniform_int_distribution<std::size_t>(first, last)(rng);
    char replacement = text[pos];
    std::uniform_int_distribution<std::size_t> alpha_d(0, alphabet.size() - 1);
    while (replacement == text[pos]) replacement = alphabet[alpha_d(rng)];
    text[pos] = replacement;
}

/// Rewrites a data name (qname or CNAME target) with one corrupted
/// payload character, keeping the label structure intact.
inline std::string corrupt_data_name(const std::string& name, const ChannelDomain& domain, Rng& rng) {
    auto encoded = parse_qname(name, domain);
    if (!encoded) return name;
    std::string data = *encoded;
    corrupt_text(data, "abcdefghijklmnopqrstuvwxyz234567", 5, rng);
    // Re-split at the original label boundaries.
    std::string out;
    std::size_t di = 0;
    std::size_t stop = name.size() - domain.suffix.size(); // includes trailing dot
    for (std::size_t i = 0; i < stop; ++i) {
        out.push_back(name[i] == '.' ? '.' : data[di++]);
    }
    out += domain.suffix;
    return out;
}

} // namespace detail

/// Flips one character of the covert payload region in place: the qname
/// data labels of a query, or the CNAME/TXT rdata of a response.
/// Carrier-only A answers hold no covert payload, so there is nothing for
/// this fault to corrupt there.
inline void corrupt_covert_region(DnsMessage& msg, const ChannelDomain& domain, Rng& rng) {
    if (!msg.flags.response) {
        msg.question.qname = detail::corrupt_data_name(msg.question.qname, domain, rng);
        return;
    }
    for (auto& rr : msg.answers) {
        if (rr.rtype == type_code(RecordType::CNAME)) {
            rr.target = detail::corrupt_data_name(rr.target, domain, rng);
            return;
        }
        if (rr.rtype == type_code(RecordType::TXT)) {
            std::string text = to_string(rr.txt);
            detail::corrupt_text(
                text, "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/", 6, rng);
            rr.txt = to_bytes(text);
            return;
        }
    }
}

/// In-process stand-in for the resolver path between client and server:
/// presents the client-side Transport interface, feeds a server handler,
/// and injects loss, duplication, reordering and payload corruption per
/// datagram and direction from a seeded schedule. Time is virtual, so a
/// run is bit-reproducible from (plan.seed, channel seed).
class SimulatedResolver : public Transport {
public:
    SimulatedResolver(ServerHandler handler, FaultPlan plan, ChannelDomain domain)
        : handler_(std::move(handler)), plan_(plan), domain_(std::move(domain)), rng_(plan.seed) {
        plan_.validate();
    }

    std::optional<DnsMessage> query(const DnsMessage& msg, std::chrono::milliseconds rto) override {
        advance(kHopSeconds);
        // Upstream: the query plus anything the network still held.
        std::vector<DnsMessage> arriving = pipe(msg, held_queries_);
        std::vector<DnsMessage> responses;
        for (const DnsMessage& q : arriving) {
            advance(kHopSeconds);
            if (auto r = handler_(q, now_)) {
                for (DnsMessage& d : pipe(*r, held_responses_)) responses.push_back(std::move(d));
            }
        }
        advance(kHopSeconds);
        for (DnsMessage& r : responses) {
            if (r.txid == msg.txid && r.flags.response) return std::move(r);
        }
        // Nothing matched: burn the client's timeout.
        advance(std::chrono::duration<double>(rto).count());
        return std::nullopt;
    }

    double now() override { return now_; }

private:
    static constexpr double kHopSeconds = 0.005;

    bool roll(double p) {
        if (p <= 0.0) return false;
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p;
    }

    /// Applies the fault schedule to one datagram. `held` is this
    /// direction's one-slot reorder buffer: a reordered datagram waits
    /// there and is delivered after the next one that passes through.
    std::vector<DnsMessage> pipe(const DnsMessage& msg, std::deque<DnsMessage>& held) {
        std::vector<DnsMessage> out;
        int copies = roll(plan_.dup) ? 2 : 1;
        for (int i = 0; i < copies; ++i) {
            if (roll(plan_.loss)) continue;
            DnsMessage copy = msg;
            if (roll(plan_.corrupt)) corrupt_covert_region(copy, domain_, rng_);
            if (roll(plan_.reorder)) {
                held.push_back(std::move(copy));
                continue;
            }
            out.push_back(std::move(copy));
        }
        while (!held.empty() && !out.empty()) {
            out.push_back(std::move(held.front()));
            held.pop_front();
        }
        return out;
    }

    ServerHandler handler_;
    FaultPlan plan_;
    ChannelDomain domain_;
    Rng rng_;
    double now_ = 0.0;
    std::deque<DnsMessage> held_queries_;
    std::deque<DnsMessage> held_responses_;

    void advance(double s) { now_ += s; }
};

} // namespace dnsburrow
