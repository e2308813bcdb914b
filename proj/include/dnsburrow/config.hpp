#pragma once

#include <cstdlib>
#include <fstream>

#include "dnsburrow/channel.hpp"

namespace dnsburrow {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Operator-facing knobs, collected from a key-value config file and
/// command-line overrides, validated once into a WireConfig.
struct ChannelConfig {
    std::string domain = "test.com";
    bytes secret;
    std::string resolver_host = "127.0.0.1";
    std::uint16_t resolver_port = 53;
    std::string bind_host = "0.0.0.0";
    std::uint16_t bind_port = 53;
    std::size_t tag_len = 4;
    TagMode tag_mode = TagMode::HmacMd5;
    std::optional<std::size_t> msg_min;
    std::optional<std::size_t> msg_max;
    std::optional<std::vector<RecordType>> candidates;
    double timeout_s = 300.0;
    std::chrono::milliseconds rto{2000};
    int max_retries = 5;
    FaultPlan faults;
    std::optional<std::uint64_t> seed;
    std::uint32_t framing = kFramingOverhead;

    /// Validates every module-level invariant and assembles the wire
    /// configuration both endpoints share.
    WireConfig wire_config() const {
        WireConfig cfg;
        try {
            cfg.domain = ChannelDomain::parse(domain);
        } catch (const Error& e) {
            throw ConfigError(std::string("domain: ") + e.what());
        }
        if (tag_len < 1 || tag_len > 16) throw ConfigError("tag_len must be 1-16");
        cfg.tag_len = tag_len;
        cfg.tag_mode = tag_mode;
        std::size_t capacity = max_message_capacity(cfg.domain);
        if (capacity == 0) throw ConfigError("domain leaves no room for data labels");
        if (msg_min) cfg.policy.msg_min = *msg_min;
        if (msg_max) cfg.policy.msg_max = *msg_max;
        if (cfg.policy.msg_min < 1 || cfg.policy.msg_min > cfg.policy.msg_max ||
            cfg.policy.msg_max > capacity)
            throw ConfigError("message length range must satisfy 1 <= min <= max <= " +
                              std::to_string(capacity));
        if (candidates) {
            if (candidates->empty()) throw ConfigError("candidate record types must not be empty");
            for (RecordType t : *candidates) {
                if (t != RecordType::A && t != RecordType::CNAME && t != RecordType::TXT)
                    throw ConfigError("supported candidate types are A, CNAME, TXT");
            }
            cfg.candidate_types = *candidates;
        }
        try {
            faults.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        if (timeout_s <= 0) throw ConfigError("timeout must be positive");
        if (rto.count() <= 0) throw ConfigError("rto must be positive");
        if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
        return cfg;
    }

    ClientLimits limits() const { return ClientLimits{rto, max_retries}; }
};

namespace detail {
inline std::pair<std::string, std::uint16_t> parse_hostport(const std::string& s,
                                                            std::uint16_t default_port) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos) return {s, default_port};
    std::uint32_t port = 0;
    for (std::size_t i = colon + 1; i < s.size(); ++i) {
        char c = s[i];
        if (c < '0' || c > '9') throw ConfigError("bad port in endpoint: " + s);
        port = port * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (port == 0 || port > 0xFFFF) throw ConfigError("bad port in endpoint: " + s);
    return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
}
} // namespace detail

/// `key = value` lines; '#' starts a comment; unknown keys are rejected
/// so typos do not silently fall back to defaults.
inline void apply_config_file(const std::string& path, ChannelConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        try {
            if (key == "domain") cfg.domain = value;
            else if (key == "secret") cfg.secret = to_bytes(value);
            else if (key == "resolver") {
                auto [h, p] = detail::parse_hostport(value, cfg.resolver_port);
                cfg.resolver_host = h;
                cfg.resolver_port = p;
            } else if (key == "bind") {
                auto [h, p] = detail::parse_hostport(value, cfg.bind_port);
                cfg.bind_host = h;
                cfg.bind_port = p;
            } else if (key == "tag_len") cfg.tag_len = std::stoul(value);
            else if (key == "tag_mode") {
                if (value == "hmac") cfg.tag_mode = TagMode::HmacMd5;
                else if (value == "plain") cfg.tag_mode = TagMode::PlainMd5;
                else throw ConfigError("tag_mode must be hmac or plain");
            } else if (key == "msg_min") cfg.msg_min = std::stoul(value);
            else if (key == "msg_max") cfg.msg_max = std::stoul(value);
            else if (key == "candidates") {
                std::vector<RecordType> types;
                std::istringstream cs(value);
                std::string item;
                while (std::getline(cs, item, ',')) {
                    std::uint16_t code = parse_record_type(item);
                    if (code == 0) throw ConfigError("unknown record type: " + item);
                    types.push_back(static_cast<RecordType>(code));
                }
                cfg.candidates = types;
            } else if (key == "timeout") cfg.timeout_s = std::stod(value);
            else if (key == "rto") cfg.rto = std::chrono::milliseconds(std::stol(value));
            else if (key == "max_retries") cfg.max_retries = std::stoi(value);
            else if (key == "loss") cfg.faults.loss = std::stod(value);
            else if (key == "dup") cfg.faults.dup = std::stod(value);
            else if (key == "reorder") cfg.faults.reorder = std::stod(value);
            else if (key == "corrupt") cfg.faults.corrupt = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "framing_overhead") cfg.framing = static_cast<std::uint32_t>(std::stoul(value));
            else throw ConfigError("unknown key: " + key);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
}

/// Secret resolution order: explicit file, then the DNSBURROW_SECRET
/// environment variable (kept out of the process list), then whatever a
/// config file already set.
inline void load_secret(ChannelConfig& cfg, const std::string& secret_file) {
    if (!secret_file.empty()) {
        std::ifstream in(secret_file, std::ios::binary);
        if (!in) throw ConfigError("cannot open secret file: " + secret_file);
        bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        while (!data.empty() && (data.back() == '\n' || data.back() == '\r')) data.pop_back();
        cfg.secret = data;
        return;
    }
    if (cfg.secret.empty()) {
        if (const char* env = std::getenv("DNSBURROW_SECRET")) cfg.secret = to_bytes(env);
    }
}

} // namespace dnsburrow
