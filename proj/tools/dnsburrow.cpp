// dnsburrow command-line front end: serve, client, simulate, analyze, stats.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dnsburrow/dnsburrow.hpp"

namespace {

using namespace dnsburrow;

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

struct CommonOpts {
    std::string config_path;
    std::string secret_file;
};

/// Options every subcommand shares. Config file values load first, then
/// explicit flags override them.
void add_common(CLI::App* cmd, CommonOpts& opts, ChannelConfig& cfg) {
    cmd->add_option("--config", opts.config_path, "key = value config file");
    cmd->add_option("--domain", cfg.domain, "channel domain suffix");
    cmd->add_option("--secret-file", opts.secret_file,
                    "file holding the pre-shared secret (or set DNSBURROW_SECRET)");
    cmd->add_option("--tag-len", cfg.tag_len, "integrity tag bytes, 1-16");
    cmd->add_option_function<std::string>(
           "--tag-mode",
           [&cfg](const std::string& v) {
               if (v == "hmac") cfg.tag_mode = TagMode::HmacMd5;
               else if (v == "plain") cfg.tag_mode = TagMode::PlainMd5;
               else throw CLI::ValidationError("--tag-mode", "must be hmac or plain");
           },
           "integrity tag construction: hmac or plain")
        ->expected(1);
    cmd->add_option_function<std::size_t>(
        "--msg-min", [&cfg](const std::size_t& v) { cfg.msg_min = v; },
        "smallest message chunk, bytes");
    cmd->add_option_function<std::size_t>(
        "--msg-max", [&cfg](const std::size_t& v) { cfg.msg_max = v; },
        "largest message chunk, bytes");
    cmd->add_option_function<std::string>(
           "--candidates",
           [&cfg](const std::string& csv) {
               std::vector<RecordType> types;
               std::istringstream in(csv);
               std::string item;
               while (std::getline(in, item, ',')) {
                   std::uint16_t code = parse_record_type(item);
                   if (code == 0) throw CLI::ValidationError("--candidates", "unknown type " + item);
                   types.push_back(static_cast<RecordType>(code));
               }
               cfg.candidates = types;
           },
           "candidate record types, comma separated")
        ->expected(1);
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&cfg](const std::uint64_t& v) { cfg.seed = v; }, "rng seed (printed if drawn)");
    cmd->add_option("--timeout", cfg.timeout_s, "server-side idle session timeout, seconds");
    cmd->add_option_function<long>(
        "--rto", [&cfg](const long& v) { cfg.rto = std::chrono::milliseconds(v); },
        "client retransmission timeout, milliseconds");
    cmd->add_option("--max-retries", cfg.max_retries, "resend budget per packet");
}

/// Folds a config file under the flags that were actually given.
void finish_config(const CommonOpts& opts, ChannelConfig& cfg, CLI::App* cmd) {
    if (!opts.config_path.empty()) {
        ChannelConfig merged;
        apply_config_file(opts.config_path, merged);
        if (cmd->count("--domain")) merged.domain = cfg.domain;
        if (cmd->count("--tag-len")) merged.tag_len = cfg.tag_len;
        if (cmd->count("--tag-mode")) merged.tag_mode = cfg.tag_mode;
        if (cfg.msg_min) merged.msg_min = cfg.msg_min;
        if (cfg.msg_max) merged.msg_max = cfg.msg_max;
        if (cfg.candidates) merged.candidates = cfg.candidates;
        if (cfg.seed) merged.seed = cfg.seed;
        if (cmd->count("--timeout")) merged.timeout_s = cfg.timeout_s;
        if (cmd->count("--rto")) merged.rto = cfg.rto;
        if (cmd->count("--max-retries")) merged.max_retries = cfg.max_retries;
        if (!cfg.secret.empty()) merged.secret = cfg.secret;
        if (cmd->count("--resolver")) {
            merged.resolver_host = cfg.resolver_host;
            merged.resolver_port = cfg.resolver_port;
        }
        if (cmd->count("--bind")) {
            merged.bind_host = cfg.bind_host;
            merged.bind_port = cfg.bind_port;
        }
        if (cmd->count("--loss")) merged.faults.loss = cfg.faults.loss;
        if (cmd->count("--dup")) merged.faults.dup = cfg.faults.dup;
        if (cmd->count("--reorder")) merged.faults.reorder = cfg.faults.reorder;
        if (cmd->count("--corrupt")) merged.faults.corrupt = cfg.faults.corrupt;
        cfg = merged;
    }
    load_secret(cfg, opts.secret_file);
}

bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    return bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, byte_view data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_trace(const std::string& path, const std::vector<TraceRecord>& trace, bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw ConfigError("cannot write trace file: " + path);
    for (const auto& r : trace) out << format_trace_line(r) << "\n";
}

std::uint64_t effective_seed(const ChannelConfig& cfg) {
    if (cfg.seed) return *cfg.seed;
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

// --------------------------------------------------------------------------
// serve
// --------------------------------------------------------------------------

/// Per-client traffic log kept by the serving wrapper so a transfer report
/// can be printed when a session completes. Byte-identical repeats of the
/// previous datagram are flagged as retransmissions.
class ServeTraces {
public:
    explicit ServeTraces(std::uint32_t framing) : framing_(framing) {}

    void record_query(std::uint8_t id, const DnsMessage& q, const bytes& covert, double now) {
        std::lock_guard lock(mutex_);
        PerClient& pc = clients_[id];
        bool retrans = pc.last_query == covert && !covert.empty();
        pc.last_query = covert;
        bytes wire = encode_message(q);
        pc.trace.push_back(TraceRecord{now, q.question.qname, q.question.qtype,
                                       static_cast<std::uint32_t>(wire.size()),
                                       static_cast<std::uint32_t>(wire.size()) + framing_,
                                       Direction::Query,
                                       0, // payload accounting is filled at completion
                                       retrans});
    }

    void record_response(std::uint8_t id, const DnsMessage& r, const bytes& covert, double now) {
        std::lock_guard lock(mutex_);
        PerClient& pc = clients_[id];
        bool retrans = pc.last_response == covert && !covert.empty();
        pc.last_response = covert;
        bytes wire = encode_message(r);
        pc.trace.push_back(TraceRecord{now, r.question.qname, r.question.qtype,
                                       static_cast<std::uint32_t>(wire.size()),
                                       static_cast<std::uint32_t>(wire.size()) + framing_,
                                       Direction::Response, 0, retrans});
    }

    std::vector<TraceRecord> take(std::uint8_t id) {
        std::lock_guard lock(mutex_);
        auto it = clients_.find(id);
        if (it == clients_.end()) return {};
        std::vector<TraceRecord> out = std::move(it->second.trace);
        clients_.erase(it);
        return out;
    }

private:
    struct PerClient {
        std::vector<TraceRecord> trace;
        bytes last_query;
        bytes last_response;
    };
    std::uint32_t framing_;
    std::map<std::uint8_t, PerClient> clients_;
    std::mutex mutex_;
};

int cmd_serve(ChannelConfig& cfg, const std::string& out_dir, const std::string& send_path) {
    WireConfig wire = cfg.wire_config();
    if (cfg.secret.empty())
        throw ConfigError("serve needs a secret (--secret-file or DNSBURROW_SECRET)");
    SharedSecret secret{cfg.secret};

    ServerSessionTable table(secret, wire, cfg.timeout_s);
    if (!send_path.empty()) table.set_outbound_payload(read_file(send_path));

    auto traces = std::make_shared<ServeTraces>(cfg.framing);
    std::string target_dir = out_dir.empty() ? std::string(".") : out_dir;
    std::filesystem::create_directories(target_dir);
    table.set_completion_sink([&cfg, traces, target_dir](std::uint8_t id, const bytes& data,
                                                         double now) {
        char name[64];
        std::snprintf(name, sizeof(name), "recv-%02x-%.0f.bin", id, now * 1000);
        std::string path = target_dir + "/" + name;
        write_file(path, data);
        RunReport rep = build_report(traces->take(id), cfg.framing);
        rep.total_payload_bytes = data.size();
        rep.bytes_per_packet = rep.packet_count
                                   ? static_cast<double>(rep.total_payload_bytes) /
                                         static_cast<double>(rep.packet_count)
                                   : 0.0;
        std::cout << "session " << static_cast<int>(id) << " complete: " << data.size()
                  << " bytes -> " << path << "\n";
        print_report(std::cout, rep);
        std::cout << "REPORT " << report_to_json(rep).dump() << std::endl;
    });

    auto rng = std::make_shared<Rng>(effective_seed(cfg));
    ServerHandler inner = make_server_handler(table, wire, rng);
    ServerHandler handler = [wire, traces, inner](const DnsMessage& q,
                                                  double now) -> std::optional<DnsMessage> {
        std::optional<std::uint8_t> id;
        bytes covert;
        if (auto enc = parse_qname(q.question.qname, wire.domain)) {
            try {
                covert = base32_decode(*enc);
                if (auto pkt = parse_packet(covert, wire)) id = pkt->id;
            } catch (const Error&) {
            }
        }
        if (id) traces->record_query(*id, q, covert, now);
        auto resp = inner(q, now);
        if (id && resp) {
            bytes resp_covert;
            auto got = extract_reply(*resp, wire);
            if (got.kind == ExtractedReply::Kind::Covert) resp_covert = got.covert;
            traces->record_response(*id, *resp, resp_covert, now);
        }
        return resp;
    };

    UdpServer server(cfg.bind_host, cfg.bind_port, handler);
    server.set_tick([&](double now) {
        for (std::uint8_t id : table.expire_sessions(now)) {
            std::cout << "session " << static_cast<int>(id) << " expired after " << cfg.timeout_s
                      << " s idle" << std::endl;
        }
    });
    server.start();
    std::cout << "serving " << wire.domain.suffix << " on " << cfg.bind_host << ":" << server.port()
              << " (timeout " << cfg.timeout_s << " s)" << std::endl;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    std::cout << "stopped" << std::endl;
    return 0;
}

// --------------------------------------------------------------------------
// client
// --------------------------------------------------------------------------

int cmd_client(ChannelConfig& cfg, const std::string& send_path, const std::string& recv_out,
               const std::string& trace_out) {
    WireConfig wire = cfg.wire_config();
    if (cfg.secret.empty())
        throw ConfigError("client needs a secret (--secret-file or DNSBURROW_SECRET)");
    if (send_path.empty() && recv_out.empty())
        throw ConfigError("client needs --send and/or --recv-out");
    SharedSecret secret{cfg.secret};
    bytes payload = send_path.empty() ? bytes{} : read_file(send_path);

    std::uint64_t seed = effective_seed(cfg);
    std::cout << "seed " << seed << std::endl;
    Rng rng(seed);
    ClientSession session(secret, wire, std::move(payload), rng);
    UdpTransport transport(cfg.resolver_host, cfg.resolver_port);
    std::vector<TraceRecord> trace;
    TransferOutcome outcome =
        run_client_transfer(transport, session, cfg.limits(), rng, &trace, cfg.framing);

    if (!recv_out.empty()) write_file(recv_out, outcome.received);
    if (!trace_out.empty()) write_trace(trace_out, trace, false);
    RunReport rep = build_report(trace, cfg.framing);
    print_report(std::cout, rep);
    std::cout << "REPORT " << report_to_json(rep).dump() << std::endl;
    return 0;
}

// --------------------------------------------------------------------------
// simulate
// --------------------------------------------------------------------------

int cmd_simulate(ChannelConfig& cfg, std::vector<std::size_t> sizes, bool both,
                 const std::string& report_out, const std::string& trace_out) {
    if (cfg.secret.empty()) cfg.secret = to_bytes("simulation-secret");
    WireConfig wire = cfg.wire_config();
    SharedSecret secret{cfg.secret};
    if (sizes.empty())
        sizes.assign(kDefaultSimulationSizes.begin(), kDefaultSimulationSizes.end());

    std::uint64_t base_seed = effective_seed(cfg);
    std::cout << "seed " << base_seed << std::endl;

    std::ofstream report_file;
    if (!report_out.empty()) {
        report_file.open(report_out, std::ios::trunc);
        if (!report_file) throw ConfigError("cannot write report file: " + report_out);
    }

    bool all_ok = true;
    bool first_trace = true;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        SimulationSpec spec{secret,   wire, cfg.faults, base_seed + 16 * i, sizes[i], both,
                            cfg.timeout_s, cfg.limits()};
        SimulationResult r = run_simulation(spec);
        bool ok = r.upstream_exact && r.downstream_exact;
        all_ok = all_ok && ok;
        std::cout << "size " << sizes[i] << ": " << (ok ? "exact" : "MISMATCH") << ", "
                  << r.report.packet_count << " packets, " << std::fixed << std::setprecision(2)
                  << r.report.bytes_per_packet << " bytes/packet, " << r.report.retransmit_count
                  << " retransmits\n";
        nlohmann::json line = report_to_json(r.report);
        line["size"] = sizes[i];
        line["exact"] = ok;
        if (report_file) report_file << line.dump() << "\n";
        else std::cout << "REPORT " << line.dump() << "\n";
        if (!trace_out.empty()) {
            write_trace(trace_out, r.trace, !first_trace);
            first_trace = false;
        }
    }
    return all_ok ? 0 : 1;
}

// --------------------------------------------------------------------------
// analyze
// --------------------------------------------------------------------------

int cmd_analyze(ChannelConfig& cfg, const std::string& log_path) {
    WireConfig wire = cfg.wire_config();
    std::ifstream in(log_path);
    if (!in) throw ConfigError("cannot open observation log: " + log_path);
    TrafficProfile profile = ingest_log(in);

    std::cout << "observations: " << profile.observation_count << " (skipped "
              << profile.skipped_records << " malformed)\n";
    if (profile.observation_count == 0)
        std::cout << "warning: empty profile, falling back to stock defaults\n";

    std::vector<std::pair<std::uint16_t, std::uint64_t>> ranked(profile.type_counts.begin(),
                                                                profile.type_counts.end());
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [code, count] : ranked)
        std::cout << "  " << record_type_name(code) << ": " << count << "\n";
    if (profile.qname_len.count > 0) {
        std::cout << "qname length: min " << profile.qname_len.min << " max "
                  << profile.qname_len.max << " mean " << std::fixed << std::setprecision(2)
                  << profile.qname_len.mean() << "\n";
        std::cout << "payload size: min " << profile.payload_len.min << " max "
                  << profile.payload_len.max << " mean " << profile.payload_len.mean() << "\n";
    }

    auto candidates = select_candidates(profile, wire.candidate_types, 3);
    LengthPolicy policy =
        derive_length_policy(profile, wire.domain, wire.tag_len, max_message_capacity(wire.domain));
    std::cout << "recommended config:\n";
    std::cout << "  candidates = ";
    for (std::size_t i = 0; i < candidates.size(); ++i)
        std::cout << (i ? "," : "") << record_type_name(type_code(candidates[i]));
    std::cout << "\n  msg_min = " << policy.msg_min << "\n  msg_max = " << policy.msg_max
              << std::endl;
    return 0;
}

// --------------------------------------------------------------------------
// stats
// --------------------------------------------------------------------------

int cmd_stats(ChannelConfig& cfg, const std::string& trace_path) {
    std::ifstream in(trace_path);
    if (!in) throw ConfigError("cannot open trace file: " + trace_path);
    std::vector<TraceRecord> trace;
    std::string line;
    std::uint64_t skipped = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (auto r = parse_trace_line(line)) trace.push_back(*r);
        else ++skipped;
    }
    RunReport rep = build_report(trace, cfg.framing);
    if (skipped) std::cout << "skipped " << skipped << " malformed lines\n";
    print_report(std::cout, rep);
    std::cout << "REPORT " << report_to_json(rep).dump() << std::endl;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"covert byte transport over standards-compliant DNS"};
    app.require_subcommand(1);

    ChannelConfig cfg;
    CommonOpts common;

    auto* serve = app.add_subcommand("serve", "run the authoritative-style channel server");
    std::string out_dir = ".", serve_send;
    serve->add_option_function<std::string>(
        "--bind",
        [&cfg](const std::string& v) {
            auto [h, p] = dnsburrow::detail::parse_hostport(v, cfg.bind_port);
            cfg.bind_host = h;
            cfg.bind_port = p;
        },
        "address to bind, host[:port]");
    serve->add_option("--out-dir", out_dir, "directory for completed transfers");
    serve->add_option("--send", serve_send, "payload file served to every client");
    add_common(serve, common, cfg);

    auto* client = app.add_subcommand("client", "transfer data through a resolver");
    std::string send_path, recv_out, trace_out;
    client->add_option_function<std::string>(
        "--resolver",
        [&cfg](const std::string& v) {
            auto [h, p] = dnsburrow::detail::parse_hostport(v, cfg.resolver_port);
            cfg.resolver_host = h;
            cfg.resolver_port = p;
        },
        "resolver to query, host[:port]");
    client->add_option("--send", send_path, "file to transmit");
    client->add_option("--recv-out", recv_out, "write server payload here");
    client->add_option("--trace-out", trace_out, "write the datagram trace here");
    add_common(client, common, cfg);

    auto* simulate = app.add_subcommand("simulate", "in-process transfers over a faulty resolver");
    std::vector<std::size_t> sizes;
    bool both = false;
    std::string report_out, sim_trace_out;
    simulate->add_option("--sizes", sizes, "payload sizes to run")->delimiter(',');
    simulate->add_flag("--both", both, "also send a payload server->client");
    simulate->add_option("--loss", cfg.faults.loss, "per-datagram drop probability");
    simulate->add_option("--dup", cfg.faults.dup, "per-datagram duplication probability");
    simulate->add_option("--reorder", cfg.faults.reorder, "per-datagram reorder probability");
    simulate->add_option("--corrupt", cfg.faults.corrupt,
                         "per-datagram payload corruption probability");
    simulate->add_option("--report-out", report_out, "write JSON report lines here");
    simulate->add_option("--trace-out", sim_trace_out, "write the datagram trace here");
    add_common(simulate, common, cfg);

    auto* analyze =
        app.add_subcommand("analyze", "profile an observation log and recommend settings");
    std::string log_path;
    analyze->add_option("log", log_path, "observation log file")->required();
    add_common(analyze, common, cfg);

    auto* stats = app.add_subcommand("stats", "recompute a transfer report from a saved trace");
    std::string stats_path;
    stats->add_option("trace", stats_path, "trace file")->required();
    add_common(stats, common, cfg);

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* active = app.get_subcommands().front();
        finish_config(common, cfg, active);
        if (active == serve) return cmd_serve(cfg, out_dir, serve_send);
        if (active == client) return cmd_client(cfg, send_path, recv_out, trace_out);
        if (active == simulate) return cmd_simulate(cfg, sizes, both, report_out, sim_trace_out);
        if (active == analyze) return cmd_analyze(cfg, log_path);
        if (active == stats) return cmd_stats(cfg, stats_path);
    } catch (const dnsburrow::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}
