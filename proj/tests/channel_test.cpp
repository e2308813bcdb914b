#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <future>

#include "dnsburrow/channel.hpp"
#include "dnsburrow/config.hpp"

namespace dnsburrow {
namespace {

SharedSecret secret() { return SharedSecret::from_string("integration-secret"); }

WireConfig default_cfg() {
    WireConfig cfg;
    cfg.domain = ChannelDomain::parse("test.com");
    return cfg;
}

SimulationSpec spec_for(std::size_t size, FaultPlan plan = {}, std::uint64_t seed = 1) {
    SimulationSpec spec{secret(), default_cfg(), plan, seed, size, false, 300.0, ClientLimits{}};
    return spec;
}

TEST(Simulation, ZeroFaultOneWayExact) {
    SimulationResult r = run_simulation(spec_for(112));
    EXPECT_TRUE(r.upstream_exact);
    EXPECT_TRUE(r.downstream_exact); // nothing downstream, trivially exact
    EXPECT_EQ(r.retransmit_datagrams, 0u);
    EXPECT_EQ(r.report.retransmit_count, 0u);
    EXPECT_EQ(r.report.total_payload_bytes, 112u);
    EXPECT_GT(r.report.packet_count, 0u);
}

TEST(Simulation, ZeroFaultBidirectionalExact) {
    SimulationSpec spec = spec_for(87);
    spec.bidirectional = true;
    SimulationResult r = run_simulation(spec);
    EXPECT_TRUE(r.upstream_exact);
    EXPECT_TRUE(r.downstream_exact);
}

TEST(Simulation, DeterministicUnderFixedSeed) {
    FaultPlan plan;
    plan.loss = 0.05;
    plan.dup = 0.02;
    plan.corrupt = 0.02;
    SimulationResult a = run_simulation(spec_for(52, plan, 77));
    SimulationResult b = run_simulation(spec_for(52, plan, 77));
    EXPECT_EQ(report_to_json(a.report).dump(), report_to_json(b.report).dump());
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(format_trace_line(a.trace[i]), format_trace_line(b.trace[i])) << i;
    }
    SimulationResult c = run_simulation(spec_for(52, plan, 78));
    EXPECT_NE(format_trace_line(a.trace[0]), format_trace_line(c.trace[0]));
}

TEST(Simulation, SurvivesFaultsWithRetransmits) {
    FaultPlan plan;
    plan.loss = 0.05;
    plan.dup = 0.02;
    plan.reorder = 0.10;
    plan.corrupt = 0.02;
    std::uint64_t retransmits = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimulationResult r = run_simulation(spec_for(112, plan, seed));
        EXPECT_TRUE(r.upstream_exact) << seed;
        retransmits += r.report.retransmit_count;
    }
    EXPECT_GT(retransmits, 0u);
}

TEST(Simulation, GivesUpAfterMaxRetries) {
    FaultPlan plan;
    plan.loss = 1.0;
    SimulationSpec spec = spec_for(12, plan);
    spec.limits.max_retries = 3;
    spec.limits.rto = std::chrono::milliseconds(10);
    EXPECT_THROW(run_simulation(spec), MaxRetriesExceeded);
}

TEST(Simulation, TraceQueriesStayWithinLengthEnvelope) {
    SimulationResult r = run_simulation(spec_for(112));
    for (const auto& t : r.trace) {
        if (t.direction != Direction::Query) continue;
        EXPECT_LE(t.qname.size(), 52u);
        EXPECT_GE(label_depth_of(t.qname), 4);
    }
}

ServerHandler tracked_handler(ServerSessionTable& table, const WireConfig& cfg,
                              std::shared_ptr<Rng> rng) {
    return make_server_handler(table, cfg, std::move(rng));
}

TEST(UdpEndToEnd, FileTransferBothDirections) {
    WireConfig cfg = default_cfg();
    Rng seed_rng(4242);
    bytes up = random_bytes(96, seed_rng);
    bytes down = random_bytes(64, seed_rng);

    ServerSessionTable table(secret(), cfg, 300.0);
    table.set_outbound_payload(down);
    std::promise<bytes> server_got;
    table.set_completion_sink(
        [&](std::uint8_t, const bytes& data, double) { server_got.set_value(data); });

    UdpServer server("127.0.0.1", 0, tracked_handler(table, cfg, std::make_shared<Rng>(1)));
    server.start();

    UdpTransport transport("127.0.0.1", server.port());
    Rng client_rng(2);
    ClientSession session(secret(), cfg, up, client_rng);
    ClientLimits limits{std::chrono::milliseconds(2000), 5};
    std::vector<TraceRecord> trace;
    TransferOutcome out = run_client_transfer(transport, session, limits, client_rng, &trace);

    EXPECT_EQ(out.received, down);
    auto fut = server_got.get_future();
    ASSERT_EQ(fut.wait_for(std::chrono::seconds(2)), std::future_status::ready);
    EXPECT_EQ(fut.get(), up);
    EXPECT_GT(trace.size(), 0u);
    server.stop();
}

TEST(UdpEndToEnd, TwoInterleavedClients) {
    WireConfig cfg = default_cfg();
    Rng seed_rng(777);
    bytes payload_a = random_bytes(140, seed_rng);
    bytes payload_b = random_bytes(90, seed_rng);

    ServerSessionTable table(secret(), cfg, 300.0);
    std::mutex done_mutex;
    std::map<std::uint8_t, bytes> completed;
    table.set_completion_sink([&](std::uint8_t id, const bytes& data, double) {
        std::lock_guard lock(done_mutex);
        completed[id] = data;
    });

    UdpServer server("127.0.0.1", 0, tracked_handler(table, cfg, std::make_shared<Rng>(3)));
    server.start();
    std::uint16_t port = server.port();

    auto run_one = [&](const bytes& payload, std::uint64_t seed) {
        UdpTransport transport("127.0.0.1", port);
        Rng rng(seed);
        ClientSession session(secret(), cfg, payload, rng);
        ClientLimits limits{std::chrono::milliseconds(2000), 5};
        run_client_transfer(transport, session, limits, rng);
        return session.id();
    };
    auto fa = std::async(std::launch::async, run_one, payload_a, 100);
    auto fb = std::async(std::launch::async, run_one, payload_b, 200);
    std::uint8_t id_a = fa.get();
    std::uint8_t id_b = fb.get();
    ASSERT_NE(id_a, id_b); // seeds 100/200 give distinct ids
    std::lock_guard lock(done_mutex);
    EXPECT_EQ(completed[id_a], payload_a);
    EXPECT_EQ(completed[id_b], payload_b);
    server.stop();
}

TEST(Config, FileParsingAndOverrides) {
    std::string path = testing::TempDir() + "burrow_cfg_test.conf";
    {
        std::ofstream out(path);
        out << "# channel settings\n"
            << "domain = Example.ORG\n"
            << "secret = hunter2\n"
            << "resolver = 10.0.0.5:5353\n"
            << "tag_len = 8\n"
            << "msg_min = 3\n"
            << "msg_max = 12\n"
            << "candidates = CNAME,TXT\n"
            << "timeout = 120\n"
            << "rto = 750\n"
            << "loss = 0.25\n"
            << "seed = 42\n";
    }
    ChannelConfig cfg;
    apply_config_file(path, cfg);
    EXPECT_EQ(cfg.domain, "Example.ORG");
    EXPECT_EQ(cfg.secret, to_bytes("hunter2"));
    EXPECT_EQ(cfg.resolver_host, "10.0.0.5");
    EXPECT_EQ(cfg.resolver_port, 5353);
    EXPECT_EQ(cfg.tag_len, 8u);
    EXPECT_EQ(cfg.timeout_s, 120.0);
    EXPECT_EQ(cfg.rto.count(), 750);
    EXPECT_DOUBLE_EQ(cfg.faults.loss, 0.25);
    ASSERT_TRUE(cfg.seed.has_value());
    EXPECT_EQ(*cfg.seed, 42u);

    WireConfig wire = cfg.wire_config();
    EXPECT_EQ(wire.domain.suffix, "example.org");
    EXPECT_EQ(wire.policy.msg_min, 3u);
    EXPECT_EQ(wire.policy.msg_max, 12u);
    ASSERT_EQ(wire.candidate_types.size(), 2u);
    EXPECT_EQ(wire.candidate_types[0], RecordType::CNAME);
    std::remove(path.c_str());
}

TEST(Config, ValidationErrors) {
    ChannelConfig cfg;
    cfg.domain = "nodots";
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.domain = "test.com";
    cfg.tag_len = 17;
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.tag_len = 4;
    cfg.msg_min = 10;
    cfg.msg_max = 5;
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.msg_min = 2;
    cfg.msg_max = 200; // beyond test.com capacity of 151
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.msg_max = 10;
    cfg.candidates = std::vector<RecordType>{};
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.candidates = std::vector<RecordType>{RecordType::MX};
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.candidates.reset();
    cfg.faults.loss = 1.5;
    EXPECT_THROW(cfg.wire_config(), ConfigError);
    cfg.faults.loss = 0.0;
    EXPECT_NO_THROW(cfg.wire_config());
}

TEST(Config, UnknownKeyRejected) {
    std::string path = testing::TempDir() + "burrow_cfg_bad.conf";
    {
        std::ofstream out(path);
        out << "domian = test.com\n"; // typo
    }
    ChannelConfig cfg;
    EXPECT_THROW(apply_config_file(path, cfg), ConfigError);
    std::remove(path.c_str());
}

TEST(Config, SecretFromEnvironment) {
    ChannelConfig cfg;
    ::setenv("DNSBURROW_SECRET", "env-provided", 1);
    load_secret(cfg, "");
    EXPECT_EQ(cfg.secret, to_bytes("env-provided"));
    ::unsetenv("DNSBURROW_SECRET");
}

TEST(Config, SecretFileTrimsTrailingNewline) {
    std::string path = testing::TempDir() + "burrow_secret.txt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "file-secret\n";
    }
    ChannelConfig cfg;
    load_secret(cfg, path);
    EXPECT_EQ(cfg.secret, to_bytes("file-secret"));
    std::remove(path.c_str());
}

} // namespace
} // namespace dnsburrow
