#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <thread>

#include "cirrus/netsim.hpp"
#include "cirrus/probe.hpp"

using namespace cirrus;
using namespace cirrus::probe;

TEST_CASE("frame codec round trip and fixed wire sizes") {
    Frame req = make_request(7, 123456789);
    auto bytes = encode_frame(req);
    CHECK(bytes.size() == kRequestFrameBytes);

    std::size_t consumed = 0;
    auto back = decode_frame(bytes.data(), bytes.size(), &consumed);
    REQUIRE(back.has_value());
    CHECK(consumed == bytes.size());
    CHECK(back->kind == FrameKind::Request);
    CHECK(back->seq == 7);
    CHECK(back->client_send_ns == 123456789);

    Frame ack = make_ack(req);
    auto ack_bytes = encode_frame(ack);
    CHECK(ack_bytes.size() == kAckFrameBytes);
    CHECK(ack.seq == req.seq); // echo contract
    CHECK(ack.client_send_ns == req.client_send_ns);
}

TEST_CASE("decoder waits for complete frames and rejects garbage") {
    auto bytes = encode_frame(make_request(1, 2));
    std::size_t consumed = 0;
    CHECK_FALSE(decode_frame(bytes.data(), 10, &consumed).has_value());
    CHECK_FALSE(decode_frame(bytes.data(), bytes.size() - 1, &consumed).has_value());

    std::vector<std::uint8_t> garbage(64, 0xFF);
    CHECK_THROWS(decode_frame(garbage.data(), garbage.size(), &consumed));

    auto bad_kind = bytes;
    bad_kind[4] = 9;
    CHECK_THROWS(decode_frame(bad_kind.data(), bad_kind.size(), &consumed));
}

TEST_CASE("endpoint parsing") {
    Endpoint ep = parse_endpoint("10.1.2.3:9377");
    CHECK(ep.host == "10.1.2.3");
    CHECK(ep.port == 9377);
    CHECK(parse_endpoint(":8080").host == "0.0.0.0");
    CHECK_THROWS(parse_endpoint("nohost"));
    CHECK_THROWS(parse_endpoint("h:0"));
    CHECK_THROWS(parse_endpoint("h:70000"));
}

namespace {

ServerOptions local_opts(double ack_delay_ms = 0.0) {
    ServerOptions o;
    o.bind = {"127.0.0.1", 0};
    o.ack_delay_ms = ack_delay_ms;
    return o;
}

ProbeConfig client_config(std::uint16_t port) {
    ProbeConfig cfg;
    cfg.target = {"127.0.0.1", port};
    return cfg;
}

} // namespace

TEST_CASE("loopback run acks every request") {
    ProbeServer server(local_opts());
    server.start();
    ProbeConfig cfg = client_config(server.port());
    cfg.rate_hz = 200.0;
    cfg.duration_s = 0.5;
    cfg.frame_bytes = 2048;
    ProbeResult result = run_probe(cfg);
    server.stop();

    CHECK(result.complete);
    CHECK(result.stats.sent >= 90);
    CHECK(result.stats.acked == result.stats.sent);
    CHECK(result.stats.unmatched == 0);
    // Per-client sequence numbers come back in order after the final sort.
    for (std::size_t i = 0; i < result.trace.samples.size(); ++i)
        CHECK(result.trace.samples[i].seq == i);
}

TEST_CASE("injected 50 ms server delay shows up in the measured median") {
    ProbeServer real(local_opts(50.0));
    real.start();
    ProbeConfig cfg = client_config(real.port());
    cfg.rate_hz = 30.0;
    cfg.duration_s = 3.0;
    cfg.frame_bytes = 2048;
    ProbeResult result = run_probe(cfg);
    real.stop();

    REQUIRE(result.stats.acked > 0);
    double median = netsim::percentiles(result.trace, {50.0})[0];
    CHECK(median >= 50.0);
    CHECK(median <= 55.0);
}

TEST_CASE("three concurrent clients each get their own acks") {
    ProbeServer server(local_opts());
    server.start();
    std::vector<ProbeResult> results(3);
    std::vector<std::thread> clients;
    for (int i = 0; i < 3; ++i) {
        clients.emplace_back([&, i] {
            ProbeConfig cfg = client_config(server.port());
            cfg.rate_hz = 500.0;
            cfg.duration_s = 0.2;
            cfg.frame_bytes = 1024;
            results[i] = run_probe(cfg);
        });
    }
    for (auto& t : clients) t.join();
    server.stop();

    for (const auto& r : results) {
        CHECK(r.complete);
        CHECK(r.stats.acked == r.stats.sent);
        CHECK(r.stats.unmatched == 0);
        for (std::size_t i = 0; i < r.trace.samples.size(); ++i)
            CHECK(r.trace.samples[i].seq == i);
    }
}

TEST_CASE("garbage magic closes one connection, the server keeps serving") {
    ProbeServer server(local_opts());
    server.start();

    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(server.port());
    inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    const char junk[64] = "this is not a probe frame";
    ::send(fd, junk, sizeof(junk), 0);
    char buf[16];
    CHECK(::recv(fd, buf, sizeof(buf), 0) == 0); // server closed on us
    ::close(fd);

    ProbeConfig cfg = client_config(server.port());
    cfg.rate_hz = 100.0;
    cfg.duration_s = 0.2;
    cfg.frame_bytes = 1024;
    ProbeResult result = run_probe(cfg);
    server.stop();
    CHECK(result.complete);
    CHECK(result.stats.acked == result.stats.sent);
}

TEST_CASE("a stalled server engages the backlog guard") {
    ServerOptions opts;
    opts.bind = {"127.0.0.1", 0};
    opts.stall_after_seq = 5;
    opts.stall_ms = 1500.0;
    ProbeServer server(opts);
    server.start();

    ProbeConfig cfg = client_config(server.port());
    cfg.rate_hz = 100.0;
    cfg.duration_s = 3.0;
    cfg.frame_bytes = 512; // small frames so the kernel buffers never block sends
    cfg.backlog_limit = 30;
    ProbeResult result = run_probe(cfg);
    server.stop();

    CHECK(result.complete);
    CHECK(result.stats.pauses >= 1);
    CHECK(result.trace.pauses.size() == result.stats.pauses);
    // The guard lets at most one send past the threshold.
    CHECK(result.stats.max_inflight_at_send <= cfg.backlog_limit + 1);
    CHECK(result.stats.max_inflight_at_send >= cfg.backlog_limit);
}

TEST_CASE("written trace loads through the replay model with zero loss") {
    ProbeServer server(local_opts());
    server.start();
    std::string path = "probe_test_trace.csv";
    ProbeConfig cfg = client_config(server.port());
    cfg.rate_hz = 200.0;
    cfg.duration_s = 0.3;
    cfg.frame_bytes = 1024;
    cfg.output_path = path;
    ProbeResult result = run_probe(cfg);
    server.stop();

    netsim::LatencyTrace loaded = netsim::read_trace_csv(path);
    std::remove(path.c_str());
    REQUIRE(loaded.samples.size() == result.trace.samples.size());
    auto shared = std::make_shared<netsim::LatencyTrace>(loaded);
    netsim::LatencyModel replay{netsim::TraceReplay{shared, false}};
    for (std::size_t i = 0; i < loaded.samples.size(); ++i) {
        CHECK(replay.sample(i) == loaded.samples[i].rtt_ms);
        CHECK(loaded.samples[i].seq == result.trace.samples[i].seq);
    }
}

TEST_CASE("probe configuration is validated") {
    ProbeConfig cfg = client_config(1);
    cfg.rate_hz = 0.0;
    CHECK_THROWS(run_probe(cfg));
    cfg.rate_hz = 30.0;
    cfg.backlog_limit = 0;
    CHECK_THROWS(run_probe(cfg));
    cfg.backlog_limit = 30;
    cfg.frame_bytes = 10;
    CHECK_THROWS(run_probe(cfg));
    // Unreachable target: diagnostic, not a crash.
    cfg.frame_bytes = 1024;
    cfg.target = {"127.0.0.1", 1};
    CHECK_THROWS(run_probe(cfg));
}
