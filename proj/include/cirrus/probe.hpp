#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cirrus/netsim.hpp"

namespace cirrus::probe {

// Wire frame, 25-byte header + payload:
//   magic "SPX1" | kind u8 (0=request, 1=ack) | seq u64be |
//   client_send_ns u64be | payload_len u32be | payload
inline constexpr std::size_t kHeaderBytes = 25;
inline constexpr std::size_t kRequestFrameBytes = 33300;
inline constexpr std::size_t kAckFrameBytes = 1024;

enum class FrameKind : std::uint8_t { Request = 0, Ack = 1 };

struct Frame {
    FrameKind kind = FrameKind::Request;
    std::uint64_t seq = 0;
    std::uint64_t client_send_ns = 0;
    std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
// Parses one frame from buf; returns nullopt if more bytes are needed.
// Throws on bad magic or kind. On success, *consumed is the frame size.
std::optional<Frame> decode_frame(const std::uint8_t* data, std::size_t len,
                                  std::size_t* consumed);

Frame make_request(std::uint64_t seq, std::uint64_t client_send_ns);
Frame make_ack(const Frame& request);

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};
Endpoint parse_endpoint(const std::string& text); // "host:port"

struct ServerOptions {
    Endpoint bind;
    double ack_delay_ms = 0.0; // test hook: fixed extra delay before each ack
    // Test hook: stop acking for stall_ms once stall_after_seq is reached.
    std::uint64_t stall_after_seq = UINT64_MAX;
    double stall_ms = 0.0;
};

// Echo server for probe frames. start() binds and serves on background
// threads until stop(); handles concurrent clients.
class ProbeServer {
public:
    explicit ProbeServer(ServerOptions options);
    ~ProbeServer();

    void start(); // throws if the port cannot be bound
    void stop();
    std::uint16_t port() const { return port_; } // actual port after bind

private:
    void accept_loop();
    void serve_client(int fd);

    ServerOptions options_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> client_threads_;
    std::mutex clients_mu_;
};

struct ProbeConfig {
    Endpoint target;
    double rate_hz = 30.0;
    double duration_s = 60.0;
    std::size_t frame_bytes = kRequestFrameBytes;
    std::size_t backlog_limit = 30;
    std::string output_path; // empty = do not write
};

struct ProbeStats {
    std::size_t sent = 0;
    std::size_t acked = 0;
    std::size_t unmatched = 0;
    std::size_t pauses = 0;
    std::size_t max_inflight_at_send = 0; // in-flight observed at send decisions
};

struct ProbeResult {
    netsim::LatencyTrace trace;
    ProbeStats stats;
    bool complete = false; // full duration ran and the connection survived
};

// Sends request frames on a fixed-interval schedule and records RTTs from the
// matching acks. When in-flight exceeds backlog_limit at a send decision, new
// sends pause until the backlog fully drains.
ProbeResult run_probe(const ProbeConfig& config);

} // namespace cirrus::probe
