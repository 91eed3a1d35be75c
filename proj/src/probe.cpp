#include "cirrus/probe.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <stdexcept>

namespace cirrus::probe {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'P', 'X', '1'};

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.push_back(static_cast<std::uint8_t>(v >> 24));
    buf.push_back(static_cast<std::uint8_t>(v >> 16));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
    buf.push_back(static_cast<std::uint8_t>(v));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    put_u32(buf, static_cast<std::uint32_t>(v >> 32));
    put_u32(buf, static_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::uint64_t get_u64(const std::uint8_t* p) {
    return (std::uint64_t(get_u32(p)) << 32) | get_u32(p + 4);
}

std::uint64_t monotonic_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

double wall_unix_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

bool send_all(int fd, const std::uint8_t* data, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
        ssize_t n = ::send(fd, data + off, len - off, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && (errno == EINTR)) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

} // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    std::vector<std::uint8_t> buf;
    buf.reserve(kHeaderBytes + frame.payload.size());
    buf.insert(buf.end(), kMagic, kMagic + 4);
    buf.push_back(static_cast<std::uint8_t>(frame.kind));
    put_u64(buf, frame.seq);
    put_u64(buf, frame.client_send_ns);
    put_u32(buf, static_cast<std::uint32_t>(frame.payload.size()));
    buf.insert(buf.end(), frame.payload.begin(), frame.payload.end());
    return buf;
}

std::optional<Frame> decode_frame(const std::uint8_t* data, std::size_t len,
                                  std::size_t* consumed) {
    if (len < kHeaderBytes) return std::nullopt;
    if (std::memcmp(data, kMagic, 4) != 0) throw std::runtime_error("bad frame magic");
    std::uint8_t kind = data[4];
    if (kind > 1) throw std::runtime_error("bad frame kind");
    std::uint32_t payload_len = get_u32(data + 21);
    if (len < kHeaderBytes + payload_len) return std::nullopt;
    Frame f;
    f.kind = static_cast<FrameKind>(kind);
    f.seq = get_u64(data + 5);
    f.client_send_ns = get_u64(data + 13);
    f.payload.assign(data + kHeaderBytes, data + kHeaderBytes + payload_len);
    *consumed = kHeaderBytes + payload_len;
    return f;
}

Frame make_request(std::uint64_t seq, std::uint64_t client_send_ns) {
    Frame f;
    f.kind = FrameKind::Request;
    f.seq = seq;
    f.client_send_ns = client_send_ns;
    f.payload.assign(kRequestFrameBytes - kHeaderBytes, 0xA5);
    return f;
}

Frame make_ack(const Frame& request) {
    Frame f;
    f.kind = FrameKind::Ack;
    f.seq = request.seq;
    f.client_send_ns = request.client_send_ns;
    f.payload.assign(kAckFrameBytes - kHeaderBytes, 0x5A);
    return f;
}

Endpoint parse_endpoint(const std::string& text) {
    auto colon = text.rfind(':');
    if (colon == std::string::npos || colon + 1 >= text.size())
        throw std::invalid_argument("endpoint must be host:port, got: " + text);
    Endpoint ep;
    ep.host = text.substr(0, colon);
    if (ep.host.empty()) ep.host = "0.0.0.0";
    int port = std::stoi(text.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::invalid_argument("bad port in: " + text);
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

ProbeServer::ProbeServer(ServerOptions options) : options_(std::move(options)) {}

ProbeServer::~ProbeServer() { stop(); }

void ProbeServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.bind.port);
    if (::inet_pton(AF_INET, options_.bind.host.c_str(), &addr.sin_addr) != 1)
        addr.sin_addr.s_addr = INADDR_ANY;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("bind failed: " + std::string(strerror(errno)));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 16) != 0) throw std::runtime_error("listen failed");
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void ProbeServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard lock(clients_mu_);
    for (auto& t : client_threads_) {
        if (t.joinable()) t.join();
    }
    client_threads_.clear();
}

void ProbeServer::accept_loop() {
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (running_ && errno == EINTR) continue;
            break;
        }
        std::lock_guard lock(clients_mu_);
        client_threads_.emplace_back([this, fd] { serve_client(fd); });
    }
}

void ProbeServer::serve_client(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    // Delayed acks go through a writer thread so the injected per-ack delay
    // shifts every response without serializing throughput behind the sleep.
    struct DelayedAck {
        std::chrono::steady_clock::time_point due;
        std::vector<std::uint8_t> bytes;
    };
    std::mutex ack_mu;
    std::condition_variable ack_cv;
    std::deque<DelayedAck> ack_queue;
    bool done = false;
    std::thread writer;
    const bool delayed = options_.ack_delay_ms > 0;
    if (delayed) {
        writer = std::thread([&] {
            std::unique_lock lock(ack_mu);
            while (true) {
                ack_cv.wait(lock, [&] { return done || !ack_queue.empty(); });
                if (ack_queue.empty()) {
                    if (done) return;
                    continue;
                }
                auto due = ack_queue.front().due;
                if (ack_cv.wait_until(lock, due, [&] { return done && ack_queue.empty(); }))
                    return;
                if (ack_queue.empty() || std::chrono::steady_clock::now() < ack_queue.front().due)
                    continue;
                auto ack = std::move(ack_queue.front());
                ack_queue.pop_front();
                lock.unlock();
                bool ok = send_all(fd, ack.bytes.data(), ack.bytes.size());
                lock.lock();
                if (!ok) return;
            }
        });
    }

    std::vector<std::uint8_t> buf;
    std::uint8_t chunk[16384];
    bool stalled = false;
    while (running_) {
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) break; // disconnect or partial frame at EOF: just close
        buf.insert(buf.end(), chunk, chunk + n);
        std::size_t off = 0;
        bool broken = false;
        try {
            while (true) {
                std::size_t consumed = 0;
                auto frame = decode_frame(buf.data() + off, buf.size() - off, &consumed);
                if (!frame) break;
                off += consumed;
                if (frame->kind != FrameKind::Request) throw std::runtime_error("expected request");
                if (!stalled && frame->seq >= options_.stall_after_seq && options_.stall_ms > 0) {
                    stalled = true;
                    std::this_thread::sleep_for(
                        std::chrono::duration<double, std::milli>(options_.stall_ms));
                }
                auto ack = encode_frame(make_ack(*frame));
                if (delayed) {
                    auto due = std::chrono::steady_clock::now() +
                               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double, std::milli>(options_.ack_delay_ms));
                    std::lock_guard lock(ack_mu);
                    ack_queue.push_back({due, std::move(ack)});
                    ack_cv.notify_all();
                } else if (!send_all(fd, ack.data(), ack.size())) {
                    broken = true;
                    break;
                }
            }
        } catch (const std::exception&) {
            broken = true; // malformed frame: close this connection, keep serving others
        }
        if (broken) break;
        buf.erase(buf.begin(), buf.begin() + static_cast<long>(off));
    }
    if (delayed) {
        {
            std::lock_guard lock(ack_mu);
            done = true;
            ack_cv.notify_all();
        }
        writer.join();
    }
    ::close(fd);
}

ProbeResult run_probe(const ProbeConfig& config) {
    if (config.rate_hz <= 0.0) throw std::invalid_argument("rate_hz must be positive");
    if (config.backlog_limit < 1) throw std::invalid_argument("backlog_limit must be >= 1");
    if (config.frame_bytes < kHeaderBytes)
        throw std::invalid_argument("frame_bytes below header size");

    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(config.target.port);
    if (::inet_pton(AF_INET, config.target.host.c_str(), &addr.sin_addr) != 1) {
        hostent* he = ::gethostbyname(config.target.host.c_str());
        if (!he) {
            ::close(fd);
            throw std::runtime_error("cannot resolve host: " + config.target.host);
        }
        std::memcpy(&addr.sin_addr, he->h_addr, sizeof(addr.sin_addr));
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw std::runtime_error("connect failed: " + std::string(strerror(errno)));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    ProbeResult result;
    // In-flight ledger shared by the sender and the receiver.
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::uint64_t, std::pair<std::uint64_t, double>> inflight; // seq -> (mono ns, unix ms)
    bool receiver_dead = false;

    std::thread receiver([&] {
        std::vector<std::uint8_t> buf;
        std::uint8_t chunk[16384];
        while (true) {
            ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
            if (n <= 0) break;
            buf.insert(buf.end(), chunk, chunk + n);
            std::size_t off = 0;
            try {
                while (true) {
                    std::size_t consumed = 0;
                    auto frame = decode_frame(buf.data() + off, buf.size() - off, &consumed);
                    if (!frame) break;
                    off += consumed;
                    std::uint64_t now_ns = monotonic_ns();
                    std::lock_guard lock(mu);
                    auto it = inflight.find(frame->seq);
                    if (it == inflight.end() || it->second.first != frame->client_send_ns) {
                        ++result.stats.unmatched;
                        continue;
                    }
                    double rtt_ms = static_cast<double>(now_ns - it->second.first) / 1e6;
                    result.trace.samples.push_back(
                        {frame->seq, it->second.second, rtt_ms < 0.001 ? 0.001 : rtt_ms});
                    inflight.erase(it);
                    ++result.stats.acked;
                    cv.notify_all();
                }
            } catch (const std::exception&) {
                break;
            }
            buf.erase(buf.begin(), buf.begin() + static_cast<long>(off));
        }
        std::lock_guard lock(mu);
        receiver_dead = true;
        cv.notify_all();
    });

    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / config.rate_hz));
    const auto t0 = std::chrono::steady_clock::now();
    const auto deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(config.duration_s));
    const std::size_t payload_bytes = config.frame_bytes - kHeaderBytes;
    bool aborted = false;

    std::uint64_t seq = 0;
    for (auto next_send = t0; next_send < deadline; next_send += period, ++seq) {
        std::this_thread::sleep_until(next_send);
        {
            std::unique_lock lock(mu);
            if (receiver_dead) {
                aborted = true;
                break;
            }
            result.stats.max_inflight_at_send =
                std::max(result.stats.max_inflight_at_send, inflight.size());
            if (inflight.size() > config.backlog_limit) {
                // Backlog guard: pause new sends until everything in flight
                // drains, so queueing does not inflate the measured RTTs.
                ++result.stats.pauses;
                auto pause_start = std::chrono::steady_clock::now();
                cv.wait(lock, [&] { return inflight.empty() || receiver_dead; });
                double pause_ms = std::chrono::duration<double, std::milli>(
                                      std::chrono::steady_clock::now() - pause_start)
                                      .count();
                result.trace.pauses.emplace_back(seq, pause_ms);
                if (receiver_dead) {
                    aborted = true;
                    break;
                }
                next_send = std::chrono::steady_clock::now();
            }
        }
        Frame req = make_request(seq, monotonic_ns());
        req.payload.assign(payload_bytes, 0xA5);
        {
            std::lock_guard lock(mu);
            inflight.emplace(req.seq, std::make_pair(req.client_send_ns, wall_unix_ms()));
        }
        auto bytes = encode_frame(req);
        if (!send_all(fd, bytes.data(), bytes.size())) {
            aborted = true;
            break;
        }
        ++result.stats.sent;
    }

    // Let stragglers land before closing.
    {
        std::unique_lock lock(mu);
        cv.wait_for(lock, std::chrono::seconds(2), [&] { return inflight.empty() || receiver_dead; });
    }
    ::shutdown(fd, SHUT_RDWR);
    receiver.join();
    ::close(fd);

    std::sort(result.trace.samples.begin(), result.trace.samples.end(),
              [](const auto& a, const auto& b) { return a.seq < b.seq; });
    result.complete = !aborted;
    if (!config.output_path.empty()) netsim::write_trace_csv(result.trace, config.output_path);
    return result;
}

} // namespace cirrus::probe
