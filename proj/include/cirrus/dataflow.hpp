#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <typeindex>
#include <vector>

#include "cirrus/collation.hpp"
#include "cirrus/netsim.hpp"
#include "cirrus/sim_clock.hpp"

namespace cirrus {

struct Envelope {
    std::string stream_id;
    LogicalTimestamp timestamp; // assigned by the receiving operator on delivery
    std::any payload;
    double emit_time_ms = 0.0;
};

struct Port {
    std::string stream;
    std::type_index type;
};

template <typename T>
Port port(std::string stream) {
    return Port{std::move(stream), std::type_index(typeid(T))};
}

class OperatorContext;

struct OperatorSpec {
    std::string id;
    std::vector<Port> inputs;
    std::vector<Port> outputs;
    std::function<void(OperatorContext&)> setup;
    std::function<void(OperatorContext&, const Envelope&)> on_message;
};

// Directed operator graph. Every stream has exactly one sender (the operator
// declaring it as an output); receivers subscribe via connect().
class Graph {
public:
    void add_operator(OperatorSpec spec);
    void connect(const std::string& from_op, const std::string& stream, const std::string& to_op);

    const OperatorSpec* find(const std::string& id) const;
    std::size_t operator_count() const { return operators_.size(); }

private:
    friend class Runtime;

    struct StreamInfo {
        std::type_index type;
        std::string sender;
        std::vector<std::string> receivers;
    };

    std::map<std::string, OperatorSpec> operators_;
    std::vector<std::string> operator_order_;
    std::map<std::string, StreamInfo> streams_;
};

struct LogEntry {
    double instant_ms;
    std::string op;
    std::string event;
    std::int64_t timestamp; // -1 when not tied to a message
    std::string detail;
};

// Message carried to a cloud endpoint, plus the handler-chosen relative
// deadline for the response.
struct CloudRequest {
    std::any message;
    double relative_deadline_ms;
};

using MsgHandler =
    std::function<std::optional<CloudRequest>(const std::any& input, LogicalTimestamp t)>;

struct CloudRegistration {
    std::shared_ptr<netsim::CloudService> handle;
    std::type_index type_tag; // request message type accepted by the endpoint
    MsgHandler msg_handler;
    Priority priority = 1;
    std::size_t request_bytes = 0;
};

class Runtime;

// Handed to operator callbacks; the only way operators interact with the
// runtime. Sends from cloud-enabled operators are intercepted by collation.
class OperatorContext {
public:
    double now() const;
    std::uint64_t seed() const;
    LogicalTimestamp timestamp() const; // of the message being processed

    void send(const std::string& stream, std::any payload);
    // Models compute latency: performs the send at now + delay_ms, attributed
    // to the timestamp of the message being processed.
    void complete_after(double delay_ms, const std::string& stream, std::any payload);
    void schedule(double delay_ms, std::function<void(OperatorContext&)> fn);

    // Registers a cloud implementation for this operator. Setup-time only;
    // priorities must be unique and greater than the local priority.
    void use_cloud(CloudRegistration registration);

private:
    friend class Runtime;
    Runtime* runtime_ = nullptr;
    std::string op_id_;
    bool in_setup_ = false;
    std::optional<LogicalTimestamp> current_t_;
};

class Runtime {
public:
    Runtime(Graph graph, std::uint64_t seed = 0);
    // Operator contexts and scheduled events hold back-pointers to the
    // runtime, so it must stay where it was constructed.
    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    // Runs all setup hooks; invoked automatically by run_until on first use.
    void start();

    std::size_t run_until(double t_end_ms);
    std::size_t run_all(std::size_t max_events = 1u << 24);

    double now() const { return queue_.now(); }
    EventQueue& queue() { return queue_; }
    std::uint64_t seed() const { return seed_; }

    const std::vector<LogEntry>& log() const { return log_; }
    void write_log_csv(std::ostream& out) const;

    bool halted(const std::string& op_id) const;
    const Collator* collator(const std::string& op_id) const;

    // Depth threshold / bandwidth for an operator's outbound queue; applies
    // to requests dispatched after the call.
    void configure_outbound(const std::string& op_id, std::size_t depth_threshold,
                            double bytes_per_ms);

private:
    struct SpecState {
        std::map<Priority, CloudRegistration> registrations;
        Collator collator;
        OutboundQueue queue{30, 0.0};
        std::uint64_t draws = 0;
        std::string output_stream;
    };

    struct OpState {
        const OperatorSpec* spec = nullptr;
        std::uint64_t counter = 0;
        bool halted = false;
        OperatorContext ctx;
        std::unique_ptr<SpecState> spec_state;
    };

    friend class OperatorContext;

    void deliver(const std::string& stream, std::any payload, double emit_time);
    void process(OpState& op, Envelope env);
    void dispatch_requests(OpState& op, const Envelope& env);
    void intercepted_send(OpState& op, LogicalTimestamp t, const std::string& stream,
                          std::any payload);
    void emit(OpState& op, const std::string& stream, LogicalTimestamp t, std::any payload);
    void add_log(const std::string& op, const std::string& event, std::int64_t t,
                 std::string detail);
    OpState& state(const std::string& id);

    Graph graph_;
    std::uint64_t seed_;
    EventQueue queue_;
    std::map<std::string, std::unique_ptr<OpState>> ops_;
    std::vector<LogEntry> log_;
    bool started_ = false;
};

} // namespace cirrus
