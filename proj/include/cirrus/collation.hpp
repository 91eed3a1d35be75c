#pragma once

#include <any>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>

namespace cirrus {

struct LogicalTimestamp {
    std::uint64_t value = 0;
    auto operator<=>(const LogicalTimestamp&) const = default;
};

// Larger value = preferred result. Local computation is pinned to the minimum.
using Priority = int;
inline constexpr Priority kLocalPriority = 0;

enum class Decision { Forward, Cache, Drop, NoOp };

const char* to_string(Decision d);

// Per-operator cache/drop/forward state machine. Exactly one result is
// forwarded per timestamp: the highest-priority result available when either
// a response arrives with no higher-priority request outstanding, or a
// deadline timer fires.
//
// The machine is purely order-driven: it carries no clock. "Missed deadline"
// means the request's timer event was delivered before its response.
class Collator {
public:
    struct ForwardedMsg {
        LogicalTimestamp timestamp;
        Priority priority = kLocalPriority;
        std::any payload;
    };

    // Must be called when a cloud request is dispatched, before any response
    // or timer event for (t, priority) is delivered.
    void note_dispatch(LogicalTimestamp t, Priority priority);

    // Local callback completed for t. Forward / Cache / Drop.
    Decision on_local_result(LogicalTimestamp t, std::any msg);

    // Cloud response for (t, priority). Forward / Cache / Drop.
    Decision on_cloud_response(LogicalTimestamp t, Priority priority, std::any msg);

    // Deadline timer for (t, priority) fired. Forward (from cache) / NoOp.
    Decision on_timer_fire(LogicalTimestamp t, Priority priority);

    // Set when the last decision was Forward; cleared by take_forwarded().
    std::optional<ForwardedMsg> take_forwarded();

    bool sent(LogicalTimestamp t) const;
    bool timer_active(LogicalTimestamp t, Priority priority) const;
    std::size_t forwards() const { return forwards_; }

    // Drops state for timestamps below the watermark. Callers use this to
    // bound memory on long runs; collation never needs a record again once
    // every event source for its timestamp has been delivered.
    void discard_below(LogicalTimestamp watermark);

private:
    struct Request {
        bool responded = false;
        bool fired = false;
        bool timer_active = true;
    };

    struct Record {
        std::map<Priority, Request> requests;
        std::optional<std::pair<Priority, std::any>> cache;
        bool sent = false;
    };

    Record& record(LogicalTimestamp t) { return records_[t.value]; }
    bool higher_priority_pending(const Record& r, Priority than) const;
    void forward(Record& r, LogicalTimestamp t, Priority p, std::any msg);
    void cache_result(Record& r, Priority p, std::any msg);

    std::map<std::uint64_t, Record> records_;
    std::optional<ForwardedMsg> forwarded_;
    std::size_t forwards_ = 0;
};

// Admission-controlled FIFO feeding the uplink. Entries occupy the queue
// until their serialization at `bytes_per_ms` completes; `bytes_per_ms == 0`
// means unconstrained bandwidth (entries leave immediately).
class OutboundQueue {
public:
    explicit OutboundQueue(std::size_t depth_threshold = 30, double bytes_per_ms = 0.0)
        : threshold_(depth_threshold), bytes_per_ms_(bytes_per_ms) {}

    // True iff a request may be enqueued now (depth < threshold).
    bool admit(double now_ms) {
        drain(now_ms);
        return entries_.size() < threshold_;
    }

    // Enqueues and returns the instant serialization completes.
    double push(double now_ms, std::size_t bytes) {
        drain(now_ms);
        double start = entries_.empty() ? now_ms : std::max(now_ms, entries_.back());
        double finish = start + (bytes_per_ms_ > 0.0 ? static_cast<double>(bytes) / bytes_per_ms_ : 0.0);
        entries_.push_back(finish);
        return finish;
    }

    std::size_t depth(double now_ms) {
        drain(now_ms);
        return entries_.size();
    }

    std::size_t depth_threshold() const { return threshold_; }

private:
    void drain(double now_ms) {
        while (!entries_.empty() && entries_.front() <= now_ms) entries_.pop_front();
    }

    std::size_t threshold_;
    double bytes_per_ms_;
    std::deque<double> entries_; // per-entry serialization finish instants
};

} // namespace cirrus
