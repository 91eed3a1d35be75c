#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace cirrus {

// Relative ordering of events that share an instant. Responses are processed
// before timers so that a result arriving exactly at its deadline still counts
// as on time.
enum class EventRank : int {
    Message = 0,
    Local = 1,
    Timer = 2,
    Control = 3,
};

// Discrete-event queue keyed by (instant, rank, insertion sequence).
class EventQueue {
public:
    using Action = std::function<void()>;

    void schedule(double at_ms, EventRank rank, Action action) {
        if (at_ms < now_) at_ms = now_;
        heap_.push(Event{at_ms, static_cast<int>(rank), next_seq_++, std::move(action)});
    }

    void schedule_in(double delay_ms, EventRank rank, Action action) {
        schedule(now_ + delay_ms, rank, std::move(action));
    }

    double now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }

    // Processes events with instant <= t_end_ms. Returns number processed.
    std::size_t run_until(double t_end_ms) {
        std::size_t n = 0;
        while (!heap_.empty() && heap_.top().at <= t_end_ms) {
            Event ev = heap_.top();
            heap_.pop();
            now_ = ev.at;
            ev.action();
            ++n;
        }
        if (now_ < t_end_ms) now_ = t_end_ms;
        return n;
    }

    std::size_t run_all(std::size_t max_events = SIZE_MAX) {
        std::size_t n = 0;
        while (!heap_.empty() && n < max_events) {
            Event ev = heap_.top();
            heap_.pop();
            now_ = ev.at;
            ev.action();
            ++n;
        }
        return n;
    }

private:
    struct Event {
        double at;
        int rank;
        std::uint64_t seq;
        Action action;
        bool operator>(const Event& o) const {
            if (at != o.at) return at > o.at;
            if (rank != o.rank) return rank > o.rank;
            return seq > o.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, std::greater<>> heap_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
};

} // namespace cirrus
