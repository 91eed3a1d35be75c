#include "cirrus/collation.hpp"

#include <utility>

namespace cirrus {

const char* to_string(Decision d) {
    switch (d) {
    case Decision::Forward: return "forward";
    case Decision::Cache: return "cache";
    case Decision::Drop: return "drop";
    case Decision::NoOp: return "noop";
    }
    return "?";
}

void Collator::note_dispatch(LogicalTimestamp t, Priority priority) {
    record(t).requests.emplace(priority, Request{});
}

bool Collator::higher_priority_pending(const Record& r, Priority than) const {
    for (const auto& [p, req] : r.requests) {
        if (p > than && !req.responded && !req.fired) return true;
    }
    return false;
}

void Collator::forward(Record& r, LogicalTimestamp t, Priority p, std::any msg) {
    r.sent = true;
    for (auto& [q, req] : r.requests) req.timer_active = false;
    r.cache.reset();
    forwarded_ = ForwardedMsg{t, p, std::move(msg)};
    ++forwards_;
}

void Collator::cache_result(Record& r, Priority p, std::any msg) {
    if (!r.cache || r.cache->first < p) r.cache = {p, std::move(msg)};
}

Decision Collator::on_local_result(LogicalTimestamp t, std::any msg) {
    Record& r = record(t);
    if (r.sent) return Decision::Drop;
    if (higher_priority_pending(r, kLocalPriority)) {
        cache_result(r, kLocalPriority, std::move(msg));
        return Decision::Cache;
    }
    forward(r, t, kLocalPriority, std::move(msg));
    return Decision::Forward;
}

Decision Collator::on_cloud_response(LogicalTimestamp t, Priority priority, std::any msg) {
    Record& r = record(t);
    auto it = r.requests.find(priority);
    if (it == r.requests.end()) return Decision::Drop; // unknown (t, p): defensive
    Request& req = it->second;
    if (req.fired) return Decision::Drop; // missed its deadline
    req.responded = true;
    if (r.sent) {
        req.timer_active = false;
        return Decision::Drop;
    }
    if (higher_priority_pending(r, priority)) {
        // The request's own timer stays armed: its deadline still bounds the
        // total wait for the higher-priority result.
        cache_result(r, priority, std::move(msg));
        return Decision::Cache;
    }
    forward(r, t, priority, std::move(msg));
    return Decision::Forward;
}

Decision Collator::on_timer_fire(LogicalTimestamp t, Priority priority) {
    Record& r = record(t);
    auto it = r.requests.find(priority);
    if (it == r.requests.end()) return Decision::NoOp;
    Request& req = it->second;
    if (!req.timer_active) return Decision::NoOp; // deactivated or already fired
    req.timer_active = false;
    req.fired = true;
    if (r.sent) return Decision::NoOp;
    if (r.cache) {
        auto [p, msg] = std::move(*r.cache);
        forward(r, t, p, std::move(msg));
        return Decision::Forward;
    }
    // Every result is still outstanding. The timestamp is expired: the next
    // completed local result forwards immediately (no pending higher-priority
    // request survives once all timers have fired).
    return Decision::NoOp;
}

std::optional<Collator::ForwardedMsg> Collator::take_forwarded() {
    auto out = std::move(forwarded_);
    forwarded_.reset();
    return out;
}

bool Collator::sent(LogicalTimestamp t) const {
    auto it = records_.find(t.value);
    return it != records_.end() && it->second.sent;
}

bool Collator::timer_active(LogicalTimestamp t, Priority priority) const {
    auto it = records_.find(t.value);
    if (it == records_.end()) return false;
    auto rit = it->second.requests.find(priority);
    return rit != it->second.requests.end() && rit->second.timer_active;
}

void Collator::discard_below(LogicalTimestamp watermark) {
    records_.erase(records_.begin(), records_.lower_bound(watermark.value));
}

} // namespace cirrus
