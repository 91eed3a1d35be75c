#pragma once

// Shared helpers for the collation tests and the acceptance suite: a timed
// driver feeding the Collator an explicit event schedule, and a brute-force
// oracle that re-derives the forward outcome from flat per-request state.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cirrus/collation.hpp"
#include "cirrus/speculation.hpp"

namespace cirrus::testsupport {

struct Instance {
    double local_ms;
    std::vector<RequestSpec> requests;
};

struct TimedEvent {
    double at;
    int rank; // 0 = cloud response, 1 = local completion, 2 = timer
    int idx;  // request index, -1 for local
};

inline std::vector<TimedEvent> event_schedule(const Instance& in) {
    std::vector<TimedEvent> ev;
    ev.push_back({in.local_ms, 1, -1});
    for (int i = 0; i < static_cast<int>(in.requests.size()); ++i) {
        ev.push_back({in.requests[i].rtt_ms, 0, i});
        ev.push_back({in.requests[i].deadline_ms, 2, i});
    }
    std::stable_sort(ev.begin(), ev.end(), [](const TimedEvent& a, const TimedEvent& b) {
        if (a.at != b.at) return a.at < b.at;
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.idx < b.idx;
    });
    return ev;
}

// Feeds the state machine the schedule and reports the forward it produces.
inline ForwardPrediction run_collator(const Instance& in) {
    Collator col;
    LogicalTimestamp t{0};
    for (const auto& r : in.requests) col.note_dispatch(t, r.priority);
    for (const TimedEvent& ev : event_schedule(in)) {
        if (ev.rank == 0) {
            col.on_cloud_response(t, in.requests[ev.idx].priority, ev.at);
        } else if (ev.rank == 1) {
            col.on_local_result(t, ev.at);
        } else {
            col.on_timer_fire(t, in.requests[ev.idx].priority);
        }
        if (auto fwd = col.take_forwarded()) {
            return {ev.at, fwd->priority == kLocalPriority ? ForwardSource::Local
                                                          : ForwardSource::Cloud,
                    fwd->priority};
        }
    }
    // Local always completes, so the schedule always produces a forward.
    return {-1.0, ForwardSource::Local, kLocalPriority};
}

// Independent re-derivation: walks the same schedule with flat arrays and
// inlined rules, no shared code with Collator or effective_forward_time.
inline ForwardPrediction brute_force_forward(const Instance& in) {
    const std::size_t n = in.requests.size();
    std::vector<char> responded(n, 0), fired(n, 0);
    bool cached_any = false;
    Priority cached_p = kLocalPriority;
    ForwardSource cached_src = ForwardSource::Local;

    auto blocked_by_higher = [&](Priority p) {
        for (std::size_t j = 0; j < n; ++j)
            if (in.requests[j].priority > p && !responded[j] && !fired[j]) return true;
        return false;
    };
    auto remember = [&](Priority p, ForwardSource src) {
        if (!cached_any || p > cached_p) {
            cached_any = true;
            cached_p = p;
            cached_src = src;
        }
    };

    for (const TimedEvent& ev : event_schedule(in)) {
        if (ev.rank == 0) {
            if (fired[ev.idx]) continue; // own deadline already passed
            responded[ev.idx] = 1;
            Priority p = in.requests[ev.idx].priority;
            if (blocked_by_higher(p)) {
                remember(p, ForwardSource::Cloud);
            } else {
                return {ev.at, ForwardSource::Cloud, p};
            }
        } else if (ev.rank == 1) {
            if (blocked_by_higher(kLocalPriority)) {
                remember(kLocalPriority, ForwardSource::Local);
            } else {
                return {ev.at, ForwardSource::Local, kLocalPriority};
            }
        } else {
            fired[ev.idx] = 1;
            if (cached_any) return {ev.at, cached_src, cached_p};
        }
    }
    return {in.local_ms, ForwardSource::Local, kLocalPriority};
}

// Visits every instance of the acceptance grid: local latency x up to
// max_requests cloud requests with priorities a permutation of {1..k} and
// per-request (rtt, deadline) drawn from the latency grid.
template <typename Fn>
void for_each_grid_instance(int max_requests, Fn&& fn) {
    static const double kGrid[] = {10, 50, 100, 250, 500, 3000};
    static const double kLocal[] = {100, 301.7, 903.5};
    static const int kPerms[][3] = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3},
                                    {2, 3, 1}, {3, 1, 2}, {3, 2, 1}};
    const int g = 6;
    for (double local : kLocal) {
        for (int k = 0; k <= max_requests; ++k) {
            int combos = 1;
            for (int i = 0; i < 2 * k; ++i) combos *= g;
            const int nperm = (k == 3) ? 6 : 1; // fewer slots: relabeling is symmetric
            for (int perm = 0; perm < nperm; ++perm) {
                for (int c = 0; c < combos; ++c) {
                    Instance in;
                    in.local_ms = local;
                    int rest = c;
                    for (int i = 0; i < k; ++i) {
                        RequestSpec r;
                        r.rtt_ms = kGrid[rest % g];
                        rest /= g;
                        r.deadline_ms = kGrid[rest % g];
                        rest /= g;
                        r.priority = (k == 3) ? kPerms[perm][i] : i + 1;
                        in.requests.push_back(r);
                    }
                    fn(in);
                }
            }
        }
    }
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace cirrus::testsupport
