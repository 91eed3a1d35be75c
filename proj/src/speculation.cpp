#include "cirrus/speculation.hpp"

#include <algorithm>
#include <optional>

namespace cirrus {

namespace {

struct Moment {
    double at;
    int rank;     // 0 = cloud arrival, 1 = local completion, 2 = timer
    int idx;      // request index, -1 for local
    bool operator<(const Moment& o) const {
        if (at != o.at) return at < o.at;
        if (rank != o.rank) return rank < o.rank;
        return idx < o.idx;
    }
};

} // namespace

ForwardPrediction effective_forward_time(double local_latency_ms,
                                         std::span<const RequestSpec> requests) {
    std::vector<Moment> moments;
    moments.push_back({local_latency_ms, 1, -1});
    for (int i = 0; i < static_cast<int>(requests.size()); ++i) {
        if (requests[i].rtt_ms <= requests[i].deadline_ms)
            moments.push_back({requests[i].rtt_ms, 0, i}); // late arrivals are dropped anyway
        moments.push_back({requests[i].deadline_ms, 2, i});
    }
    std::sort(moments.begin(), moments.end());

    std::vector<bool> responded(requests.size(), false), fired(requests.size(), false);
    std::optional<ForwardPrediction> cached; // best result so far, instant filled on forward

    auto outstanding_above = [&](Priority p) {
        for (std::size_t i = 0; i < requests.size(); ++i) {
            if (requests[i].priority > p && !responded[i] && !fired[i]) return true;
        }
        return false;
    };
    auto cache_best = [&](ForwardSource src, Priority p) {
        if (!cached || cached->priority < p) cached = ForwardPrediction{0.0, src, p};
    };

    for (const Moment& m : moments) {
        switch (m.rank) {
        case 0: { // cloud result arrives within its deadline
            responded[m.idx] = true;
            Priority p = requests[m.idx].priority;
            if (!outstanding_above(p)) return {m.at, ForwardSource::Cloud, p};
            cache_best(ForwardSource::Cloud, p);
            break;
        }
        case 1: // local completion
            if (!outstanding_above(kLocalPriority))
                return {m.at, ForwardSource::Local, kLocalPriority};
            cache_best(ForwardSource::Local, kLocalPriority);
            break;
        case 2: // deadline timer
            fired[m.idx] = true;
            if (cached) return {m.at, cached->source, cached->priority};
            break;
        }
    }
    // All timers fired with nothing cached and the local result still running:
    // it forwards the moment it completes.
    return {local_latency_ms, ForwardSource::Local, kLocalPriority};
}

} // namespace cirrus
