#pragma once

#include <span>
#include <vector>

#include "cirrus/collation.hpp"

namespace cirrus {

// One speculative cloud request for a single timestamp, dispatched at instant 0.
struct RequestSpec {
    double rtt_ms;
    double deadline_ms;
    Priority priority;
};

enum class ForwardSource { Local, Cloud };

struct ForwardPrediction {
    double instant_ms;
    ForwardSource source;
    Priority priority;
};

// Closed-form predictor for the collation outcome of a single timestamp:
// returns the forward instant and winning source implied by the cache/drop/
// forward rules, assuming all requests dispatch at instant 0 and the local
// result completes at local_latency_ms. Used as an oracle cross-check against
// the event-driven state machine.
ForwardPrediction effective_forward_time(double local_latency_ms,
                                         std::span<const RequestSpec> requests);

} // namespace cirrus
