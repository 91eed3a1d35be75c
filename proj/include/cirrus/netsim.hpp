#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cirrus/collation.hpp"

namespace cirrus::netsim {

struct LatencySample {
    std::uint64_t seq = 0;
    double send_unix_ms = 0.0;
    double rtt_ms = 0.0;
};

struct LatencyTrace {
    std::vector<LatencySample> samples;
    // Backlog-guard pauses observed while recording: (seq at pause, pause duration).
    std::vector<std::pair<std::uint64_t, double>> pauses;
};

// CSV wire format shared with the latency probe:
//   header "seq,send_unix_ms,rtt_ms", rtt with 3 decimals.
// Pauses are written as "# pause seq=N duration_ms=D" comment lines.
void write_trace_csv(const LatencyTrace& trace, std::ostream& out);
void write_trace_csv(const LatencyTrace& trace, const std::string& path);
LatencyTrace read_trace_csv(std::istream& in);
LatencyTrace read_trace_csv(const std::string& path);

struct Constant {
    double rtt_ms;
};

struct TraceReplay {
    std::shared_ptr<const LatencyTrace> trace;
    bool wrap = true;
};

struct LogNormal {
    double mu;
    double sigma;
    std::uint64_t seed = 0;
};

// RTT source. Sampling is addressed by draw index so that draws are
// reproducible and order-independent for a given model and seed.
class LatencyModel {
public:
    LatencyModel() : variant_(Constant{0.0}) {}
    LatencyModel(Constant c) : variant_(c) {}
    LatencyModel(TraceReplay t) : variant_(std::move(t)) {}
    LatencyModel(LogNormal l) : variant_(l) {}

    double sample(std::uint64_t draw_index) const;

private:
    std::variant<Constant, TraceReplay, LogNormal> variant_;
};

inline double sample_rtt(const LatencyModel& model, std::uint64_t draw_index) {
    return model.sample(draw_index);
}

// Anchors a lognormal at (median, p90): mu = ln(median),
// sigma = ln(p90 / median) / z_0.90.
struct LogNormalFit {
    double mu;
    double sigma;
};
LogNormalFit fit_lognormal(double median_ms, double p90_ms);

// Quantile q in [0, 1] of LogNormal(mu, sigma).
double lognormal_quantile(double mu, double sigma, double q);

// Inverse standard normal CDF (Acklam's rational approximation).
double inverse_normal_cdf(double p);

// Nearest-rank percentiles: the ceil(q/100 * n)-th order statistic.
std::vector<double> percentiles(const LatencyTrace& trace, const std::vector<double>& qs);
double percentile(std::vector<double> values, double q);

struct BandwidthModel {
    double bytes_per_ms = 0.0; // 0 = unconstrained

    double serialization_delay_ms(std::size_t payload_bytes) const {
        return bytes_per_ms > 0.0 ? static_cast<double>(payload_bytes) / bytes_per_ms : 0.0;
    }
};

// Simulated cloud endpoint: response instant = dispatch + serialization +
// runtime + sampled RTT.
struct CloudService {
    std::string name;
    double runtime_ms = 0.0;
    LatencyModel latency_model;
    std::function<std::any(const std::any& request, LogicalTimestamp t)> response;
};

double request_response_time(const CloudService& service, std::size_t payload_bytes,
                             const BandwidthModel& bw, std::uint64_t draw_index);

// Deterministic counter-based uniform stream (splitmix64 over (seed, index)).
double uniform01(std::uint64_t seed, std::uint64_t index);

} // namespace cirrus::netsim
