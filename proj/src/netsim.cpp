#include "cirrus/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cirrus::netsim {

void write_trace_csv(const LatencyTrace& trace, std::ostream& out) {
    out << "seq,send_unix_ms,rtt_ms\n";
    for (const auto& [seq, duration] : trace.pauses) {
        out << "# pause seq=" << seq << " duration_ms=" << std::fixed << std::setprecision(3)
            << duration << "\n";
        out.unsetf(std::ios::fixed);
    }
    for (const auto& s : trace.samples) {
        out << s.seq << ',' << std::fixed << std::setprecision(3) << s.send_unix_ms << ','
            << s.rtt_ms << '\n';
        out.unsetf(std::ios::fixed);
    }
}

void write_trace_csv(const LatencyTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_trace_csv(trace, out);
}

LatencyTrace read_trace_csv(std::istream& in) {
    LatencyTrace trace;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::uint64_t seq = 0;
            double dur = 0.0;
            if (std::sscanf(line.c_str(), "# pause seq=%llu duration_ms=%lf",
                            reinterpret_cast<unsigned long long*>(&seq), &dur) == 2) {
                trace.pauses.emplace_back(seq, dur);
            }
            continue;
        }
        if (!header_seen) {
            if (line.rfind("seq,", 0) != 0)
                throw std::runtime_error("trace CSV missing header: " + line);
            header_seen = true;
            continue;
        }
        LatencySample s;
        char c1 = 0, c2 = 0;
        std::istringstream row(line);
        if (!(row >> s.seq >> c1 >> s.send_unix_ms >> c2 >> s.rtt_ms) || c1 != ',' || c2 != ',')
            throw std::runtime_error("malformed trace row: " + line);
        if (!trace.samples.empty() && s.seq <= trace.samples.back().seq)
            throw std::runtime_error("trace seq not strictly increasing at " + line);
        if (s.rtt_ms <= 0.0) throw std::runtime_error("non-positive rtt at " + line);
        trace.samples.push_back(s);
    }
    if (!header_seen) throw std::runtime_error("empty trace CSV");
    return trace;
}

LatencyTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_trace_csv(in);
}

static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t bits = splitmix64(splitmix64(seed) ^ splitmix64(index * 0xd1342543de82ef95ull + 1));
    // 53-bit mantissa in (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double LatencyModel::sample(std::uint64_t draw_index) const {
    if (const auto* c = std::get_if<Constant>(&variant_)) return c->rtt_ms;
    if (const auto* t = std::get_if<TraceReplay>(&variant_)) {
        const auto& samples = t->trace->samples;
        if (samples.empty()) throw std::runtime_error("TraceReplay over empty trace");
        if (!t->wrap && draw_index >= samples.size())
            throw std::runtime_error("TraceReplay exhausted (wrap=false)");
        return samples[draw_index % samples.size()].rtt_ms;
    }
    const auto& l = std::get<LogNormal>(variant_);
    // Box-Muller on the counter-based uniform stream.
    double u1 = uniform01(l.seed, draw_index * 2);
    double u2 = uniform01(l.seed, draw_index * 2 + 1);
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return std::exp(l.mu + l.sigma * z);
}

// z_0.90 of the standard normal.
static constexpr double kZ90 = 1.2815515655446004;

LogNormalFit fit_lognormal(double median_ms, double p90_ms) {
    if (median_ms <= 0.0 || p90_ms <= median_ms)
        throw std::invalid_argument("fit_lognormal requires p90 > median > 0");
    return {std::log(median_ms), std::log(p90_ms / median_ms) / kZ90};
}

double inverse_normal_cdf(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("inverse_normal_cdf: p in (0,1)");
    // Acklam's rational approximation, |relative error| < 1.15e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

double lognormal_quantile(double mu, double sigma, double q) {
    return std::exp(mu + sigma * inverse_normal_cdf(q));
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of empty sample");
    if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile q outside [0,100]");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    return values[rank - 1];
}

std::vector<double> percentiles(const LatencyTrace& trace, const std::vector<double>& qs) {
    std::vector<double> rtts;
    rtts.reserve(trace.samples.size());
    for (const auto& s : trace.samples) rtts.push_back(s.rtt_ms);
    std::vector<double> out;
    out.reserve(qs.size());
    for (double q : qs) out.push_back(percentile(rtts, q));
    return out;
}

double request_response_time(const CloudService& service, std::size_t payload_bytes,
                             const BandwidthModel& bw, std::uint64_t draw_index) {
    return bw.serialization_delay_ms(payload_bytes) + service.runtime_ms +
           service.latency_model.sample(draw_index);
}

} // namespace cirrus::netsim
