#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cirrus/netsim.hpp"
#include "cirrus/probe.hpp"
#include "cirrus/scenarios.hpp"

namespace {

using namespace cirrus;

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

int cmd_probe_serve(const std::string& bind, double delay_ms) {
    probe::ServerOptions opts;
    opts.bind = probe::parse_endpoint(bind);
    opts.ack_delay_ms = delay_ms;
    probe::ProbeServer server(opts);
    server.start();
    std::cerr << "serving on port " << server.port() << " (ctrl-c to stop)\n";
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return 0;
}

int cmd_probe_run(const std::string& target, double rate, std::size_t size, double duration,
                  std::size_t backlog, const std::string& out) {
    probe::ProbeConfig cfg;
    cfg.target = probe::parse_endpoint(target);
    cfg.rate_hz = rate;
    cfg.frame_bytes = size;
    cfg.duration_s = duration;
    cfg.backlog_limit = backlog;
    cfg.output_path = out;
    probe::ProbeResult result = probe::run_probe(cfg);
    auto pct = netsim::percentiles(result.trace, {50, 90, 99});
    std::cerr << "sent=" << result.stats.sent << " acked=" << result.stats.acked
              << " unmatched=" << result.stats.unmatched << " pauses=" << result.stats.pauses
              << "\n";
    std::cout << "p50=" << pct[0] << "ms p90=" << pct[1] << "ms p99=" << pct[2] << "ms\n";
    if (!result.complete) {
        std::cerr << "run incomplete (connection lost); partial trace flushed\n";
        return 1;
    }
    return 0;
}

int cmd_fit(double median, double p90, const std::string& format) {
    auto fit = netsim::fit_lognormal(median, p90);
    if (format == "json") {
        nlohmann::json j{{"mu", fit.mu}, {"sigma", fit.sigma}};
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "mu=" << fit.mu << " sigma=" << fit.sigma << "\n";
    }
    std::cerr << "implied p99=" << netsim::lognormal_quantile(fit.mu, fit.sigma, 0.99)
              << " ms (two-parameter fit; heavier measured tails need trace replay)\n";
    return 0;
}

int cmd_table(const std::string& config_path) {
    std::vector<scenarios::DetectorConfig> detectors;
    if (config_path.empty() || config_path == "default") {
        detectors = scenarios::default_detectors();
    } else {
        detectors = scenarios::load_config(config_path).detectors;
    }
    scenarios::print_speedup_table(scenarios::speedup_table(detectors), std::cout);
    return 0;
}

void print_outcome(const scenarios::Outcome& o, const std::string& format) {
    if (format == "json") {
        nlohmann::json j{{"collided", o.collided},
                         {"min_gap_m", o.min_gap_m},
                         {"brake_instant_ms", o.brake_instant_ms},
                         {"stop_instant_ms", o.stop_instant_ms}};
        std::cout << j.dump() << "\n";
        return;
    }
    std::cout << (o.collided ? "collision" : "no collision") << " min_gap=" << o.min_gap_m
              << "m brake_at=" << o.brake_instant_ms << "ms stop_at=" << o.stop_instant_ms
              << "ms\n";
}

int cmd_sim_run(const std::string& config_path, std::uint64_t seed, const std::string& format) {
    scenarios::ExperimentConfig cfg = scenarios::load_config(config_path);
    cfg.common.seed = seed;
    scenarios::Outcome outcome;
    if (cfg.variant == "traffic_jam") {
        outcome = scenarios::run_traffic_jam(cfg.common, cfg.traffic_jam, cfg.mode);
    } else if (cfg.variant == "red_light") {
        outcome = scenarios::run_red_light(cfg.common, cfg.red_light, cfg.mode,
                                           netsim::Constant{cfg.feed_rtt_ms});
    } else if (cfg.variant == "jaywalk") {
        outcome = scenarios::run_jaywalk(cfg.common, cfg.jaywalk, cfg.contingency);
    } else {
        std::cerr << "unknown scenario variant: " << cfg.variant << "\n";
        return 2;
    }
    print_outcome(outcome, format);
    return 0;
}

int cmd_sim_sweep(const std::string& config_path, std::uint64_t seed, const std::string& out,
                  const std::string& format) {
    scenarios::ExperimentConfig cfg = scenarios::load_config(config_path);
    cfg.common.seed = seed;
    auto cells = scenarios::sweep_matrix(cfg.common, cfg.traffic_jam, cfg.sweep);
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) {
            std::cerr << "cannot open " << out << " for writing\n";
            return 1;
        }
        scenarios::write_sweep_csv(cells, f);
    }
    if (format == "csv") {
        scenarios::write_sweep_csv(cells, std::cout);
    } else {
        scenarios::print_sweep_grid(cells, cfg.sweep, std::cout, format == "grid");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"speculative edge-cloud dataflow toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "seed for all randomness")->capture_default_str();

    auto* probe_cmd = app.add_subcommand("probe", "network round-trip measurement");
    probe_cmd->require_subcommand(1);

    std::string bind = "0.0.0.0:9377";
    double delay_ms = 0.0;
    auto* serve = probe_cmd->add_subcommand("serve", "run the ack server");
    serve->add_option("--bind", bind, "address to bind")->capture_default_str();
    serve->add_option("--delay-ms", delay_ms, "fixed extra delay before each ack (test hook)");

    std::string target = "127.0.0.1:9377";
    double rate = 30.0, duration = 60.0;
    std::size_t size = cirrus::probe::kRequestFrameBytes, backlog = 30;
    std::string trace_out = "trace.csv";
    auto* run = probe_cmd->add_subcommand("run", "measure RTTs against a server");
    run->add_option("--target", target, "server address")->capture_default_str();
    run->add_option("--rate", rate, "request rate [Hz]")->capture_default_str();
    run->add_option("--size", size, "total request frame size [bytes]")->capture_default_str();
    run->add_option("--duration", duration, "run length [s]")->capture_default_str();
    run->add_option("--backlog", backlog, "backlog guard threshold")->capture_default_str();
    run->add_option("--out", trace_out, "trace CSV path")->capture_default_str();

    double median = 68.0, p90 = 336.0;
    std::string fit_format = "text";
    auto* fit = app.add_subcommand("fit", "fit a lognormal RTT model to (median, p90)");
    fit->add_option("--median", median, "median RTT [ms]")->capture_default_str();
    fit->add_option("--p90", p90, "90th percentile RTT [ms]")->capture_default_str();
    fit->add_option("--format", fit_format, "text|json")->capture_default_str();

    auto* sim = app.add_subcommand("sim", "kinematic scenario simulations");
    sim->require_subcommand(1);
    std::string config_path;
    std::string run_format = "text";
    auto* sim_run = sim->add_subcommand("run", "run one scenario from a config file");
    sim_run->add_option("--config", config_path, "scenario config JSON")->required();
    sim_run->add_option("--format", run_format, "text|json")->capture_default_str();

    std::string sweep_config, sweep_out;
    std::string sweep_format = "grid";
    auto* sim_sweep = sim->add_subcommand("sweep", "speed x response-time x mode matrix");
    sim_sweep->add_option("--config", sweep_config, "scenario config JSON")->required();
    sim_sweep->add_option("--out", sweep_out, "matrix CSV output path");
    sim_sweep->add_option("--format", sweep_format, "grid|plain|csv")->capture_default_str();

    std::string table_detectors = "default";
    auto* table = app.add_subcommand("table", "detector runtime/speedup table");
    table->add_option("--detectors", table_detectors, "'default' or a config JSON path")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (serve->parsed()) return cmd_probe_serve(bind, delay_ms);
        if (run->parsed())
            return cmd_probe_run(target, rate, size, duration, backlog, trace_out);
        if (fit->parsed()) return cmd_fit(median, p90, fit_format);
        if (sim_run->parsed()) return cmd_sim_run(config_path, seed, run_format);
        if (sim_sweep->parsed()) return cmd_sim_sweep(sweep_config, seed, sweep_out, sweep_format);
        if (table->parsed()) return cmd_table(table_detectors);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
