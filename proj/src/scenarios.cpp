#include "cirrus/scenarios.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cirrus/dataflow.hpp"

namespace cirrus::scenarios {

using nlohmann::json;

std::vector<DetectorConfig> default_detectors() {
    // (name, on-vehicle runtime, cloud runtime). The detection range stands in
    // for model accuracy; DETR-ResNet-50's shorter range is the calibrated
    // knob behind the sweep's Local row.
    return {
        {"DETR-ResNet-50", 301.7, 102.2, 42.0, 3},
        {"DETR-ResNet-101", 407.7, 118.2, 60.0, 3},
        {"DETR-ResNet-101-DC", 859.2, 146.6, 60.0, 3},
        {"DINO-SWIN-Tiny", 722.1, 90.1, 60.0, 3},
        {"DINO-SWIN-Small", 903.5, 107.1, 60.0, 3},
        {"DINO-SWIN-Large", 1529.9, 180.8, 60.0, 3},
    };
}

ScenarioConfig::ScenarioConfig() {
    auto dets = default_detectors();
    local_detector = dets[0]; // DETR-ResNet-50
    cloud_detector = dets[1]; // DETR-ResNet-101
}

std::vector<SpeedupRow> speedup_table(const std::vector<DetectorConfig>& detectors) {
    std::vector<SpeedupRow> rows;
    for (const auto& d : detectors) {
        double ratio = std::round(d.local_runtime_ms / d.cloud_runtime_ms * 100.0) / 100.0;
        rows.push_back({d.name, d.local_runtime_ms, d.cloud_runtime_ms, ratio});
    }
    return rows;
}

void print_speedup_table(const std::vector<SpeedupRow>& rows, std::ostream& out) {
    out << std::left << std::setw(22) << "model" << std::right << std::setw(12) << "local_ms"
        << std::setw(12) << "cloud_ms" << std::setw(10) << "speedup" << "\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(22) << r.name << std::right << std::fixed
            << std::setprecision(1) << std::setw(12) << r.local_ms << std::setw(12) << r.cloud_ms
            << std::setprecision(2) << std::setw(9) << r.speedup << "x\n";
        out.unsetf(std::ios::fixed);
    }
}

double stopping_distance(double speed_mps, double decel_mps2, double reaction_ms) {
    if (decel_mps2 <= 0.0) throw std::invalid_argument("decel must be positive");
    return speed_mps * reaction_ms / 1000.0 + speed_mps * speed_mps / (2.0 * decel_mps2);
}

double stopping_distance_integrated(double speed_mps, double decel_mps2, double reaction_ms,
                                    double dt_ms) {
    if (decel_mps2 <= 0.0) throw std::invalid_argument("decel must be positive");
    const double dt = dt_ms / 1000.0;
    double pos = 0.0;
    double t = 0.0;
    const double reaction_s = reaction_ms / 1000.0;
    while (t + dt <= reaction_s) {
        pos += speed_mps * dt;
        t += dt;
    }
    pos += speed_mps * (reaction_s - t); // partial reaction step
    double v = speed_mps;
    while (v > 0.0) {
        double v_next = std::max(0.0, v - decel_mps2 * dt);
        pos += (v + v_next) / 2.0 * dt;
        v = v_next;
    }
    return pos;
}

const char* to_string(Mode m) {
    switch (m) {
    case Mode::Local: return "local";
    case Mode::Cloud: return "cloud";
    case Mode::Ours: return "ours";
    }
    return "?";
}

std::optional<Mode> mode_from_string(const std::string& s) {
    if (s == "local") return Mode::Local;
    if (s == "cloud") return Mode::Cloud;
    if (s == "ours") return Mode::Ours;
    return std::nullopt;
}

double frame_response_ms(const DetectorConfig& detector, Mode mode, double rtt_ms) {
    if (mode == Mode::Local) return detector.local_runtime_ms;
    return detector.cloud_runtime_ms + rtt_ms;
}

double choose_deadline_ms(const ScenarioConfig& cfg, double speed_mps) {
    const DetectorConfig& local = cfg.local_detector;
    const double range = local.detection_range_m;
    const double braking = speed_mps * speed_mps / (2.0 * cfg.decel_mps2);
    const double settle_ms =
        (local.consecutive_frames_required - 1) * cfg.frame_period_ms;
    double budget_ms = (range - braking) / speed_mps * 1000.0 - settle_ms -
                       cfg.pipeline_overhead_ms - cfg.deadline_margin_ms;
    // When even an instant local detection cannot stop in time, there is
    // nothing to protect: wait for the cloud as long as it could ever help.
    return budget_ms >= local.local_runtime_ms ? budget_ms : cfg.long_deadline_ms;
}

namespace {

struct FrameMsg {
    std::uint64_t index;
    double capture_ms;
};

struct DetectionMsg {
    std::uint64_t index;
    double capture_ms;
    bool detected;
    const char* source;
};

struct FeedMsg {
    double sent_ms;
};

struct PlannerState {
    std::optional<double> brake_request_ms;
    std::vector<FrameRecord> frames;
    std::map<std::uint64_t, bool> delivered;
    int consecutive_needed = 3;

    void on_detection(double now, const DetectionMsg& d) {
        frames.push_back({d.index, d.capture_ms, d.detected, now, d.source});
        if (brake_request_ms) return;
        delivered[d.index] = d.detected;
        const int k = consecutive_needed;
        for (std::uint64_t end = d.index; end < d.index + static_cast<std::uint64_t>(k); ++end) {
            if (end + 1 < static_cast<std::uint64_t>(k)) continue;
            bool run = true;
            for (int j = 0; j < k; ++j) {
                auto it = delivered.find(end - static_cast<std::uint64_t>(j));
                if (it == delivered.end() || !it->second) {
                    run = false;
                    break;
                }
            }
            if (run) {
                brake_request_ms = now;
                return;
            }
        }
    }
};

struct BrakePhase {
    double travel_m;
    double duration_ms;
};

// Midpoint integration of the braking phase at dt_ms.
BrakePhase integrate_braking(double speed_mps, double decel_mps2, double dt_ms = 1.0) {
    const double dt = dt_ms / 1000.0;
    double pos = 0.0;
    double v = speed_mps;
    double t = 0.0;
    while (v > 0.0) {
        double v_next = std::max(0.0, v - decel_mps2 * dt);
        pos += (v + v_next) / 2.0 * dt;
        v = v_next;
        t += dt;
    }
    return {pos, t * 1000.0};
}

Outcome finish_outcome(const ScenarioConfig& cfg, double gap_m, double speed_mps,
                       const PlannerState& planner, double horizon_ms) {
    Outcome out;
    out.frames = planner.frames;
    if (!planner.brake_request_ms) {
        out.collided = true;
        out.min_gap_m = gap_m - speed_mps * horizon_ms / 1000.0;
        return out;
    }
    const double brake_ms = *planner.brake_request_ms + cfg.pipeline_overhead_ms;
    out.brake_instant_ms = brake_ms;
    BrakePhase phase = integrate_braking(speed_mps, cfg.decel_mps2);
    const double total_travel = speed_mps * brake_ms / 1000.0 + phase.travel_m;
    out.min_gap_m = gap_m - total_travel;
    out.collided = out.min_gap_m <= 0.0;
    out.stop_instant_ms = brake_ms + phase.duration_ms;
    return out;
}

// Camera source emitting FrameMsg at the configured period until the planner
// requests a brake or the horizon passes.
OperatorSpec make_camera(std::shared_ptr<PlannerState> planner, double period_ms,
                         double horizon_ms) {
    auto tick = std::make_shared<std::function<void(OperatorContext&, std::uint64_t)>>();
    *tick = [tick, planner, period_ms, horizon_ms](OperatorContext& ctx, std::uint64_t idx) {
        if (planner->brake_request_ms || ctx.now() > horizon_ms) return;
        ctx.send("frames", FrameMsg{idx, ctx.now()});
        ctx.schedule(period_ms, [tick, idx](OperatorContext& c) { (*tick)(c, idx + 1); });
    };
    OperatorSpec camera;
    camera.id = "camera";
    camera.outputs = {port<FrameMsg>("frames")};
    camera.setup = [tick](OperatorContext& ctx) {
        ctx.schedule(0.0, [tick](OperatorContext& c) { (*tick)(c, 0); });
    };
    return camera;
}

OperatorSpec make_planner(std::shared_ptr<PlannerState> planner, bool with_feed) {
    OperatorSpec spec;
    spec.id = "planner";
    spec.inputs = {port<DetectionMsg>("detections")};
    if (with_feed) spec.inputs.push_back(port<FeedMsg>("feed"));
    spec.on_message = [planner](OperatorContext& ctx, const Envelope& env) {
        if (env.payload.type() == typeid(FeedMsg)) {
            if (!planner->brake_request_ms) planner->brake_request_ms = ctx.now();
            return;
        }
        planner->on_detection(ctx.now(), std::any_cast<const DetectionMsg&>(env.payload));
    };
    return spec;
}

// Builds the camera -> detector -> planner pipeline. `visible(t)` says
// whether the obstacle can be perceived at capture instant t by a detector
// with the given range.
Outcome run_perception_scenario(const ScenarioConfig& cfg, double gap_m, double speed_mps,
                                const ModeSpec& mode,
                                const std::function<bool(double, double)>& visible,
                                const OperatorSpec* extra_source, double horizon_ms) {
    auto planner = std::make_shared<PlannerState>();
    planner->consecutive_needed = cfg.local_detector.consecutive_frames_required;

    Graph graph;
    graph.add_operator(make_camera(planner, cfg.frame_period_ms, horizon_ms));

    OperatorSpec detector;
    detector.id = "detector";
    detector.inputs = {port<FrameMsg>("frames")};
    detector.outputs = {port<DetectionMsg>("detections")};

    const double local_range = cfg.local_detector.detection_range_m;
    const double cloud_range = cfg.cloud_detector.detection_range_m;
    const double local_runtime = cfg.local_detector.local_runtime_ms;

    switch (mode.mode) {
    case Mode::Local:
        detector.on_message = [visible, local_range, local_runtime](OperatorContext& ctx,
                                                                    const Envelope& env) {
            const auto& f = std::any_cast<const FrameMsg&>(env.payload);
            ctx.complete_after(local_runtime, "detections",
                               DetectionMsg{f.index, f.capture_ms,
                                            visible(f.capture_ms, local_range), "local"});
        };
        break;
    case Mode::Cloud: {
        double response = mode.cloud_response_ms;
        detector.on_message = [visible, cloud_range, response](OperatorContext& ctx,
                                                               const Envelope& env) {
            const auto& f = std::any_cast<const FrameMsg&>(env.payload);
            ctx.complete_after(response, "detections",
                               DetectionMsg{f.index, f.capture_ms,
                                            visible(f.capture_ms, cloud_range), "cloud"});
        };
        break;
    }
    case Mode::Ours: {
        const double deadline = choose_deadline_ms(cfg, speed_mps);
        auto service = std::make_shared<netsim::CloudService>();
        service->name = cfg.cloud_detector.name;
        service->runtime_ms = mode.cloud_response_ms;
        service->latency_model = netsim::Constant{0.0};
        service->response = [visible, cloud_range](const std::any& req, LogicalTimestamp) {
            const auto& f = std::any_cast<const FrameMsg&>(req);
            return std::any(DetectionMsg{f.index, f.capture_ms,
                                         visible(f.capture_ms, cloud_range), "cloud"});
        };
        detector.setup = [service, deadline](OperatorContext& ctx) {
            CloudRegistration reg{service, std::type_index(typeid(FrameMsg)),
                                  [deadline](const std::any& input, LogicalTimestamp) {
                                      return CloudRequest{input, deadline};
                                  },
                                  1};
            ctx.use_cloud(std::move(reg));
        };
        detector.on_message = [visible, local_range, local_runtime](OperatorContext& ctx,
                                                                    const Envelope& env) {
            const auto& f = std::any_cast<const FrameMsg&>(env.payload);
            ctx.complete_after(local_runtime, "detections",
                               DetectionMsg{f.index, f.capture_ms,
                                            visible(f.capture_ms, local_range), "local"});
        };
        break;
    }
    }
    graph.add_operator(std::move(detector));
    if (extra_source) graph.add_operator(*extra_source);
    graph.add_operator(make_planner(planner, extra_source != nullptr));
    graph.connect("camera", "frames", "detector");
    graph.connect("detector", "detections", "planner");
    if (extra_source) graph.connect(extra_source->id, "feed", "planner");

    Runtime runtime(std::move(graph), cfg.seed);
    runtime.run_all();
    return finish_outcome(cfg, gap_m, speed_mps, *planner, horizon_ms);
}

} // namespace

Outcome run_traffic_jam(const ScenarioConfig& cfg, const TrafficJamConfig& jam,
                        const ModeSpec& mode) {
    if (jam.gap_m <= 0.0 || jam.speed_mps <= 0.0)
        throw std::invalid_argument("traffic jam: gap and speed must be positive");
    const double gap = jam.gap_m;
    const double v = jam.speed_mps;
    auto visible = [gap, v](double t_ms, double range_m) {
        return gap - v * t_ms / 1000.0 <= range_m;
    };
    const double horizon = gap / v * 1000.0 + 15000.0;
    return run_perception_scenario(cfg, gap, v, mode, visible, nullptr, horizon);
}

Outcome run_red_light(const ScenarioConfig& cfg, const RedLightConfig& rl, const ModeSpec& mode,
                      const netsim::LatencyModel& shared_feed_latency) {
    const double gap = rl.initial_gap_m;
    const double v = rl.speed_mps;
    const double lift = rl.occlusion_lift_gap_m;
    // Occlusion dominates: the crossing vehicle is imperceptible until the AV
    // is within occlusion_lift_gap_m, whatever the detector's range.
    auto visible = [gap, v, lift](double t_ms, double range_m) {
        double d = gap - v * t_ms / 1000.0;
        return d <= std::min(range_m, lift);
    };
    const double horizon = gap / v * 1000.0 + 15000.0;

    std::optional<OperatorSpec> feed;
    if (rl.shared_feed) {
        OperatorSpec src;
        src.id = "location_feed";
        src.outputs = {port<FeedMsg>("feed")};
        double period = rl.feed_period_ms;
        const netsim::LatencyModel model = shared_feed_latency;
        src.setup = [period, model, horizon](OperatorContext& ctx) {
            // Reports of the crossing vehicle's location, each delayed by one
            // network round trip.
            for (std::uint64_t k = 0; k * period < horizon; ++k) {
                double at = k * period + model.sample(k);
                ctx.schedule(at, [](OperatorContext& c) { c.send("feed", FeedMsg{c.now()}); });
            }
        };
        feed = std::move(src);
    }
    return run_perception_scenario(cfg, gap, v, mode, visible, feed ? &*feed : nullptr, horizon);
}

Outcome run_jaywalk(const ScenarioConfig& cfg, const JaywalkConfig& jay, bool contingency) {
    Outcome out;
    if (!jay.pedestrian_enters) {
        out.collided = false;
        out.min_gap_m = jay.pedestrian_gap_m;
        return out;
    }
    const double v = jay.speed_mps;
    const double gap = jay.pedestrian_gap_m;
    const double response_ms = contingency ? jay.cached_plan_ms : jay.local_plan_ms;
    const double travel = v * response_ms / 1000.0;
    out.brake_instant_ms = response_ms;
    if (travel >= gap) {
        out.collided = true;
        out.min_gap_m = gap - travel;
        return out;
    }
    const double gap_at_response = gap - travel;
    if (contingency && gap_at_response >= jay.swerve_threshold_m) {
        // Cached plan is a swerve: instantaneous lateral escape.
        out.collided = false;
        out.min_gap_m = gap_at_response;
        out.stop_instant_ms = response_ms;
        return out;
    }
    BrakePhase phase = integrate_braking(v, cfg.decel_mps2);
    out.min_gap_m = gap - travel - phase.travel_m;
    out.collided = out.min_gap_m <= 0.0;
    out.stop_instant_ms = response_ms + phase.duration_ms;
    return out;
}

std::vector<SweepCell> sweep_matrix(const ScenarioConfig& cfg, const TrafficJamConfig& jam,
                                    const SweepAxes& axes) {
    if (axes.speeds_mps.empty() || axes.response_times_s.empty() || axes.modes.empty())
        throw std::invalid_argument("sweep axes must be nonempty");
    std::vector<SweepCell> cells;
    for (double speed : axes.speeds_mps) {
        for (Mode mode : axes.modes) {
            for (double rt : axes.response_times_s) {
                TrafficJamConfig j = jam;
                j.speed_mps = speed;
                ModeSpec spec{mode, rt * 1000.0};
                cells.push_back({speed, rt, mode, run_traffic_jam(cfg, j, spec)});
            }
        }
    }
    return cells;
}

void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
    out << "speed_mps,response_time_s,mode,collided,min_gap_m,brake_instant_ms\n";
    for (const auto& c : cells) {
        out << c.speed_mps << ',' << c.response_time_s << ',' << to_string(c.mode) << ','
            << (c.outcome.collided ? 1 : 0) << ',' << std::fixed << std::setprecision(3)
            << c.outcome.min_gap_m << ',' << c.outcome.brake_instant_ms << '\n';
        out.unsetf(std::ios::fixed);
    }
}

void print_sweep_grid(const std::vector<SweepCell>& cells, const SweepAxes& axes,
                      std::ostream& out, bool color) {
    auto lookup = [&](double speed, double rt, Mode mode) -> const SweepCell* {
        for (const auto& c : cells) {
            if (c.speed_mps == speed && c.response_time_s == rt && c.mode == mode) return &c;
        }
        return nullptr;
    };
    out << std::left << std::setw(7) << "speed" << std::setw(7) << "mode";
    for (double rt : axes.response_times_s) {
        std::ostringstream h;
        h << std::fixed << std::setprecision(2) << rt << "s";
        out << std::right << std::setw(8) << h.str();
    }
    out << "\n";
    for (double speed : axes.speeds_mps) {
        for (Mode mode : axes.modes) {
            out << std::left << std::setw(7) << speed << std::setw(7) << to_string(mode);
            for (double rt : axes.response_times_s) {
                const SweepCell* c = lookup(speed, rt, mode);
                std::string cell = "?";
                if (c) {
                    if (color)
                        cell = c->outcome.collided ? "\x1b[31mcrash\x1b[0m" : "\x1b[32m  ok \x1b[0m";
                    else
                        cell = c->outcome.collided ? "crash" : "  ok ";
                }
                out << std::right << std::setw(color && c ? 17 : 8) << cell;
            }
            out << "\n";
        }
    }
}

static void to_json(json& j, const DetectorConfig& d) {
    j = json{{"name", d.name},
             {"local_runtime_ms", d.local_runtime_ms},
             {"cloud_runtime_ms", d.cloud_runtime_ms},
             {"detection_range_m", d.detection_range_m},
             {"consecutive_frames_required", d.consecutive_frames_required}};
}

static void from_json(const json& j, DetectorConfig& d) {
    j.at("name").get_to(d.name);
    j.at("local_runtime_ms").get_to(d.local_runtime_ms);
    j.at("cloud_runtime_ms").get_to(d.cloud_runtime_ms);
    if (j.contains("detection_range_m")) j.at("detection_range_m").get_to(d.detection_range_m);
    if (j.contains("consecutive_frames_required"))
        j.at("consecutive_frames_required").get_to(d.consecutive_frames_required);
}

std::string to_json_string(const ExperimentConfig& cfg) {
    json j;
    j["variant"] = cfg.variant;
    j["common"] = {{"frame_period_ms", cfg.common.frame_period_ms},
                   {"decel_mps2", cfg.common.decel_mps2},
                   {"pipeline_overhead_ms", cfg.common.pipeline_overhead_ms},
                   {"deadline_margin_ms", cfg.common.deadline_margin_ms},
                   {"long_deadline_ms", cfg.common.long_deadline_ms},
                   {"local_detector", cfg.common.local_detector.name},
                   {"cloud_detector", cfg.common.cloud_detector.name},
                   {"seed", cfg.common.seed}};
    j["traffic_jam"] = {{"gap_m", cfg.traffic_jam.gap_m}, {"speed_mps", cfg.traffic_jam.speed_mps}};
    j["red_light"] = {{"initial_gap_m", cfg.red_light.initial_gap_m},
                      {"occlusion_lift_gap_m", cfg.red_light.occlusion_lift_gap_m},
                      {"speed_mps", cfg.red_light.speed_mps},
                      {"shared_feed", cfg.red_light.shared_feed},
                      {"feed_period_ms", cfg.red_light.feed_period_ms}};
    j["jaywalk"] = {{"pedestrian_gap_m", cfg.jaywalk.pedestrian_gap_m},
                    {"speed_mps", cfg.jaywalk.speed_mps},
                    {"local_plan_ms", cfg.jaywalk.local_plan_ms},
                    {"cached_plan_ms", cfg.jaywalk.cached_plan_ms},
                    {"swerve_threshold_m", cfg.jaywalk.swerve_threshold_m},
                    {"pedestrian_enters", cfg.jaywalk.pedestrian_enters}};
    j["mode"] = {{"mode", to_string(cfg.mode.mode)},
                 {"cloud_response_ms", cfg.mode.cloud_response_ms}};
    j["contingency"] = cfg.contingency;
    j["feed_rtt_ms"] = cfg.feed_rtt_ms;
    json modes = json::array();
    for (Mode m : cfg.sweep.modes) modes.push_back(to_string(m));
    j["sweep"] = {{"speeds_mps", cfg.sweep.speeds_mps},
                  {"response_times_s", cfg.sweep.response_times_s},
                  {"modes", modes}};
    j["detectors"] = cfg.detectors;
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_string(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("variant")) j.at("variant").get_to(cfg.variant);
    if (j.contains("detectors")) cfg.detectors = j.at("detectors").get<std::vector<DetectorConfig>>();
    auto find_detector = [&](const std::string& name) -> const DetectorConfig* {
        for (const auto& d : cfg.detectors) {
            if (d.name == name) return &d;
        }
        return nullptr;
    };
    if (j.contains("common")) {
        const json& c = j.at("common");
        if (c.contains("frame_period_ms")) c.at("frame_period_ms").get_to(cfg.common.frame_period_ms);
        if (c.contains("decel_mps2")) c.at("decel_mps2").get_to(cfg.common.decel_mps2);
        if (c.contains("pipeline_overhead_ms"))
            c.at("pipeline_overhead_ms").get_to(cfg.common.pipeline_overhead_ms);
        if (c.contains("deadline_margin_ms"))
            c.at("deadline_margin_ms").get_to(cfg.common.deadline_margin_ms);
        if (c.contains("long_deadline_ms")) c.at("long_deadline_ms").get_to(cfg.common.long_deadline_ms);
        if (c.contains("seed")) c.at("seed").get_to(cfg.common.seed);
        if (c.contains("local_detector")) {
            const DetectorConfig* d = find_detector(c.at("local_detector").get<std::string>());
            if (!d) throw std::invalid_argument("unknown local_detector in config");
            cfg.common.local_detector = *d;
        }
        if (c.contains("cloud_detector")) {
            const DetectorConfig* d = find_detector(c.at("cloud_detector").get<std::string>());
            if (!d) throw std::invalid_argument("unknown cloud_detector in config");
            cfg.common.cloud_detector = *d;
        }
    }
    if (j.contains("traffic_jam")) {
        const json& t = j.at("traffic_jam");
        if (t.contains("gap_m")) t.at("gap_m").get_to(cfg.traffic_jam.gap_m);
        if (t.contains("speed_mps")) t.at("speed_mps").get_to(cfg.traffic_jam.speed_mps);
    }
    if (j.contains("red_light")) {
        const json& r = j.at("red_light");
        if (r.contains("initial_gap_m")) r.at("initial_gap_m").get_to(cfg.red_light.initial_gap_m);
        if (r.contains("occlusion_lift_gap_m"))
            r.at("occlusion_lift_gap_m").get_to(cfg.red_light.occlusion_lift_gap_m);
        if (r.contains("speed_mps")) r.at("speed_mps").get_to(cfg.red_light.speed_mps);
        if (r.contains("shared_feed")) r.at("shared_feed").get_to(cfg.red_light.shared_feed);
        if (r.contains("feed_period_ms")) r.at("feed_period_ms").get_to(cfg.red_light.feed_period_ms);
    }
    if (j.contains("jaywalk")) {
        const json& w = j.at("jaywalk");
        if (w.contains("pedestrian_gap_m")) w.at("pedestrian_gap_m").get_to(cfg.jaywalk.pedestrian_gap_m);
        if (w.contains("speed_mps")) w.at("speed_mps").get_to(cfg.jaywalk.speed_mps);
        if (w.contains("local_plan_ms")) w.at("local_plan_ms").get_to(cfg.jaywalk.local_plan_ms);
        if (w.contains("cached_plan_ms")) w.at("cached_plan_ms").get_to(cfg.jaywalk.cached_plan_ms);
        if (w.contains("swerve_threshold_m"))
            w.at("swerve_threshold_m").get_to(cfg.jaywalk.swerve_threshold_m);
        if (w.contains("pedestrian_enters"))
            w.at("pedestrian_enters").get_to(cfg.jaywalk.pedestrian_enters);
    }
    if (j.contains("mode")) {
        const json& m = j.at("mode");
        if (m.contains("mode")) {
            auto mode = mode_from_string(m.at("mode").get<std::string>());
            if (!mode) throw std::invalid_argument("unknown mode in config");
            cfg.mode.mode = *mode;
        }
        if (m.contains("cloud_response_ms")) m.at("cloud_response_ms").get_to(cfg.mode.cloud_response_ms);
    }
    if (j.contains("contingency")) j.at("contingency").get_to(cfg.contingency);
    if (j.contains("feed_rtt_ms")) j.at("feed_rtt_ms").get_to(cfg.feed_rtt_ms);
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        if (s.contains("speeds_mps")) s.at("speeds_mps").get_to(cfg.sweep.speeds_mps);
        if (s.contains("response_times_s")) s.at("response_times_s").get_to(cfg.sweep.response_times_s);
        if (s.contains("modes")) {
            cfg.sweep.modes.clear();
            for (const auto& name : s.at("modes")) {
                auto mode = mode_from_string(name.get<std::string>());
                if (!mode) throw std::invalid_argument("unknown mode in sweep");
                cfg.sweep.modes.push_back(*mode);
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_string(buf.str());
}

} // namespace cirrus::scenarios
