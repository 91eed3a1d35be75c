#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cirrus/netsim.hpp"

namespace cirrus::scenarios {

struct DetectorConfig {
    std::string name;
    double local_runtime_ms = 0.0;
    double cloud_runtime_ms = 0.0;
    double detection_range_m = 60.0;
    int consecutive_frames_required = 3;
};

// The six detector configurations with measured on-vehicle / cloud runtimes.
std::vector<DetectorConfig> default_detectors();

struct SpeedupRow {
    std::string name;
    double local_ms;
    double cloud_ms;
    double speedup; // local / cloud, 2 decimals
};
std::vector<SpeedupRow> speedup_table(const std::vector<DetectorConfig>& detectors);
void print_speedup_table(const std::vector<SpeedupRow>& rows, std::ostream& out);

// v * t_reaction + v^2 / (2a), in meters.
double stopping_distance(double speed_mps, double decel_mps2, double reaction_ms);
// Same quantity by step integration (midpoint rule) at dt_ms resolution.
double stopping_distance_integrated(double speed_mps, double decel_mps2, double reaction_ms,
                                    double dt_ms = 1.0);

enum class Mode { Local, Cloud, Ours };
const char* to_string(Mode m);
std::optional<Mode> mode_from_string(const std::string& s);

struct ModeSpec {
    Mode mode = Mode::Local;
    // Cloud / Ours: full request-to-response time of the cloud detector (ms).
    double cloud_response_ms = 0.0;
};

// Knobs shared by all scenario variants. Defaults are the documented
// calibration under which the sweep reproduces the reference safety pattern.
struct ScenarioConfig {
    double frame_period_ms = 33.33; // 30 Hz camera
    double decel_mps2 = 7.5;
    double pipeline_overhead_ms = 200.0; // non-detection pipeline latency
    double deadline_margin_ms = 150.0;   // slack in the speculative deadline policy
    double long_deadline_ms = 3000.0;    // used when the local fallback cannot help
    DetectorConfig local_detector;       // defaults to DETR-ResNet-50
    DetectorConfig cloud_detector;       // defaults to DETR-ResNet-101
    std::uint64_t seed = 0;

    ScenarioConfig();
};

struct TrafficJamConfig {
    double gap_m = 119.0;
    double speed_mps = 22.0;
};

struct RedLightConfig {
    double initial_gap_m = 60.0;       // AV distance to the conflict point
    double occlusion_lift_gap_m = 25.0; // crossing vehicle visible below this gap
    double speed_mps = 18.0;
    bool shared_feed = false;
    double feed_period_ms = 100.0;
};

struct JaywalkConfig {
    double pedestrian_gap_m = 10.0;
    double speed_mps = 20.0;
    double local_plan_ms = 500.0;
    double cached_plan_ms = 400.0;
    double swerve_threshold_m = 2.0;
    bool pedestrian_enters = true;
};

struct FrameRecord {
    std::uint64_t frame = 0;
    double capture_ms = 0.0;
    bool detected = false;
    double delivered_ms = 0.0;
    std::string source;
};

struct Outcome {
    bool collided = false;
    double min_gap_m = 0.0;
    double brake_instant_ms = -1.0; // effective brake actuation; -1 when never issued
    double stop_instant_ms = -1.0;
    std::vector<FrameRecord> frames;
};

// Handler-chosen relative deadline for the speculative mode: the remaining
// budget under which a locally-detected obstacle still stops the vehicle, or
// long_deadline_ms when the local fallback cannot avoid a collision anyway.
double choose_deadline_ms(const ScenarioConfig& cfg, double speed_mps);

Outcome run_traffic_jam(const ScenarioConfig& cfg, const TrafficJamConfig& jam,
                        const ModeSpec& mode);
Outcome run_red_light(const ScenarioConfig& cfg, const RedLightConfig& rl, const ModeSpec& mode,
                      const netsim::LatencyModel& shared_feed_latency);
Outcome run_jaywalk(const ScenarioConfig& cfg, const JaywalkConfig& jay, bool contingency);

// Per-frame detector response, before pipeline overhead.
double frame_response_ms(const DetectorConfig& detector, Mode mode, double rtt_ms);

struct SweepAxes {
    std::vector<double> speeds_mps{11, 18, 20, 22, 24};
    std::vector<double> response_times_s{0.5, 0.75, 1.0, 1.25, 1.5, 3.0};
    std::vector<Mode> modes{Mode::Local, Mode::Cloud, Mode::Ours};
};

struct SweepCell {
    double speed_mps;
    double response_time_s;
    Mode mode;
    Outcome outcome;
};

std::vector<SweepCell> sweep_matrix(const ScenarioConfig& cfg, const TrafficJamConfig& jam,
                                    const SweepAxes& axes);
void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out);
void print_sweep_grid(const std::vector<SweepCell>& cells, const SweepAxes& axes,
                      std::ostream& out, bool color);

// Top-level experiment description, loadable from JSON.
struct ExperimentConfig {
    std::string variant = "traffic_jam"; // traffic_jam | red_light | jaywalk
    ScenarioConfig common;
    TrafficJamConfig traffic_jam;
    RedLightConfig red_light;
    JaywalkConfig jaywalk;
    ModeSpec mode{Mode::Ours, 500.0};
    bool contingency = true; // jaywalk
    double feed_rtt_ms = 68.0;
    SweepAxes sweep;
    std::vector<DetectorConfig> detectors = default_detectors();
};

ExperimentConfig load_config(const std::string& path);
std::string to_json_string(const ExperimentConfig& cfg);
ExperimentConfig config_from_json_string(const std::string& text);

} // namespace cirrus::scenarios
