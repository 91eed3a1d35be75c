#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "cirrus/scenarios.hpp"

using namespace cirrus;
using namespace cirrus::scenarios;

TEST_CASE("closed-form stopping distance") {
    CHECK(stopping_distance(22, 7.5, 0) == doctest::Approx(32.27).epsilon(0.001));
    CHECK(stopping_distance(0, 7.5, 500) == 0.0);
    CHECK(stopping_distance(18, 7.5, 1000) == doctest::Approx(39.6));
    CHECK_THROWS(stopping_distance(10, 0, 100));
}

TEST_CASE("step integration matches the closed form within 0.1%") {
    int combos = 0;
    for (double v : {5.0, 11.0, 18.0, 22.0, 30.0}) {
        for (double a : {4.0, 7.5}) {
            for (double tr : {0.0, 500.0}) {
                double closed = stopping_distance(v, a, tr);
                double stepped = stopping_distance_integrated(v, a, tr, 1.0);
                CHECK(stepped == doctest::Approx(closed).epsilon(0.001));
                ++combos;
            }
        }
    }
    CHECK(combos == 20);
}

TEST_CASE("speedup table from the stored runtime pairs") {
    auto rows = speedup_table(default_detectors());
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].name == "DETR-ResNet-50");
    CHECK(rows[0].speedup == doctest::Approx(2.95));
    CHECK(rows[5].name == "DINO-SWIN-Large");
    CHECK(rows[5].speedup == doctest::Approx(8.46));

    auto equal = speedup_table({{"same", 100.0, 100.0, 60.0, 3}});
    CHECK(equal[0].speedup == doctest::Approx(1.00));
}

TEST_CASE("per-frame arbitrage window at the median round trip") {
    DetectorConfig r101 = default_detectors()[1];
    double local = frame_response_ms(r101, Mode::Local, 0.0);
    double cloud = frame_response_ms(r101, Mode::Cloud, 68.0);
    CHECK(local - cloud == doctest::Approx(221.5).epsilon(1e-9));
    CHECK(std::abs((local - cloud) - 221.5) < 1.0);
}

TEST_CASE("deadline policy tracks the remaining braking budget") {
    ScenarioConfig cfg;
    CHECK(choose_deadline_ms(cfg, 11) == doctest::Approx(2668.19).epsilon(0.001));
    CHECK(choose_deadline_ms(cfg, 18) == doctest::Approx(716.67).epsilon(0.001));
    CHECK(choose_deadline_ms(cfg, 20) == doctest::Approx(350.0).epsilon(0.001));
    // Past the point where a local detection could still stop the vehicle the
    // policy stretches to the long deadline: only the cloud can help.
    CHECK(choose_deadline_ms(cfg, 22) == cfg.long_deadline_ms);
    CHECK(choose_deadline_ms(cfg, 24) == cfg.long_deadline_ms);
}

namespace {

std::vector<SweepCell> reference_sweep() {
    static std::vector<SweepCell> cells =
        sweep_matrix(ScenarioConfig{}, TrafficJamConfig{}, SweepAxes{});
    return cells;
}

bool cell_collided(const std::vector<SweepCell>& cells, double speed, double rt, Mode mode) {
    for (const auto& c : cells)
        if (c.speed_mps == speed && c.response_time_s == rt && c.mode == mode)
            return c.outcome.collided;
    FAIL("missing sweep cell");
    return false;
}

} // namespace

TEST_CASE("safety sweep reproduces the reference 90-cell pattern") {
    auto cells = reference_sweep();
    REQUIRE(cells.size() == 90);

    // '.' = no collision, 'x' = collision, columns 0.5..3.0 s.
    const std::map<std::pair<int, Mode>, std::string> expected = {
        {{11, Mode::Local}, "......"}, {{11, Mode::Cloud}, "......"}, {{11, Mode::Ours}, "......"},
        {{18, Mode::Local}, "......"}, {{18, Mode::Cloud}, ".....x"}, {{18, Mode::Ours}, "......"},
        {{20, Mode::Local}, "......"}, {{20, Mode::Cloud}, "....xx"}, {{20, Mode::Ours}, "......"},
        {{22, Mode::Local}, "xxxxxx"}, {{22, Mode::Cloud}, "..xxxx"}, {{22, Mode::Ours}, "..xxxx"},
        {{24, Mode::Local}, "xxxxxx"}, {{24, Mode::Cloud}, ".xxxxx"}, {{24, Mode::Ours}, ".xxxxx"},
    };
    const std::vector<double> times{0.5, 0.75, 1.0, 1.25, 1.5, 3.0};
    for (const auto& [key, row] : expected) {
        for (std::size_t i = 0; i < times.size(); ++i) {
            bool want = row[i] == 'x';
            INFO("speed=", key.first, " mode=", to_string(key.second), " rt=", times[i]);
            CHECK(cell_collided(cells, key.first, times[i], key.second) == want);
        }
    }
}

TEST_CASE("collisions are monotone in speed and response time") {
    auto cells = reference_sweep();
    const std::vector<double> speeds{11, 18, 20, 22, 24};
    const std::vector<double> times{0.5, 0.75, 1.0, 1.25, 1.5, 3.0};
    for (Mode mode : {Mode::Local, Mode::Cloud, Mode::Ours}) {
        for (std::size_t s = 0; s + 1 < speeds.size(); ++s)
            for (double rt : times)
                CHECK(cell_collided(cells, speeds[s], rt, mode) <=
                      cell_collided(cells, speeds[s + 1], rt, mode));
        for (double speed : speeds)
            for (std::size_t r = 0; r + 1 < times.size(); ++r)
                CHECK(cell_collided(cells, speed, times[r], mode) <=
                      cell_collided(cells, speed, times[r + 1], mode));
    }
}

TEST_CASE("speculation never loses to the local baseline on the sweep") {
    auto cells = reference_sweep();
    const std::vector<double> speeds{11, 18, 20, 22, 24};
    const std::vector<double> times{0.5, 0.75, 1.0, 1.25, 1.5, 3.0};
    for (double speed : speeds)
        for (double rt : times)
            if (cell_collided(cells, speed, rt, Mode::Ours))
                CHECK(cell_collided(cells, speed, rt, Mode::Local));
}

TEST_CASE("with a local-runtime deadline the speculative mode equals local") {
    // Forcing the budget negative routes every message to the long deadline,
    // which we pin to the local runtime; no 0.5-3.0 s cloud response can meet
    // it, so the outcome must match the Local baseline cell for cell.
    ScenarioConfig cfg;
    cfg.deadline_margin_ms = 1e9;
    cfg.long_deadline_ms = cfg.local_detector.local_runtime_ms;
    auto cells = sweep_matrix(cfg, TrafficJamConfig{}, SweepAxes{});
    ScenarioConfig plain;
    auto base = sweep_matrix(plain, TrafficJamConfig{}, SweepAxes{});
    for (const auto& c : cells) {
        if (c.mode != Mode::Ours) continue;
        CHECK(c.outcome.collided ==
              cell_collided(base, c.speed_mps, c.response_time_s, Mode::Local));
    }
}

TEST_CASE("cloud meeting every deadline brakes exactly like the cloud baseline") {
    ScenarioConfig cfg;
    TrafficJamConfig jam; // 18 m/s leaves a 716 ms budget
    jam.speed_mps = 18.0;
    ModeSpec fast_cloud{Mode::Cloud, 500.0};
    ModeSpec fast_ours{Mode::Ours, 500.0};
    auto cloud = run_traffic_jam(cfg, jam, fast_cloud);
    auto ours = run_traffic_jam(cfg, jam, fast_ours);
    CHECK(ours.brake_instant_ms == doctest::Approx(cloud.brake_instant_ms));
}

TEST_CASE("scenario outcomes are deterministic for a fixed seed") {
    ScenarioConfig cfg;
    TrafficJamConfig jam;
    ModeSpec mode{Mode::Ours, 750.0};
    auto a = run_traffic_jam(cfg, jam, mode);
    auto b = run_traffic_jam(cfg, jam, mode);
    CHECK(a.collided == b.collided);
    CHECK(a.min_gap_m == b.min_gap_m);
    CHECK(a.brake_instant_ms == b.brake_instant_ms);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        CHECK(a.frames[i].delivered_ms == b.frames[i].delivered_ms);
        CHECK(a.frames[i].detected == b.frames[i].detected);
    }
}

TEST_CASE("red light: only the shared location feed prevents the collision") {
    ScenarioConfig cfg;
    RedLightConfig rl;
    netsim::LatencyModel feed{netsim::Constant{68.0}};

    auto local = run_red_light(cfg, rl, ModeSpec{Mode::Local, 0.0}, feed);
    CHECK(local.collided);
    auto cloud = run_red_light(cfg, rl, ModeSpec{Mode::Cloud, 500.0}, feed);
    CHECK(cloud.collided);

    rl.shared_feed = true;
    auto with_feed = run_red_light(cfg, rl, ModeSpec{Mode::Local, 0.0}, feed);
    CHECK_FALSE(with_feed.collided);
    // The brake decision precedes the occlusion lift.
    double lift_ms = (rl.initial_gap_m - rl.occlusion_lift_gap_m) / rl.speed_mps * 1000.0;
    CHECK(with_feed.brake_instant_ms < lift_ms);
}

TEST_CASE("jaywalk: cached contingency plan avoids the pedestrian") {
    ScenarioConfig cfg;
    JaywalkConfig jay;
    auto slow = run_jaywalk(cfg, jay, false);
    CHECK(slow.collided); // 500 ms at 20 m/s covers the full 10 m gap
    auto fast = run_jaywalk(cfg, jay, true);
    CHECK_FALSE(fast.collided); // 400 ms leaves 2 m, enough to swerve
    CHECK(fast.min_gap_m == doctest::Approx(2.0));

    jay.pedestrian_enters = false;
    auto calm = run_jaywalk(cfg, jay, false);
    CHECK_FALSE(calm.collided);
    CHECK(calm.brake_instant_ms == -1.0); // no plan enacted
}

TEST_CASE("sweep csv carries the documented header and one row per cell") {
    ScenarioConfig cfg;
    SweepAxes axes;
    axes.speeds_mps = {11};
    axes.response_times_s = {0.5};
    axes.modes = {Mode::Local};
    auto cells = sweep_matrix(cfg, TrafficJamConfig{}, axes);
    REQUIRE(cells.size() == 1);
    std::ostringstream out;
    write_sweep_csv(cells, out);
    std::istringstream in(out.str());
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "speed_mps,response_time_s,mode,collided,min_gap_m,brake_instant_ms");
    CHECK(row.rfind("11,0.5,local,0,", 0) == 0);
    CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("experiment config survives a json round trip") {
    ExperimentConfig cfg;
    cfg.variant = "red_light";
    cfg.red_light.shared_feed = true;
    cfg.common.seed = 9;
    cfg.mode = {Mode::Cloud, 750.0};
    std::string text = to_json_string(cfg);
    ExperimentConfig back = config_from_json_string(text);
    CHECK(to_json_string(back) == text);
    CHECK(back.variant == "red_light");
    CHECK(back.red_light.shared_feed);
    CHECK(back.common.seed == 9);
    CHECK(back.mode.mode == Mode::Cloud);

    CHECK_THROWS(config_from_json_string("{\"common\":{\"local_detector\":\"nope\"}}"));
    CHECK_THROWS(config_from_json_string("not json"));
}
