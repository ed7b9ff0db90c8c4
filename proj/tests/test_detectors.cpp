#include <algorithm>
#include <map>

#include "doctest.h"

#include "core/detectors.hpp"
#include "core/engine.hpp"
#include "harness.hpp"

using namespace bundlesim;
using namespace bundlesim::detectors;

namespace {

net::Network two_edges() {
    return net::build_network({{"a", net::NodeKind::plain, {}}, {"b", net::NodeKind::plain, {}}, {"c", net::NodeKind::plain, {}}},
                              {{"e0", "a", "b", 100.0, 13.89, 10, {}}, {"e1", "b", "c", 100.0, 13.89, 10, {}}}, {});
}

Motion move(const std::string& id, const dynamics::VehiclePlan& plan, std::size_t e0, double o0, std::size_t e1, double o1,
            double speed = 10.0) {
    return {&id, &plan, e0, o0, e1, o1, speed, 1000.0, 0.5};
}

}  // namespace

TEST_CASE("detect_crossings examples") {
    const auto net = two_edges();
    const auto plan = dynamics::make_plan(net, {0, 1});
    const std::string id = "v";
    auto det = make_detector({"d", "e0", 50.0, 50.0}, net);

    SUBCASE("straddling the loop") {
        const std::vector<Motion> m{move(id, plan, 0, 40.0, 0, 60.0)};
        CHECK(detect_crossings(det, m).size() == 1);
    }
    SUBCASE("standing on the loop") {
        const std::vector<Motion> m{move(id, plan, 0, 50.0, 0, 50.0, 0.0)};
        CHECK(detect_crossings(det, m).empty());
    }
    SUBCASE("leaving the loop counts once") {
        const std::vector<Motion> m{move(id, plan, 0, 50.0, 0, 51.0)};
        CHECK(detect_crossings(det, m).size() == 1);
        const std::vector<Motion> later{move(id, plan, 0, 51.0, 0, 60.0)};
        CHECK(detect_crossings(det, later).empty());
    }
    SUBCASE("rollover past a loop near the edge end") {
        det = make_detector({"d", "e0", 95.0, 50.0}, net);
        const std::vector<Motion> m{move(id, plan, 0, 90.0, 1, 5.0)};
        const auto c = detect_crossings(det, m);
        REQUIRE(c.size() == 1);
        CHECK(c[0].vehicle == "v");
        CHECK(c[0].co2_rate == 1000.0);
    }
    SUBCASE("loop on another edge") {
        det = make_detector({"d", "e1", 10.0, 50.0}, net);
        const std::vector<Motion> m{move(id, plan, 0, 40.0, 0, 60.0)};
        CHECK(detect_crossings(det, m).empty());
    }
}

TEST_CASE("flush_interval and partial windows") {
    const auto net = two_edges();
    auto det = make_detector({"d", "e0", 50.0, 50.0}, net);

    SUBCASE("empty window") {
        CHECK_FALSE(flush_interval(det, 49.0, 1.0));
        const auto iv = flush_interval(det, 50.0, 1.0);
        REQUIRE(iv);
        CHECK(*iv == io::DetectorInterval{"d", 0.0, 50.0, 0, -1.0, 0.0, 0.0});
        CHECK(det.interval_begin == 50.0);
    }
    SUBCASE("mean speed of two crossings") {
        det.crossings = {{"a", 10.0, 100.0, 0.1}, {"b", 14.0, 300.0, 0.2}};
        const auto iv = flush_interval(det, 50.0, 1.0);
        REQUIRE(iv);
        CHECK(iv->n_veh == 2);
        CHECK(iv->mean_speed == 12.0);
        CHECK(iv->co2_mg == 400.0);
        CHECK(iv->fuel_ml == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(det.crossings.empty());
    }
    SUBCASE("end at 470 with freq 50") {
        close_windows(det, 470.0, 1.0, true);
        REQUIRE(det.emitted.size() == 10);
        CHECK(det.emitted[8].end == 450.0);
        CHECK(det.emitted.back().begin == 450.0);
        CHECK(det.emitted.back().end == 470.0);
    }
    SUBCASE("no trailing window when the end falls on a boundary") {
        close_windows(det, 500.0, 1.0, true);
        CHECK(det.emitted.size() == 10);
        CHECK(det.emitted.back().end == 500.0);
    }
}

TEST_CASE("aggregation does not depend on crossing order") {
    const auto net = two_edges();
    testing::Gen g(41);
    for (int trial = 0; trial < 500; ++trial) {
        auto det = make_detector({"d", "e0", 50.0, 50.0}, net);
        const int n = g.integer(0, 12);
        for (int i = 0; i < n; ++i) {
            det.crossings.push_back({"v" + std::to_string(i), g.uniform(0.0, 30.0), g.uniform(0.0, 5000.0), g.unit()});
        }
        const auto reference = aggregate(det, 50.0, 1.0);
        for (std::size_t i = det.crossings.size(); i > 1; --i) std::swap(det.crossings[i - 1], det.crossings[g.index(i)]);
        CHECK(aggregate(det, 50.0, 1.0) == reference);
    }
}

TEST_CASE("conservation and tiling over 100 random scenarios") {
    testing::Gen g(2024);
    for (int trial = 0; trial < 100; ++trial) {
        CAPTURE(trial);
        const auto sc = testing::random_ring(g);
        engine::SimulationConfig cfg;
        cfg.t_max = 100000.0;
        cfg.record_trajectories = true;
        auto world = engine::World::load(sc.inputs, cfg);
        const auto result = world.run();
        REQUIRE_FALSE(result.t_max_exceeded);

        const auto oracle = testing::sweep_oracle(sc, result);
        const auto static_count = testing::route_passes(sc);
        for (const auto& d : sc.inputs.additional.detectors) {
            std::vector<io::DetectorInterval> ivs;
            for (const auto& iv : result.intervals) {
                if (iv.id == d.id) ivs.push_back(iv);
            }
            std::int64_t total = 0;
            for (const auto& iv : ivs) total += iv.n_veh;
            const auto get = [&](const auto& m) { auto it = m.find(d.id); return it == m.end() ? 0 : it->second; };
            CHECK(total == get(oracle));
            CHECK(total == get(static_count));

            REQUIRE_FALSE(ivs.empty());
            CHECK(ivs.front().begin == 0.0);
            CHECK(ivs.back().end == result.t_end);
            for (std::size_t i = 0; i < ivs.size(); ++i) {
                CHECK(ivs[i].begin < ivs[i].end);
                CHECK(ivs[i].end - ivs[i].begin <= d.freq * (1.0 + 1e-12));
                if (i + 1 < ivs.size()) {
                    CHECK(ivs[i].end == ivs[i + 1].begin);
                    CHECK(ivs[i].end - ivs[i].begin == doctest::Approx(d.freq).epsilon(1e-9));
                }
                if (ivs[i].n_veh == 0) {
                    CHECK(ivs[i].mean_speed == -1.0);
                    CHECK(ivs[i].co2_mg == 0.0);
                    CHECK(ivs[i].fuel_ml == 0.0);
                }
            }
        }
    }
}
