#include <cmath>
#include <limits>

#include "doctest.h"

#include "core/dynamics.hpp"
#include "core/network.hpp"
#include "harness.hpp"

using namespace bundlesim;
using namespace bundlesim::dynamics;
using testing::all_edges;
using testing::chain;

namespace {

const KraussParams kDefault{};  // tau 1, b 4.5, sigma 0

/// The same chain with a traffic light at the end of the first edge.
net::Network signalled_chain(double first_length, net::Signal state) {
    std::vector<net::Node> nodes = {{"n0", net::NodeKind::plain, {}},
                                    {"n1", net::NodeKind::traffic_light, "tl"},
                                    {"n2", net::NodeKind::plain, {}}};
    std::vector<net::Edge> edges = {{"e0", "n0", "n1", first_length, 13.89, 10, {}},
                                    {"e1", "n1", "n2", 500.0, 13.89, 10, {}}};
    net::TrafficLightProgram p{"tl", 0.0, {"e0"}, {{100.0, {state}}}};
    return net::build_network(std::move(nodes), std::move(edges), {p});
}

io::VehicleTypeSpec truck() { return io::reference_single_truck(); }

}  // namespace

TEST_CASE("krauss_safe_speed closed forms") {
    CHECK(krauss_safe_speed(10.0, 0.0, kDefault) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(krauss_safe_speed(0.0, 0.0, kDefault) == 0.0);
    const double v = krauss_safe_speed(0.0, 10.0, kDefault);
    CHECK(v == doctest::Approx(-4.5 + std::sqrt(120.25)).epsilon(1e-12));
    CHECK(v == doctest::Approx(6.466).epsilon(1e-4));
    CHECK(v < 10.0);
}

TEST_CASE("euler_equivalent_leader_speed matches the stepped braking distance") {
    testing::Gen g(8);
    for (int i = 0; i < 2000; ++i) {
        const double v = g.uniform(0.0, 30.0);
        const double d = g.uniform(0.5, 9.0);
        const double b = g.uniform(0.5, 9.0);
        const double dt = std::array{0.1, 0.5, 1.0}[g.index(3)];
        // Oracle: step the leader's braking explicitly.
        double speed = v, covered = 0.0;
        while (true) {
            speed = std::max(0.0, speed - d * dt);
            if (speed <= 0.0) break;
            covered += speed * dt;
        }
        const double eq = euler_equivalent_leader_speed(v, d, b, dt);
        CHECK(eq * eq / (2.0 * b) == doctest::Approx(covered).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("step_speed") {
    const auto vt = truck();
    VehicleState s;
    SUBCASE("free flow saturates at the limit") {
        s.speed = 14.0;
        CHECK(step_speed(s, 15.0, std::numeric_limits<double>::infinity(), vt, kDefault, 1.0, 0.3) == 15.0);
    }
    SUBCASE("red light as a stopped leader 10 m ahead") {
        s.speed = 10.0;
        const double v_safe = obstacle_safe_speed({10.0, 0.0, 0.0, ObstacleKind::signal}, kDefault, 1.0);
        CHECK(v_safe == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(step_speed(s, 13.89, v_safe, vt, kDefault, 1.0, 0.0) <= 6.0 + 1e-12);
    }
    SUBCASE("sigma 0 ignores the noise draw") {
        testing::Gen g(2);
        for (int i = 0; i < 1000; ++i) {
            s.speed = g.uniform(0.0, 20.0);
            const double lim = g.uniform(1.0, 20.0), safe = g.uniform(0.0, 25.0);
            CHECK(step_speed(s, lim, safe, vt, kDefault, 1.0, 0.0) == step_speed(s, lim, safe, vt, kDefault, 1.0, 1.0));
        }
    }
    SUBCASE("never below the decel bound or zero") {
        s.speed = 10.0;
        CHECK(step_speed(s, 13.89, 0.0, vt, kDefault, 1.0, 0.0) == 6.0);
        s.speed = 2.0;
        CHECK(step_speed(s, 13.89, 0.0, vt, kDefault, 1.0, 0.0) == 0.0);
    }
}

TEST_CASE("free_flow_speed") {
    auto vt = truck();
    CHECK(free_flow_speed(13.89, vt) == 13.89);
    CHECK(free_flow_speed(22.22, vt) == 15.0);
    CHECK(free_flow_speed(3.0, vt) == 3.0);  // the 5 m/s floor never exceeds the limit
}

TEST_CASE("obstacle_ahead") {
    const auto vt = truck();
    auto run = [&](const net::Network& net, const TrafficSnapshot& traffic, const VehicleState& s, double t = 0.0) {
        const auto plan = make_plan(net, all_edges(net));
        const auto signals = signal_states_at(net, t);
        const Surroundings around{net, signals, traffic};
        return obstacle_ahead(s, 0, plan, vt, around, kDefault, 1.0);
    };
    VehicleState s;
    s.offset = 75.0;
    s.speed = 10.0;

    SUBCASE("green light and empty road") {
        const auto net = signalled_chain(100.0, net::Signal::green);
        CHECK_FALSE(run(net, TrafficSnapshot(net.edges().size()), s));
    }
    SUBCASE("red light 25 m ahead") {
        const auto net = signalled_chain(100.0, net::Signal::red);
        const auto o = run(net, TrafficSnapshot(net.edges().size()), s);
        REQUIRE(o);
        CHECK(o->gap == 25.0);
        CHECK(o->leader_speed == 0.0);
        CHECK(o->kind == ObstacleKind::signal);
    }
    SUBCASE("a slow leader 8 m ahead beats a red light at 25 m") {
        const auto net = signalled_chain(100.0, net::Signal::red);
        TrafficSnapshot traffic(net.edges().size());
        traffic.add({1, 0, 75.0 + 8.0 + vt.length + vt.min_gap, vt.length, 5.0, vt.decel});
        traffic.sort();
        const auto o = run(net, traffic, s);
        REQUIRE(o);
        CHECK(o->gap == doctest::Approx(8.0).epsilon(1e-12));
        CHECK(o->leader_speed == 5.0);
        CHECK(o->kind == ObstacleKind::vehicle);
    }
    SUBCASE("yellow is passed when stopping is impossible") {
        const auto net = signalled_chain(100.0, net::Signal::yellow);
        s.offset = 95.0;  // 5 m left, braking from 10 m/s needs 11.1 m
        CHECK_FALSE(run(net, TrafficSnapshot(net.edges().size()), s));
        s.offset = 60.0;
        CHECK(run(net, TrafficSnapshot(net.edges().size()), s));
    }
    SUBCASE("leader on the next edge") {
        const auto net = chain({100.0, 100.0});
        TrafficSnapshot traffic(net.edges().size());
        traffic.add({1, 1, 30.0, 12.0, 3.0, 4.0});
        traffic.sort();
        const auto o = run(net, traffic, s);
        REQUIRE(o);
        CHECK(o->gap == doctest::Approx(25.0 + 30.0 - 12.0 - vt.min_gap).epsilon(1e-12));
    }
}

TEST_CASE("advance_position examples") {
    const auto net = chain({100.0, 100.0});
    const auto plan = make_plan(net, all_edges(net));

    SUBCASE("edge rollover") {
        VehicleState s;
        s.offset = 95.0;
        s.speed = 10.0;
        const auto next = advance_position(s, plan, 10.0, 1.0, 1.0);
        CHECK(next.edge_index == 1);
        CHECK(next.offset == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(next.distance() == 10.0);
    }
    SUBCASE("a vehicle exactly at the edge end stays on it") {
        VehicleState s;
        s.offset = 90.0;
        const auto next = advance_position(s, plan, 10.0, 1.0, 1.0);
        CHECK(next.edge_index == 0);
        CHECK(next.offset == 100.0);
    }
    SUBCASE("dwell countdown") {
        VehicleState s;
        s.offset = 50.0;
        s.stop_state = Dwelling{30.0};
        const auto next = advance_position(s, plan, 10.0, 1.0, 1.0);
        REQUIRE(next.dwelling());
        CHECK(std::get<Dwelling>(next.stop_state).remaining == 29.0);
        CHECK(next.offset == 50.0);
        CHECK(next.speed == 0.0);
    }
    SUBCASE("arrival at the route end") {
        VehicleState s;
        s.edge_index = 1;
        s.offset = 95.0;
        s.speed = 10.0;
        const auto next = advance_position(s, plan, 10.0, 1.0, 42.0);
        CHECK(next.done());
        REQUIRE(next.arrived_at);
        CHECK(*next.arrived_at == 42.0);
        CHECK(next.offset == 100.0);
        CHECK(next.distance() == 5.0);
    }
}

TEST_CASE("no collision over 10^4 randomised leader profiles") {
    testing::Gen g(424242);
    double closest = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 10000; ++trial) {
        CAPTURE(trial);
        const double gap = testing::collision_trial(g);
        REQUIRE(gap >= 0.0);
        closest = std::min(closest, gap);
    }
    MESSAGE("closest approach over all scenarios: " << closest << " m");
}

TEST_CASE("speed stays within the edge limit after a one-step transition") {
    testing::Gen g(99);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<net::Node> nodes;
        std::vector<net::Edge> edges;
        const int n = g.integer(2, 8);
        for (int i = 0; i <= n; ++i) nodes.push_back({"n" + std::to_string(i), net::NodeKind::plain, {}});
        for (int i = 0; i < n; ++i) {
            edges.push_back({"e" + std::to_string(i), nodes[static_cast<std::size_t>(i)].id,
                             nodes[static_cast<std::size_t>(i) + 1].id, g.uniform(30.0, 400.0), g.uniform(3.0, 30.0), 10,
                             {}});
        }
        const auto net = net::build_network(nodes, edges, {});
        const auto plan = make_plan(net, all_edges(net));
        auto vt = truck();
        vt.max_speed = g.uniform(5.0, 35.0);
        vt.min_speed = g.uniform(0.1, vt.max_speed);
        vt.decel = g.uniform(1.0, 9.0);
        const KraussParams params{1.0, std::min(4.5, vt.decel), 0.0};

        VehicleState s;
        std::size_t entered_at_step = 0;
        std::size_t last_edge = 0;
        for (int k = 0; k < 2000 && !s.done(); ++k) {
            const double limit = std::min(free_flow_speed(net.edge_at(plan.edges[s.edge_index]).speed_limit, vt),
                                          speed_limit_ahead(s, plan, net, vt, params, 1.0));
            const double v = step_speed(s, limit, std::numeric_limits<double>::infinity(), vt, params, 1.0, 0.0);
            s = advance_position(s, plan, v, 1.0, k + 1.0);
            CHECK(s.speed >= 0.0);
            if (s.edge_index != last_edge) {
                last_edge = s.edge_index;
                entered_at_step = static_cast<std::size_t>(k);
            }
            const double edge_limit = net.edge_at(plan.edges[s.edge_index]).speed_limit;
            // The step that crosses onto a slower edge used the previous edge's limit.
            if (static_cast<std::size_t>(k) > entered_at_step) CHECK(s.speed <= edge_limit + 1e-12);
        }
    }
}

TEST_CASE("odometer tracks the summed step distances") {
    testing::Gen g(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> lengths;
        const int n = g.integer(1, 10);
        for (int i = 0; i < n; ++i) lengths.push_back(g.uniform(1.0, 300.0));
        const auto net = chain(lengths, g.uniform(3.0, 30.0));
        const auto plan = make_plan(net, all_edges(net));
        auto vt = truck();
        const double dt = std::array{1.0, 0.5, 0.1}[g.index(3)];
        VehicleState s;
        double naive = 0.0;
        for (int k = 0; k < 100000 && !s.done(); ++k) {
            const double limit = free_flow_speed(net.edge_at(plan.edges[s.edge_index]).speed_limit, vt);
            const double v = step_speed(s, limit, std::numeric_limits<double>::infinity(), vt, kDefault, dt, 0.0);
            s = advance_position(s, plan, v, dt, (k + 1) * dt);
            if (s.done()) break;
            naive += v * dt;
            CHECK(testing::rel_diff(s.distance(), naive) <= 1e-9);
            CHECK(testing::rel_diff(s.distance(), plan.coordinate(s.edge_index, s.offset)) <= 1e-9);
        }
        REQUIRE(s.done());
        CHECK(testing::rel_diff(s.distance(), plan.total_length) <= 1e-9);
    }
}

TEST_CASE("a pending stop is always reached before its end position") {
    testing::Gen g(31);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> lengths;
        const int n = g.integer(1, 5);
        for (int i = 0; i < n; ++i) lengths.push_back(g.uniform(10.0, 400.0));
        const auto net = chain(lengths, g.uniform(3.0, 30.0));

        std::vector<PlannedStop> stops;
        double min_coord = 0.0;
        for (std::size_t k = 0; k < lengths.size(); ++k) {
            if (!g.chance(0.6)) continue;
            const double start = g.uniform(0.0, lengths[k] * 0.8);
            const double end = std::min(lengths[k], start + g.uniform(0.5, 30.0));
            stops.push_back({"s" + std::to_string(k), k, start, end, g.uniform(0.0, 20.0)});
        }
        const auto plan = make_plan(net, all_edges(net), stops);
        auto vt = truck();
        vt.accel = g.uniform(0.5, 3.0);
        vt.decel = g.uniform(1.0, 9.0);
        const KraussParams params{1.0, std::min(4.5, vt.decel), 0.0};
        const double dt = std::array{1.0, 0.5}[g.index(2)];

        VehicleState s;
        std::size_t dwells_seen = 0;
        bool was_dwelling = false;
        for (int k = 0; k < 20000 && !s.done(); ++k) {
            double v = 0.0;
            if (!s.dwelling()) {
                const TrafficSnapshot traffic(net.edges().size());
                const SignalStates signals(net.edges().size());
                const Surroundings around{net, signals, traffic};
                double v_safe = std::numeric_limits<double>::infinity();
                if (auto o = obstacle_ahead(s, 0, plan, vt, around, params, dt)) v_safe = obstacle_safe_speed(*o, params, dt);
                const double limit = free_flow_speed(net.edge_at(plan.edges[s.edge_index]).speed_limit, vt);
                v = step_speed(s, limit, v_safe, vt, params, dt, 0.0);
            }
            s = advance_position(s, plan, v, dt, (k + 1) * dt);
            if (s.dwelling() && !was_dwelling) {
                ++dwells_seen;
                const auto& stop = plan.stops[s.next_stop];
                CHECK(s.edge_index == stop.route_index);
                CHECK(s.offset >= stop.start_pos);
                CHECK(s.offset <= stop.end_pos);
            }
            was_dwelling = s.dwelling();
            if (s.next_stop < plan.stops.size() && !s.dwelling()) {
                const auto& stop = plan.stops[s.next_stop];
                REQUIRE(plan.coordinate(s.edge_index, s.offset) <= plan.coordinate(stop.route_index, stop.end_pos) + 1e-9);
            }
            min_coord = plan.coordinate(s.edge_index, s.offset);
        }
        REQUIRE(s.done());
        std::size_t positive_dwells = 0;
        for (const auto& st : stops) positive_dwells += st.dwell > 0.0 ? 1 : 0;
        CHECK(dwells_seen >= positive_dwells);
        (void)min_coord;
    }
}
