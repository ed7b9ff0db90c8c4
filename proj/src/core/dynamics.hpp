#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core/network.hpp"
#include "core/numbers.hpp"
#include "core/scenario_io.hpp"

namespace bundlesim::dynamics {

struct KraussParams {
    double tau = 1.0;      // s
    double decel_b = 4.5;  // m/s^2
    double sigma = 0.0;

    bool operator==(const KraussParams&) const = default;
};

/// A vehicle that gets within this distance of a pending stop's end position
/// (inside the stop interval) is halted there.
inline constexpr double kStopReachTolerance = 0.5;  // m
/// Below this speed a vehicle inside a pending stop interval counts as halted.
inline constexpr double kHaltSpeed = 0.1;  // m/s

struct PlannedStop {
    std::string id;
    std::size_t route_index = 0;  // position of the stop's edge in the route
    double start_pos = 0.0;
    double end_pos = 0.0;
    double dwell = 0.0;

    bool operator==(const PlannedStop&) const = default;
};

/// A vehicle's route resolved against the network.
struct VehiclePlan {
    std::vector<std::size_t> edges;   // network edge indices
    std::vector<double> lengths;      // edge lengths, same order
    std::vector<double> edge_start;   // route coordinate of each edge start
    double total_length = 0.0;
    std::vector<PlannedStop> stops;   // in route order

    double coordinate(std::size_t edge_index, double offset) const { return edge_start.at(edge_index) + offset; }
};

VehiclePlan make_plan(const net::Network& network, const std::vector<std::size_t>& edges,
                      std::vector<PlannedStop> stops = {});

struct Driving {
    bool operator==(const Driving&) const = default;
};
struct Dwelling {
    double remaining = 0.0;
    bool operator==(const Dwelling&) const = default;
};
struct Done {
    bool operator==(const Done&) const = default;
};
using StopState = std::variant<Driving, Dwelling, Done>;

struct VehicleState {
    std::string id;
    std::string vtype;
    std::size_t edge_index = 0;  // position in the route
    double offset = 0.0;         // front bumper, m from edge start
    double speed = 0.0;
    double accel_applied = 0.0;
    StopState stop_state = Driving{};
    std::size_t next_stop = 0;   // index into VehiclePlan::stops
    CompensatedSum odometer;
    std::optional<double> departed_at;
    std::optional<double> arrived_at;

    double distance() const { return odometer.value(); }
    bool dwelling() const { return std::holds_alternative<Dwelling>(stop_state); }
    bool done() const { return std::holds_alternative<Done>(stop_state); }
};

/// Krauss safe speed: -b*tau + sqrt((b*tau)^2 + v_l^2 + 2*b*gap), never negative.
double krauss_safe_speed(double gap, double leader_speed, const KraussParams& params) noexcept;

/// Speed whose continuous braking distance at `follower_decel` equals the
/// distance a leader covers when braking at `leader_decel` under the
/// position update x += v_next*dt. Feeding this instead of the raw leader speed
/// keeps the continuous safe-speed formula collision free in discrete time.
double euler_equivalent_leader_speed(double leader_speed, double leader_decel, double follower_decel,
                                     double dt) noexcept;

/// Free-flow desired speed on an edge with limit `v_limit`.
double free_flow_speed(double v_limit, const io::VehicleTypeSpec& vtype) noexcept;

/// One Krauss speed update; `noise` is a uniform draw in [0, 1].
double step_speed(const VehicleState& state, double v_limit, double v_safe, const io::VehicleTypeSpec& vtype,
                  const KraussParams& params, double dt, double noise) noexcept;

enum class ObstacleKind { vehicle, signal, stop };

struct Obstacle {
    double gap = 0.0;           // m, already net of the follower's min gap for vehicles
    double leader_speed = 0.0;  // m/s
    double leader_decel = 0.0;  // m/s^2; 0 for fixed obstacles
    ObstacleKind kind = ObstacleKind::vehicle;

    bool operator==(const Obstacle&) const = default;
};

/// A vehicle's footprint in the pre-step snapshot.
struct Occupant {
    std::size_t vehicle = 0;  // caller-defined identity, also the tie-break order
    std::size_t edge = 0;     // network edge index
    double offset = 0.0;
    double length = 0.0;
    double speed = 0.0;
    double decel = 0.0;
};

/// Occupants bucketed by network edge, sorted by offset.
class TrafficSnapshot {
public:
    explicit TrafficSnapshot(std::size_t edge_count) : by_edge_(edge_count) {}

    void add(const Occupant& occ) { by_edge_.at(occ.edge).push_back(occ); }
    void sort();
    const std::vector<Occupant>& on_edge(std::size_t edge) const { return by_edge_.at(edge); }

private:
    std::vector<std::vector<Occupant>> by_edge_;
};

/// Signal shown at the downstream end of every edge; nullopt for uncontrolled edges.
using SignalStates = std::vector<std::optional<net::Signal>>;

SignalStates signal_states_at(const net::Network& network, double t);

/// Context a vehicle needs to look ahead.
struct Surroundings {
    const net::Network& network;
    const SignalStates& signals;
    const TrafficSnapshot& traffic;
};

/// How far ahead a vehicle looks for leaders, signals, stops and speed drops.
double lookahead_distance(const io::VehicleTypeSpec& vtype, const KraussParams& params) noexcept;

/// Highest speed from which the vehicle can still brake at b to the free-flow
/// speed of every slower edge ahead before entering it. Never below that edge's
/// own free-flow speed; infinity when nothing ahead is slower.
double speed_limit_ahead(const VehicleState& state, const VehiclePlan& plan, const net::Network& network,
                         const io::VehicleTypeSpec& vtype, const KraussParams& params, double dt);

/// Safe speed imposed by one obstacle.
double obstacle_safe_speed(const Obstacle& obstacle, const KraussParams& params, double dt) noexcept;

/// Most restrictive constraint ahead among the leader vehicle on the route,
/// a red (or stoppable yellow) signal and a pending container stop.
/// `self` is the vehicle's own Occupant::vehicle identity.
std::optional<Obstacle> obstacle_ahead(const VehicleState& state, std::size_t self, const VehiclePlan& plan,
                                       const io::VehicleTypeSpec& vtype, const Surroundings& around,
                                       const KraussParams& params, double dt);

/// Moves the vehicle by v_next*dt along its route, handling edge rollover,
/// stop arrival, dwell countdown and route completion. `now` is the
/// post-step time.
VehicleState advance_position(VehicleState state, const VehiclePlan& plan, double v_next, double dt, double now);

}  // namespace bundlesim::dynamics
