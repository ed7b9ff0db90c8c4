#include "core/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bundlesim::dynamics {

VehiclePlan make_plan(const net::Network& network, const std::vector<std::size_t>& edges,
                      std::vector<PlannedStop> stops) {
    VehiclePlan plan;
    plan.edges = edges;
    double start = 0.0;
    for (std::size_t e : edges) {
        const double len = network.edge_at(e).length;
        plan.lengths.push_back(len);
        plan.edge_start.push_back(start);
        start += len;
    }
    plan.total_length = start;
    plan.stops = std::move(stops);
    return plan;
}

double krauss_safe_speed(double gap, double leader_speed, const KraussParams& params) noexcept {
    // Rationalised form of -bt + sqrt(bt^2 + q); it keeps v*tau <= gap near a standstill.
    const double bt = params.decel_b * params.tau;
    const double q = leader_speed * leader_speed + 2.0 * params.decel_b * gap;
    if (q <= 0.0) return 0.0;
    return q / (bt + std::sqrt(bt * bt + q));
}

double euler_equivalent_leader_speed(double leader_speed, double leader_decel, double follower_decel,
                                     double dt) noexcept {
    if (leader_speed <= 0.0 || leader_decel <= 0.0) return 0.0;
    const double step = leader_decel * dt;
    // Speeds v-step, v-2*step, ... that are still positive, each held for dt.
    const double n = std::ceil(leader_speed / step) - 1.0;
    const double distance = std::max(0.0, dt * (n * leader_speed - step * n * (n + 1.0) / 2.0));
    return std::sqrt(2.0 * follower_decel * distance);
}

double free_flow_speed(double v_limit, const io::VehicleTypeSpec& vtype) noexcept {
    const double floor = std::min(vtype.min_speed, v_limit);
    return std::max(std::min(v_limit, vtype.max_speed), floor);
}

double step_speed(const VehicleState& state, double v_limit, double v_safe, const io::VehicleTypeSpec& vtype,
                  const KraussParams& params, double dt, double noise) noexcept {
    const double v_des = std::min({v_safe, v_limit, state.speed + vtype.accel * dt});
    const double dawdled = v_des - params.sigma * vtype.accel * dt * noise;
    return std::max({0.0, state.speed - vtype.decel * dt, dawdled});
}

void TrafficSnapshot::sort() {
    for (auto& bucket : by_edge_) {
        std::sort(bucket.begin(), bucket.end(), [](const Occupant& a, const Occupant& b) {
            if (a.offset != b.offset) return a.offset < b.offset;
            return a.vehicle > b.vehicle;  // on a tie the earlier vehicle counts as ahead
        });
    }
}

SignalStates signal_states_at(const net::Network& network, double t) {
    SignalStates out(network.edges().size());
    for (std::size_t e = 0; e < out.size(); ++e) {
        if (const auto& slot = network.signal_of(e)) {
            out[e] = network.programs()[slot->program].state_at(t, slot->slot);
        }
    }
    return out;
}

double lookahead_distance(const io::VehicleTypeSpec& vtype, const KraussParams& params) noexcept {
    const double v = vtype.max_speed;
    return std::max(250.0, v * params.tau + v * v / (2.0 * params.decel_b) + 50.0);
}

double speed_limit_ahead(const VehicleState& state, const VehiclePlan& plan, const net::Network& network,
                         const io::VehicleTypeSpec& vtype, const KraussParams& params, double dt) {
    double cap = std::numeric_limits<double>::infinity();
    if (state.done()) return cap;
    const double b = params.decel_b;
    const double lookahead = lookahead_distance(vtype, params);
    double d = plan.lengths[state.edge_index] - state.offset;
    for (std::size_t k = state.edge_index + 1; k < plan.edges.size(); d += plan.lengths[k], ++k) {
        if (d > lookahead) break;
        const double limit = free_flow_speed(network.edge_at(plan.edges[k]).speed_limit, vtype);
        cap = std::min(cap, std::max(limit, krauss_safe_speed(d, limit, {dt, b, 0.0})));
    }
    return cap;
}

double obstacle_safe_speed(const Obstacle& obstacle, const KraussParams& params, double dt) noexcept {
    // A leader braking more gently than b could still be caught mid-manoeuvre,
    // so its braking is bounded below by b.
    const double leader_decel = obstacle.leader_decel > 0.0 ? std::max(obstacle.leader_decel, params.decel_b) : 0.0;
    const double leader = euler_equivalent_leader_speed(obstacle.leader_speed, leader_decel, params.decel_b, dt);
    return krauss_safe_speed(std::max(0.0, obstacle.gap), leader, params);
}

std::optional<Obstacle> obstacle_ahead(const VehicleState& state, std::size_t self, const VehiclePlan& plan,
                                       const io::VehicleTypeSpec& vtype, const Surroundings& around,
                                       const KraussParams& params, double dt) {
    if (state.done()) return std::nullopt;

    const double b = params.decel_b;
    const double lookahead = lookahead_distance(vtype, params);

    std::optional<Obstacle> best;
    double best_speed = std::numeric_limits<double>::infinity();
    auto consider = [&](const Obstacle& o) {
        const double v = obstacle_safe_speed(o, params, dt);
        if (!best || v < best_speed || (v == best_speed && o.gap < best->gap)) {
            best = o;
            best_speed = v;
        }
    };

    bool leader_found = false;
    double edge_begin = -state.offset;  // distance from our front to the start of edge k
    for (std::size_t k = state.edge_index; k < plan.edges.size(); edge_begin += plan.lengths[k], ++k) {
        if (edge_begin > lookahead) break;
        const std::size_t edge = plan.edges[k];

        if (!leader_found) {
            for (const Occupant& occ : around.traffic.on_edge(edge)) {
                if (occ.vehicle == self) continue;
                if (k == state.edge_index &&
                    (occ.offset < state.offset || (occ.offset == state.offset && occ.vehicle > self))) {
                    continue;
                }
                const double gap = edge_begin + occ.offset - occ.length - vtype.min_gap;
                consider({gap, occ.speed, occ.decel, ObstacleKind::vehicle});
                leader_found = true;
                break;
            }
        }

        if (state.next_stop < plan.stops.size() && plan.stops[state.next_stop].route_index == k) {
            consider({edge_begin + plan.stops[state.next_stop].end_pos, 0.0, 0.0, ObstacleKind::stop});
        }

        if (const auto& sig = around.signals.at(edge); sig && *sig != net::Signal::green) {
            const double gap = edge_begin + plan.lengths[k];
            const bool can_stop = state.speed * state.speed / (2.0 * b) <= gap;
            if (*sig == net::Signal::red || can_stop) {
                consider({gap, 0.0, 0.0, ObstacleKind::signal});
            }
        }
    }
    return best;
}

namespace {

/// Route distance from the current position to (route_index, pos).
double distance_to(const VehicleState& s, const VehiclePlan& plan, std::size_t route_index, double pos) {
    if (route_index == s.edge_index) return pos - s.offset;
    double d = plan.lengths[s.edge_index] - s.offset;
    for (std::size_t k = s.edge_index + 1; k < route_index; ++k) d += plan.lengths[k];
    return d + pos;
}

}  // namespace

VehicleState advance_position(VehicleState state, const VehiclePlan& plan, double v_next, double dt, double now) {
    if (state.done()) return state;

    const double prev_speed = state.speed;
    if (auto* dwell = std::get_if<Dwelling>(&state.stop_state)) {
        dwell->remaining -= dt;
        if (dwell->remaining <= 1e-9) {
            state.stop_state = Driving{};
            ++state.next_stop;
        }
        state.speed = 0.0;
        state.accel_applied = (0.0 - prev_speed) / dt;
        return state;
    }

    double travel = std::max(0.0, v_next) * dt;
    double speed = std::max(0.0, v_next);

    // Pending stop: halt inside the interval once close to its end (or nearly stopped).
    if (state.next_stop < plan.stops.size()) {
        const PlannedStop& stop = plan.stops[state.next_stop];
        const double to_start = distance_to(state, plan, stop.route_index, stop.start_pos);
        const double to_end = distance_to(state, plan, stop.route_index, stop.end_pos);
        if (travel >= to_start && (travel >= to_end - kStopReachTolerance || speed < kHaltSpeed)) {
            if (travel >= to_end - kStopReachTolerance) {
                travel = std::max(0.0, to_end);
                state.edge_index = stop.route_index;
                state.offset = stop.end_pos;
            } else {
                // stays short of the end position; fall through to the generic move below
                double d = travel;
                while (d > plan.lengths[state.edge_index] - state.offset) {
                    d -= plan.lengths[state.edge_index] - state.offset;
                    ++state.edge_index;
                    state.offset = 0.0;
                }
                state.offset += d;
            }
            state.odometer.add(travel);
            state.stop_state = Dwelling{stop.dwell};
            state.speed = 0.0;
            state.accel_applied = (0.0 - prev_speed) / dt;
            if (stop.dwell <= 0.0) {
                state.stop_state = Driving{};
                ++state.next_stop;
            }
            return state;
        }
    }

    const double to_route_end = distance_to(state, plan, plan.edges.size() - 1, plan.lengths.back());
    if (travel >= to_route_end) {
        travel = std::max(0.0, to_route_end);
        state.edge_index = plan.edges.size() - 1;
        state.offset = plan.lengths.back();
        state.odometer.add(travel);
        state.speed = speed;
        state.accel_applied = (speed - prev_speed) / dt;
        state.stop_state = Done{};
        state.arrived_at = now;
        return state;
    }

    double d = travel;
    while (d > plan.lengths[state.edge_index] - state.offset) {
        d -= plan.lengths[state.edge_index] - state.offset;
        ++state.edge_index;
        state.offset = 0.0;
    }
    state.offset += d;
    state.odometer.add(travel);
    state.speed = speed;
    state.accel_applied = (speed - prev_speed) / dt;
    return state;
}

}  // namespace bundlesim::dynamics
