#include "core/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "json.hpp"

#include "core/error.hpp"
#include "core/numbers.hpp"

namespace bundlesim::engine {

namespace {

constexpr double kTimeEps = 1e-9;

}  // namespace

ScenarioInputs read_scenario_files(const std::string& net_path, const std::string& routes_path,
                                   const std::string& additional_path, const std::string& emissions_path) {
    ScenarioInputs in;
    auto network = std::make_shared<const net::Network>(io::parse_network_file(io::read_file(net_path)));
    in.routes = io::parse_routes_file(io::read_file(routes_path));
    in.additional = io::parse_additional_file(io::read_file(additional_path), *network);
    in.registry =
        std::make_shared<const emissions::Registry>(emissions::load_emission_classes(io::read_file(emissions_path)));
    in.network = std::move(network);
    return in;
}

World World::load(ScenarioInputs inputs, SimulationConfig config) {
    if (!(config.dt > 0.0)) throw Error(ErrorCode::InvalidValue, "dt", "must be > 0");
    if (!(config.t_max > 0.0)) throw Error(ErrorCode::InvalidValue, "t_max", "must be > 0");
    if (!(config.krauss.tau > 0.0 && config.krauss.decel_b > 0.0)) {
        throw Error(ErrorCode::InvalidValue, "krauss", "tau and decel_b must be > 0");
    }
    if (!inputs.network || !inputs.registry) throw Error(ErrorCode::InvalidValue, "inputs", "missing network or registry");

    World w;
    w.inputs_ = std::move(inputs);
    w.config_ = config;
    const auto& net = *w.inputs_.network;
    const auto& registry = *w.inputs_.registry;

    for (const auto& vt : w.inputs_.routes.vtypes) {
        const auto& cls = registry.get(vt.emission_class);
        for (auto q : {emissions::kCo2, emissions::kFuel}) {
            if (!cls.quantities.contains(q)) throw Error(ErrorCode::UnknownQuantity, std::string(q), cls.name);
        }
        if (!w.vtype_by_id_.emplace(vt.id, vt).second) throw Error(ErrorCode::DuplicateId, vt.id, "vType");
    }
    for (const auto& r : w.inputs_.routes.routes) {
        net::validate_route(net, r);
        if (!w.route_by_id_.emplace(r.id, r).second) throw Error(ErrorCode::DuplicateId, r.id, "route");
    }
    for (const auto& cs : w.inputs_.additional.container_stops) {
        const auto& edge = net.edge(cs.edge);
        if (!(cs.start_pos >= 0.0 && cs.start_pos < cs.end_pos && cs.end_pos <= edge.length)) {
            throw Error(ErrorCode::PosOutOfRange, cs.id);
        }
        if (!w.stop_by_id_.emplace(cs.id, cs).second) throw Error(ErrorCode::DuplicateId, cs.id, "containerStop");
    }
    for (const auto& d : w.inputs_.additional.detectors) {
        const auto& edge = net.edge(d.edge);
        if (d.pos < 0.0 || d.pos > edge.length) throw Error(ErrorCode::PosOutOfRange, d.id);
        if (!(d.freq > 0.0)) throw Error(ErrorCode::InvalidValue, d.id, "freq must be > 0");
        w.detectors_.push_back(detectors::make_detector(d, net));
    }
    for (const auto& v : w.inputs_.routes.vehicles) w.register_vehicle(v);
    return w;
}

void World::add_vehicle(const io::VehicleSpec& spec, std::optional<net::Route> new_route) {
    if (new_route) {
        net::validate_route(*inputs_.network, *new_route);
        auto it = route_by_id_.find(new_route->id);
        if (it != route_by_id_.end() && it->second != *new_route) {
            throw Error(ErrorCode::DuplicateId, new_route->id, "route already defined differently");
        }
        route_by_id_.emplace(new_route->id, *new_route);
    }
    register_vehicle(spec);
}

void World::register_vehicle(const io::VehicleSpec& spec) {
    const auto& net = *inputs_.network;
    if (vehicle_ids_.contains(spec.id)) throw Error(ErrorCode::DuplicateId, spec.id, "vehicle");
    if (!(std::isfinite(spec.depart) && spec.depart >= 0.0)) throw Error(ErrorCode::NegativeDepart, spec.id);
    auto vt = vtype_by_id_.find(spec.vtype);
    if (vt == vtype_by_id_.end()) throw Error(ErrorCode::UnknownVType, spec.vtype, "vehicle " + spec.id);
    auto rt = route_by_id_.find(spec.route);
    if (rt == route_by_id_.end()) throw Error(ErrorCode::UnknownRoute, spec.route, "vehicle " + spec.id);

    std::vector<std::size_t> edges;
    const std::string vclass{io::to_string(vt->second.vclass)};
    for (const auto& eid : rt->second.edges) {
        const auto idx = *net.edge_index(eid);
        if (!net.edge_at(idx).allows(vclass)) throw Error(ErrorCode::VClassNotAllowed, eid, "vehicle " + spec.id);
        edges.push_back(idx);
    }

    std::vector<dynamics::PlannedStop> stops;
    std::size_t search_from = 0;
    double min_pos = 0.0;
    for (const auto& s : spec.stops) {
        auto cs = stop_by_id_.find(s.container_stop);
        if (cs == stop_by_id_.end()) throw Error(ErrorCode::UnknownContainerStop, s.container_stop, "vehicle " + spec.id);
        if (!(s.dwell >= 0.0)) throw Error(ErrorCode::InvalidValue, spec.id, "negative dwell");
        const auto stop_edge = *net.edge_index(cs->second.edge);
        std::optional<std::size_t> at;
        for (std::size_t k = search_from; k < edges.size(); ++k) {
            if (edges[k] != stop_edge) continue;
            if (k == search_from && cs->second.start_pos < min_pos) continue;
            at = k;
            break;
        }
        if (!at) throw Error(ErrorCode::StopOffRoute, s.container_stop, "vehicle " + spec.id);
        stops.push_back({cs->first, *at, cs->second.start_pos, cs->second.end_pos, s.dwell});
        search_from = *at;
        min_pos = cs->second.end_pos;
    }

    const std::size_t idx = specs_.size();
    vehicle_ids_.insert(spec.id);
    specs_.push_back(spec);
    vtypes_.push_back(&vt->second);
    plans_.push_back(dynamics::make_plan(net, edges, std::move(stops)));
    dynamics::VehicleState st;
    st.id = spec.id;
    st.vtype = spec.vtype;
    states_.push_back(std::move(st));
    accounts_.emplace_back();
    trajectories_.emplace_back();
    phases_.push_back(Phase::pending);
    std::uint64_t seed_state = config_.seed ^ fnv1a(spec.id);
    noise_.emplace_back(Xoshiro256::splitmix64(seed_state));
    const auto& cls = inputs_.registry->get(vt->second.emission_class);
    co2_coeffs_.push_back(&cls.quantities.find(emissions::kCo2)->second);
    fuel_coeffs_.push_back(&cls.quantities.find(emissions::kFuel)->second);

    auto pos = std::upper_bound(pending_.begin(), pending_.end(), idx, [&](std::size_t a, std::size_t b) {
        return std::tie(specs_[a].depart, a) < std::tie(specs_[b].depart, b);
    });
    pending_.insert(pos, idx);
}

std::size_t World::min_expected_number() const noexcept { return active_.size() + pending_.size(); }

bool World::insertion_blocked(std::size_t vehicle) const {
    const std::size_t first_edge = plans_[vehicle].edges.front();
    const double min_gap = vtypes_[vehicle]->min_gap;
    for (std::size_t other : active_) {
        const auto& s = states_[other];
        if (plans_[other].edges[s.edge_index] != first_edge) continue;
        if (s.offset - vtypes_[other]->length < min_gap) return true;
    }
    return false;
}

void World::step() {
    const double dt = config_.dt;
    const double now = static_cast<double>(steps_ + 1) * dt;
    const auto& net = *inputs_.network;

    // (1) insertion
    std::vector<std::size_t> still_pending;
    still_pending.reserve(pending_.size());
    for (std::size_t idx : pending_) {
        if (specs_[idx].depart <= t_ + kTimeEps && !insertion_blocked(idx)) {
            auto& s = states_[idx];
            s.departed_at = t_;
            phases_[idx] = Phase::active;
            active_.push_back(idx);
        } else {
            still_pending.push_back(idx);
        }
    }
    pending_ = std::move(still_pending);

    // (2) signals
    const dynamics::SignalStates signals = dynamics::signal_states_at(net, t_);

    // (3) new speeds from the pre-step snapshot
    dynamics::TrafficSnapshot traffic(net.edges().size());
    for (std::size_t idx : active_) {
        const auto& s = states_[idx];
        traffic.add({idx, plans_[idx].edges[s.edge_index], s.offset, vtypes_[idx]->length, s.speed,
                     vtypes_[idx]->decel});
    }
    traffic.sort();
    const dynamics::Surroundings around{net, signals, traffic};

    std::vector<double> v_next(active_.size(), 0.0);
    for (std::size_t i = 0; i < active_.size(); ++i) {
        const std::size_t idx = active_[i];
        const auto& s = states_[idx];
        if (s.dwelling()) continue;
        const auto& vt = *vtypes_[idx];
        const dynamics::KraussParams params{config_.krauss.tau, std::min(config_.krauss.decel_b, vt.decel), vt.sigma};
        double v_safe = std::numeric_limits<double>::infinity();
        if (auto obstacle = dynamics::obstacle_ahead(s, idx, plans_[idx], vt, around, params, dt)) {
            v_safe = dynamics::obstacle_safe_speed(*obstacle, params, dt);
        }
        const double v_limit =
            std::min(dynamics::free_flow_speed(net.edge_at(plans_[idx].edges[s.edge_index]).speed_limit, vt),
                     dynamics::speed_limit_ahead(s, plans_[idx], net, vt, params, dt));
        const double noise = vt.sigma > 0.0 ? noise_[idx].uniform() : 0.0;
        v_next[i] = dynamics::step_speed(s, v_limit, v_safe, vt, params, dt, noise);
    }

    // (4) movement, (5) emissions
    std::vector<detectors::Motion> motions;
    motions.reserve(active_.size());
    for (std::size_t i = 0; i < active_.size(); ++i) {
        const std::size_t idx = active_[i];
        auto& s = states_[idx];
        detectors::Motion m;
        m.vehicle = &specs_[idx].id;
        m.plan = &plans_[idx];
        m.prev_edge_index = s.edge_index;
        m.prev_offset = s.offset;

        s = dynamics::advance_position(std::move(s), plans_[idx], v_next[i], dt, now);

        emissions::EmissionSample sample{s.id, now, emissions::evaluate(*co2_coeffs_[idx], s.speed, s.accel_applied),
                                         emissions::evaluate(*fuel_coeffs_[idx], s.speed, s.accel_applied)};
        accounts_[idx] = emissions::account_step(accounts_[idx], sample, dt);
        if (config_.record_trajectories) {
            trajectories_[idx].push_back({now, net.edge_at(plans_[idx].edges[s.edge_index]).id, s.offset, s.speed,
                                          s.accel_applied, sample.co2_rate, sample.fuel_rate, s.dwelling()});
        }

        m.next_edge_index = s.edge_index;
        m.next_offset = s.offset;
        m.speed = s.speed;
        m.co2_rate = sample.co2_rate;
        m.fuel_rate = sample.fuel_rate;
        motions.push_back(m);
    }

    // (6) detectors
    for (auto& det : detectors_) {
        auto crossings = detectors::detect_crossings(det, motions);
        det.crossings.insert(det.crossings.end(), crossings.begin(), crossings.end());
        detectors::close_windows(det, now, dt, false);
    }

    // (7) clock
    ++steps_;
    t_ = now;
    std::erase_if(active_, [&](std::size_t idx) {
        if (!states_[idx].done()) return false;
        phases_[idx] = Phase::finished;
        return true;
    });
}

SimulationResult World::run() {
    while (min_expected_number() > 0 && t_ < config_.t_max - kTimeEps) step();
    return result(true);
}

std::vector<std::string> World::detector_ids() const {
    std::vector<std::string> ids;
    for (const auto& d : detectors_) ids.push_back(d.spec.id);
    return ids;
}

std::optional<std::vector<io::DetectorInterval>> World::detector_intervals(const std::string& id) const {
    for (const auto& d : detectors_) {
        if (d.spec.id != id) continue;
        if (min_expected_number() > 0) return d.emitted;
        auto closed = d;
        detectors::close_windows(closed, t_, config_.dt, true);
        return closed.emitted;
    }
    return std::nullopt;
}

SimulationResult World::result(bool final) const {
    SimulationResult r;
    r.t_end = t_;
    r.t_max_exceeded = min_expected_number() > 0;
    for (std::size_t idx = 0; idx < specs_.size(); ++idx) {
        VehicleResult v;
        v.id = specs_[idx].id;
        v.vtype = specs_[idx].vtype;
        v.account = accounts_[idx];
        v.distance = states_[idx].distance();
        v.departed_at = states_[idx].departed_at;
        v.arrived_at = states_[idx].arrived_at;
        v.trajectory = trajectories_[idx];
        r.vehicles.push_back(std::move(v));
    }
    const bool close = final || min_expected_number() == 0;
    for (const auto& d : detectors_) {
        auto copy = d;
        if (close) detectors::close_windows(copy, t_, config_.dt, true);
        r.intervals.insert(r.intervals.end(), copy.emitted.begin(), copy.emitted.end());
    }
    std::stable_sort(r.intervals.begin(), r.intervals.end(), [](const auto& a, const auto& b) {
        return std::tie(a.id, a.begin) < std::tie(b.id, b.begin);
    });
    return r;
}

SimulationResult run(World& world) { return world.run(); }

std::string trajectory_csv(const SimulationResult& result) {
    struct Row {
        double t;
        std::size_t vehicle;
        const TrajectoryPoint* point;
    };
    std::vector<Row> rows;
    for (std::size_t v = 0; v < result.vehicles.size(); ++v) {
        for (const auto& p : result.vehicles[v].trajectory) rows.push_back({p.t, v, &p});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return std::tie(a.t, a.vehicle) < std::tie(b.t, b.vehicle); });
    std::string out = "t,vehicle,edge,offset,speed,accel,co2_rate_mg_s,fuel_rate_ml_s\n";
    for (const auto& row : rows) {
        const auto& p = *row.point;
        out += format_number(p.t) + ',' + result.vehicles[row.vehicle].id + ',' + p.edge + ',' + format_number(p.offset) +
               ',' + format_number(p.speed) + ',' + format_number(p.accel) + ',' + format_number(p.co2_rate) + ',' +
               format_number(p.fuel_rate) + '\n';
    }
    return out;
}

std::string accounts_json(const SimulationResult& result) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& v : result.vehicles) {
        nlohmann::ordered_json j;
        j["id"] = v.id;
        j["vtype"] = v.vtype;
        j["co2_mg"] = v.account.co2_total;
        j["fuel_ml"] = v.account.fuel_total;
        j["duration_s"] = v.account.duration;
        j["distance_m"] = v.distance;
        j["departed_at"] = v.departed_at ? nlohmann::ordered_json(*v.departed_at) : nlohmann::ordered_json(nullptr);
        j["arrived_at"] = v.arrived_at ? nlohmann::ordered_json(*v.arrived_at) : nlohmann::ordered_json(nullptr);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

}  // namespace bundlesim::engine
