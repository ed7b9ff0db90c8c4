#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/detectors.hpp"
#include "core/dynamics.hpp"
#include "core/emissions.hpp"
#include "core/network.hpp"
#include "core/rng.hpp"
#include "core/scenario_io.hpp"

namespace bundlesim::engine {

struct SimulationConfig {
    double dt = 1.0;
    double t_max = 3600.0;
    std::uint64_t seed = 0;
    bool record_trajectories = false;
    dynamics::KraussParams krauss{};
};

struct TrajectoryPoint {
    double t = 0.0;  // end of the step the sample describes
    std::string edge;
    double offset = 0.0;
    double speed = 0.0;
    double accel = 0.0;
    double co2_rate = 0.0;
    double fuel_rate = 0.0;
    bool dwelling = false;

    bool operator==(const TrajectoryPoint&) const = default;
};

struct VehicleResult {
    std::string id;
    std::string vtype;
    emissions::CumulativeAccount account;
    double distance = 0.0;  // m
    std::optional<double> departed_at;
    std::optional<double> arrived_at;
    std::vector<TrajectoryPoint> trajectory;

    std::optional<double> travel_time() const {
        if (!departed_at || !arrived_at) return std::nullopt;
        return *arrived_at - *departed_at;
    }

    bool operator==(const VehicleResult&) const = default;
};

struct SimulationResult {
    std::vector<VehicleResult> vehicles;          // route-file order
    std::vector<io::DetectorInterval> intervals;  // sorted by (id, begin)
    double t_end = 0.0;
    bool t_max_exceeded = false;

    bool operator==(const SimulationResult&) const = default;
};

/// Parsed inputs for one world.
struct ScenarioInputs {
    std::shared_ptr<const net::Network> network;
    io::RoutesFile routes;
    io::AdditionalFile additional;
    std::shared_ptr<const emissions::Registry> registry;
};

ScenarioInputs read_scenario_files(const std::string& net_path, const std::string& routes_path,
                                   const std::string& additional_path, const std::string& emissions_path);

/// Deterministic time-discrete simulation of one scenario.
///
/// Each step runs a fixed phase order: insert due vehicles, evaluate signals,
/// compute every new speed from the pre-step snapshot, move, account
/// emissions, update detectors, advance the clock.
class World {
public:
    /// Cross-validates the inputs (vTypes, routes, stops, emission classes) and
    /// returns a world at t = 0 with nothing inserted.
    static World load(ScenarioInputs inputs, SimulationConfig config);

    void step();
    /// Steps until nothing is active or pending, or t_max is reached.
    SimulationResult run();

    double time() const noexcept { return t_; }
    const SimulationConfig& config() const noexcept { return config_; }
    const net::Network& network() const noexcept { return *inputs_.network; }
    const ScenarioInputs& inputs() const noexcept { return inputs_; }

    /// Active plus not-yet-inserted vehicles.
    std::size_t min_expected_number() const noexcept;

    /// Adds a vehicle after load. Throws like load() on bad references.
    void add_vehicle(const io::VehicleSpec& spec, std::optional<net::Route> new_route = std::nullopt);

    std::vector<std::string> detector_ids() const;
    /// Completed intervals of one detector; once the world has terminated the
    /// trailing partial window is included. nullopt for an unknown id.
    std::optional<std::vector<io::DetectorInterval>> detector_intervals(const std::string& id) const;

    const std::vector<dynamics::VehicleState>& vehicle_states() const noexcept { return states_; }
    const dynamics::VehiclePlan& plan_of(std::size_t vehicle) const { return plans_.at(vehicle); }
    const io::VehicleTypeSpec& vtype_of(std::size_t vehicle) const { return *vtypes_.at(vehicle); }

    /// Result as of now. Detector windows are closed at the current time when
    /// the world has terminated (or `final` is forced).
    SimulationResult result(bool final = false) const;

private:
    World() = default;

    enum class Phase { pending, active, finished };

    void register_vehicle(const io::VehicleSpec& spec);
    bool insertion_blocked(std::size_t vehicle) const;

    ScenarioInputs inputs_;
    SimulationConfig config_;
    double t_ = 0.0;
    std::uint64_t steps_ = 0;

    std::map<std::string, io::VehicleTypeSpec, std::less<>> vtype_by_id_;
    std::map<std::string, net::Route, std::less<>> route_by_id_;
    std::map<std::string, io::ContainerStopSpec, std::less<>> stop_by_id_;

    std::set<std::string, std::less<>> vehicle_ids_;

    // Per vehicle, indexed in registration order.
    std::vector<io::VehicleSpec> specs_;
    std::vector<const io::VehicleTypeSpec*> vtypes_;
    std::vector<dynamics::VehiclePlan> plans_;
    std::vector<dynamics::VehicleState> states_;
    std::vector<emissions::CumulativeAccount> accounts_;
    std::vector<std::vector<TrajectoryPoint>> trajectories_;
    std::vector<Phase> phases_;
    std::vector<Xoshiro256> noise_;
    std::vector<const emissions::Coefficients*> co2_coeffs_;
    std::vector<const emissions::Coefficients*> fuel_coeffs_;

    std::vector<std::size_t> pending_;  // sorted by (depart, registration)
    std::vector<std::size_t> active_;   // insertion order

    std::vector<detectors::DetectorRuntime> detectors_;
};

/// Drives a loaded world to completion.
SimulationResult run(World& world);

/// CSV with header t,vehicle,edge,offset,speed,accel,co2_rate_mg_s,fuel_rate_ml_s.
std::string trajectory_csv(const SimulationResult& result);

/// Per-vehicle accounts as pretty JSON text (shared by the batch CLI and the server).
std::string accounts_json(const SimulationResult& result);

}  // namespace bundlesim::engine
