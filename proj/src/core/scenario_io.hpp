#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/network.hpp"

namespace bundlesim::io {

enum class VehicleClass { truck_single, truck_double };

std::string_view to_string(VehicleClass vclass) noexcept;
std::optional<VehicleClass> parse_vehicle_class(std::string_view token) noexcept;

/// Stop dwell used when a route file omits it.
inline constexpr double kDefaultDwell = 90.0;

struct VehicleTypeSpec {
    std::string id;
    VehicleClass vclass = VehicleClass::truck_single;
    double max_speed = 15.0;  // m/s
    double min_speed = 5.0;   // m/s
    double accel = 1.3;       // m/s^2
    double decel = 4.0;       // m/s^2
    double length = 12.0;     // m
    double min_gap = 2.5;     // m
    double sigma = 0.0;
    std::string emission_class = "HBEFA3/HDV_G";

    bool operator==(const VehicleTypeSpec&) const = default;
};

/// Reference heavy-vehicle types used when no vType file is given.
VehicleTypeSpec reference_single_truck();
VehicleTypeSpec reference_double_truck();

struct StopSpec {
    std::string container_stop;
    double dwell = kDefaultDwell;  // s

    bool operator==(const StopSpec&) const = default;
};

struct VehicleSpec {
    std::string id;
    std::string vtype;
    std::string route;
    double depart = 0.0;
    std::vector<StopSpec> stops;

    bool operator==(const VehicleSpec&) const = default;
};

struct ContainerStopSpec {
    std::string id;
    std::string edge;
    double start_pos = 0.0;
    double end_pos = 0.0;

    bool operator==(const ContainerStopSpec&) const = default;
};

struct DetectorSpec {
    std::string id;
    std::string edge;
    double pos = 0.0;
    double freq = 50.0;

    bool operator==(const DetectorSpec&) const = default;
};

/// Aggregated induction-loop output for one window.
struct DetectorInterval {
    std::string id;
    double begin = 0.0;
    double end = 0.0;
    std::int64_t n_veh = 0;
    double mean_speed = -1.0;  // -1 when no vehicle contributed
    double co2_mg = 0.0;
    double fuel_ml = 0.0;

    bool operator==(const DetectorInterval&) const = default;
};

struct RoutesFile {
    std::vector<VehicleTypeSpec> vtypes;
    std::vector<net::Route> routes;
    std::vector<VehicleSpec> vehicles;

    bool operator==(const RoutesFile&) const = default;
};

struct AdditionalFile {
    std::vector<DetectorSpec> detectors;
    std::vector<ContainerStopSpec> container_stops;

    bool operator==(const AdditionalFile&) const = default;
};

net::Network parse_network_file(std::string_view bytes);
std::string write_network_file(const net::Network& network);

RoutesFile parse_routes_file(std::string_view bytes);
std::string write_routes_file(const RoutesFile& routes);

/// Positions are checked against edge lengths in `network`.
AdditionalFile parse_additional_file(std::string_view bytes, const net::Network& network);
std::string write_additional_file(const AdditionalFile& additional);

/// Input must be sorted by (id, begin); throws UnsortedIntervals otherwise.
std::string write_detector_output(const std::vector<DetectorInterval>& intervals);
std::vector<DetectorInterval> parse_detector_output(std::string_view bytes);

struct RouteGenSpec {
    std::int64_t n_steps = 0;
    double p_single = 0.0;
    double p_double = 0.0;
    std::uint64_t seed = 0;
    /// Edge ids of the generation route; empty selects the shortest path from
    /// the first to the last edge of the network file.
    std::vector<std::string> route;
};

/// Seeded random demand mirroring a step loop with two independent uniform
/// draws per step. Same spec and network give byte-identical output.
std::string generate_route_file(const RouteGenSpec& spec, const net::Network& network);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace bundlesim::io
