#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "core/engine.hpp"

namespace bundlesim::compare {

enum class ScenarioLabel { scenario_I, scenario_II };

std::string_view to_string(ScenarioLabel label) noexcept;

/// One of the two delivery set-ups: a single double-trailer truck serving both
/// stops, or one single-trailer truck per stop.
struct ScenarioDefinition {
    ScenarioLabel label = ScenarioLabel::scenario_I;
    std::shared_ptr<const net::Network> network;  // with stop edges raised to main-street priority
    io::RoutesFile routes;
};

struct ScenarioConfig {
    std::string vtypes_file;      // route file holding the vTypes
    std::string additional_file;
    std::string emissions_file;
    std::string origin_edge;
    std::string destination_edge;
    std::vector<std::string> stops;  // exactly two container stop ids
    std::string single_vtype = "truck_single";
    std::string double_vtype = "truck_double";
    double dwell = io::kDefaultDwell;
    double depart_stagger = 10.0;  // s between the two single trucks
    engine::SimulationConfig sim;
};

/// Reads the JSON scenario config; relative file paths resolve against the
/// config file's directory.
ScenarioConfig load_scenario_config(const std::string& path);

/// Builds the vehicles and routes for one scenario. Routes run origin -> stop(s)
/// -> destination along shortest paths for the vehicle class. `depart_times`
/// holds one entry per vehicle (1 for scenario I, 2 for scenario II).
ScenarioDefinition build_scenario(ScenarioLabel label, const net::Network& network,
                                  const std::vector<io::ContainerStopSpec>& container_stops,
                                  const io::VehicleTypeSpec& vtype, const std::vector<std::string>& stop_ids,
                                  const std::string& origin_edge, const std::string& destination_edge,
                                  const std::vector<double>& depart_times, double dwell);

struct ScenarioTotals {
    double co2_mg = 0.0;
    double fuel_ml = 0.0;
    double travel_time_sum_s = 0.0;
    double travel_time_max_s = 0.0;
    double distance_m = 0.0;
    std::size_t vehicles = 0;
};

struct ScenarioReport {
    ScenarioTotals bundled;    // scenario I
    ScenarioTotals unbundled;  // scenario II
    double co2_reduction_pct = 0.0;
    double fuel_reduction_pct = 0.0;
    double time_delta_s = 0.0;  // scenario I total time - longest scenario II trip
};

/// 100 * (1 - total_I / total_II); 0 when total_II is 0.
double reduction_pct(double total_bundled, double total_unbundled) noexcept;

/// Throws IncompleteResult when a run hit t_max or left a vehicle unfinished.
ScenarioReport compare(const engine::SimulationResult& bundled, const engine::SimulationResult& unbundled);

std::string report_csv(const ScenarioReport& report);
std::string timeseries_csv(const engine::SimulationResult& bundled, const engine::SimulationResult& unbundled,
                           bool fuel);
std::string comparison_svg(const engine::SimulationResult& bundled, const engine::SimulationResult& unbundled);

/// Writes report.csv, travel_times.csv, co2_timeseries.csv, fuel_timeseries.csv
/// and comparison.svg into out_dir.
void render_report(const ScenarioReport& report, const engine::SimulationResult& bundled,
                   const engine::SimulationResult& unbundled, const std::filesystem::path& out_dir);

struct ComparisonRun {
    ScenarioDefinition bundled;
    ScenarioDefinition unbundled;
    engine::SimulationResult bundled_result;
    engine::SimulationResult unbundled_result;
    ScenarioReport report;
};

/// Builds both scenarios and runs them concurrently.
ComparisonRun run_comparison(const net::Network& network, const ScenarioConfig& config);

/// render_report plus the per-scenario route files and detector outputs.
void write_comparison(const ComparisonRun& run, const std::filesystem::path& out_dir);

}  // namespace bundlesim::compare
