#include "core/compare.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <future>
#include <limits>

#include "json.hpp"

#include "core/error.hpp"
#include "core/numbers.hpp"

namespace bundlesim::compare {

std::string_view to_string(ScenarioLabel label) noexcept {
    return label == ScenarioLabel::scenario_I ? "scenario_I" : "scenario_II";
}

ScenarioConfig load_scenario_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedConfig, path, e.what());
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto file = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorCode::MalformedConfig, key, "missing file path");
        std::filesystem::path p = j[key].get<std::string>();
        return (p.is_absolute() ? p : base / p).string();
    };
    auto text = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) throw Error(ErrorCode::MalformedConfig, key, "missing string");
        return j[key].get<std::string>();
    };
    auto number = [&](const char* key, double fallback) {
        if (!j.contains(key)) return fallback;
        if (!j[key].is_number()) throw Error(ErrorCode::MalformedConfig, key, "not a number");
        return j[key].get<double>();
    };

    ScenarioConfig c;
    try {
        c.vtypes_file = file("vtypes");
        c.additional_file = file("additional");
        c.emissions_file = file("emissions");
        c.origin_edge = text("origin_edge");
        c.destination_edge = text("destination_edge");
        if (!j.contains("stops") || !j["stops"].is_array()) throw Error(ErrorCode::MalformedConfig, "stops", "missing");
        c.stops = j["stops"].get<std::vector<std::string>>();
        if (j.contains("single_vtype")) c.single_vtype = text("single_vtype");
        if (j.contains("double_vtype")) c.double_vtype = text("double_vtype");
        c.dwell = number("dwell_s", c.dwell);
        c.depart_stagger = number("depart_stagger_s", c.depart_stagger);
        c.sim.dt = number("dt", c.sim.dt);
        c.sim.t_max = number("t_max", c.sim.t_max);
        if (j.contains("seed")) c.sim.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedConfig, path, e.what());
    }
    if (c.stops.size() != 2) throw Error(ErrorCode::MalformedConfig, "stops", "exactly two stops required");
    return c;
}

namespace {

const io::ContainerStopSpec& find_stop(const std::vector<io::ContainerStopSpec>& stops, const std::string& id) {
    for (const auto& s : stops) {
        if (s.id == id) return s;
    }
    throw Error(ErrorCode::UnknownStop, id);
}

/// origin -> waypoint edges -> destination over main-street-or-better edges.
std::vector<std::string> plan_route(const net::Network& net, const std::string& origin,
                                    const std::vector<std::string>& waypoints, const std::string& destination,
                                    std::string_view vclass) {
    std::vector<std::string> legs{origin};
    legs.insert(legs.end(), waypoints.begin(), waypoints.end());
    legs.push_back(destination);

    std::vector<std::string> route;
    for (std::size_t i = 0; i + 1 < legs.size(); ++i) {
        const auto from = net.edge_index(legs[i]);
        const auto to = net.edge_index(legs[i + 1]);
        if (!from) throw Error(ErrorCode::UnknownEdge, legs[i]);
        if (!to) throw Error(ErrorCode::UnknownEdge, legs[i + 1]);
        if (*from == *to) {
            if (route.empty()) route.push_back(legs[i]);
            continue;
        }
        auto path = net::shortest_path(net, *from, *to, vclass, net::kMainStreetPriority);
        if (path.empty()) throw Error(ErrorCode::NotConnected, legs[i], "no path to " + legs[i + 1]);
        for (std::size_t k = route.empty() ? 0 : 1; k < path.size(); ++k) route.push_back(net.edge_at(path[k]).id);
    }
    return route;
}

}  // namespace

ScenarioDefinition build_scenario(ScenarioLabel label, const net::Network& network,
                                  const std::vector<io::ContainerStopSpec>& container_stops,
                                  const io::VehicleTypeSpec& vtype, const std::vector<std::string>& stop_ids,
                                  const std::string& origin_edge, const std::string& destination_edge,
                                  const std::vector<double>& depart_times, double dwell) {
    if (stop_ids.size() != 2) throw Error(ErrorCode::InvalidValue, "stops", "exactly two stops required");
    const std::size_t vehicles = label == ScenarioLabel::scenario_I ? 1 : 2;
    if (depart_times.size() != vehicles) {
        throw Error(ErrorCode::InvalidValue, std::string(to_string(label)), "one depart time per vehicle required");
    }
    network.edge(origin_edge);
    network.edge(destination_edge);

    // Trucks route over main streets only; the stop side streets are promoted.
    net::Network net = network;
    std::vector<std::string> stop_edges;
    for (const auto& id : stop_ids) {
        const auto& stop = find_stop(container_stops, id);
        stop_edges.push_back(stop.edge);
        if (net.edge(stop.edge).priority < net::kMainStreetPriority) {
            net = net::set_edge_priority(net, stop.edge, net::kMainStreetPriority);
        }
    }

    ScenarioDefinition def;
    def.label = label;
    def.routes.vtypes.push_back(vtype);
    const std::string vclass{io::to_string(vtype.vclass)};
    if (label == ScenarioLabel::scenario_I) {
        net::Route route{"route_I", plan_route(net, origin_edge, stop_edges, destination_edge, vclass)};
        def.routes.routes.push_back(route);
        def.routes.vehicles.push_back(
            {"I_double", vtype.id, route.id, depart_times[0], {{stop_ids[0], dwell}, {stop_ids[1], dwell}}});
    } else {
        for (std::size_t i = 0; i < 2; ++i) {
            const std::string n = std::to_string(i + 1);
            net::Route route{"route_II_" + n, plan_route(net, origin_edge, {stop_edges[i]}, destination_edge, vclass)};
            def.routes.routes.push_back(route);
            def.routes.vehicles.push_back({"II_single_" + n, vtype.id, route.id, depart_times[i], {{stop_ids[i], dwell}}});
        }
    }
    def.network = std::make_shared<const net::Network>(std::move(net));
    return def;
}

double reduction_pct(double total_bundled, double total_unbundled) noexcept {
    if (!(total_unbundled > 0.0)) return 0.0;
    return 100.0 * (1.0 - total_bundled / total_unbundled);
}

namespace {

ScenarioTotals totals_of(const engine::SimulationResult& r, std::string_view label) {
    if (r.t_max_exceeded) throw Error(ErrorCode::IncompleteResult, std::string(label), "run hit t_max");
    ScenarioTotals t;
    CompensatedSum co2, fuel, time, dist;
    for (const auto& v : r.vehicles) {
        const auto tt = v.travel_time();
        if (!tt) throw Error(ErrorCode::IncompleteResult, v.id, "vehicle did not finish");
        co2.add(v.account.co2_total);
        fuel.add(v.account.fuel_total);
        time.add(*tt);
        dist.add(v.distance);
        t.travel_time_max_s = std::max(t.travel_time_max_s, *tt);
    }
    t.co2_mg = co2.value();
    t.fuel_ml = fuel.value();
    t.travel_time_sum_s = time.value();
    t.distance_m = dist.value();
    t.vehicles = r.vehicles.size();
    return t;
}

}  // namespace

ScenarioReport compare(const engine::SimulationResult& bundled, const engine::SimulationResult& unbundled) {
    ScenarioReport rep;
    rep.bundled = totals_of(bundled, "scenario_I");
    rep.unbundled = totals_of(unbundled, "scenario_II");
    rep.co2_reduction_pct = reduction_pct(rep.bundled.co2_mg, rep.unbundled.co2_mg);
    rep.fuel_reduction_pct = reduction_pct(rep.bundled.fuel_ml, rep.unbundled.fuel_ml);
    rep.time_delta_s = rep.bundled.travel_time_sum_s - rep.unbundled.travel_time_max_s;
    return rep;
}

std::string report_csv(const ScenarioReport& report) {
    std::string out = "scenario,co2_kg,fuel_l,travel_time_s,distance_m\n";
    auto row = [&](std::string_view name, const ScenarioTotals& t) {
        out += std::string(name) + ',' + format_number(t.co2_mg * 1e-6) + ',' + format_number(t.fuel_ml * 1e-3) + ',' +
               format_number(t.travel_time_sum_s) + ',' + format_number(t.distance_m) + '\n';
    };
    row("scenario_I", report.bundled);
    row("scenario_II", report.unbundled);
    out += "reduction," + format_number(report.co2_reduction_pct) + ',' + format_number(report.fuel_reduction_pct) +
           ',' + format_number(report.time_delta_s) + '\n';
    return out;
}

namespace {

std::string travel_times_csv(const ScenarioReport& report) {
    std::string out = "scenario,travel_time_sum_s,travel_time_max_s\n";
    out += "scenario_I," + format_number(report.bundled.travel_time_sum_s) + ',' +
           format_number(report.bundled.travel_time_max_s) + '\n';
    out += "scenario_II," + format_number(report.unbundled.travel_time_sum_s) + ',' +
           format_number(report.unbundled.travel_time_max_s) + '\n';
    return out;
}

std::vector<const engine::VehicleResult*> all_vehicles(const engine::SimulationResult& a,
                                                       const engine::SimulationResult& b) {
    std::vector<const engine::VehicleResult*> out;
    for (const auto& v : a.vehicles) out.push_back(&v);
    for (const auto& v : b.vehicles) out.push_back(&v);
    return out;
}

}  // namespace

std::string timeseries_csv(const engine::SimulationResult& bundled, const engine::SimulationResult& unbundled,
                           bool fuel) {
    std::string out = "t,vehicle,rate\n";
    for (const auto* v : all_vehicles(bundled, unbundled)) {
        for (const auto& p : v->trajectory) {
            out += format_number(p.t) + ',' + v->id + ',' + format_number(fuel ? p.fuel_rate : p.co2_rate) + '\n';
        }
    }
    return out;
}

std::string comparison_svg(const engine::SimulationResult& bundled, const engine::SimulationResult& unbundled) {
    constexpr double width = 900, panel_h = 260, margin_l = 70, margin_r = 170, margin_t = 40, gap = 70;
    constexpr std::array<const char*, 6> palette{"#1f77b4", "#d62728", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"};
    const auto vehicles = all_vehicles(bundled, unbundled);

    auto fmt = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", x);
        return std::string(buf);
    };

    double t_max = 1.0;
    for (const auto* v : vehicles) {
        for (const auto& p : v->trajectory) t_max = std::max(t_max, p.t);
    }

    std::string svg;
    const double height = margin_t + 2 * panel_h + gap + 50;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (int panel = 0; panel < 2; ++panel) {
        const bool fuel = panel == 1;
        const double top = margin_t + panel * (panel_h + gap);
        const double plot_w = width - margin_l - margin_r;
        double y_max = 1e-9;
        for (const auto* v : vehicles) {
            for (const auto& p : v->trajectory) y_max = std::max(y_max, fuel ? p.fuel_rate : p.co2_rate);
        }
        y_max *= 1.05;
        auto sx = [&](double t) { return margin_l + t / t_max * plot_w; };
        auto sy = [&](double y) { return top + panel_h - y / y_max * panel_h; };

        svg += "<text x=\"" + fmt(margin_l) + "\" y=\"" + fmt(top - 10) + "\" font-weight=\"bold\">" +
               (fuel ? "Fuel consumption rate (ml/s)" : "CO2 emission rate (mg/s)") + "</text>\n";
        svg += "<rect x=\"" + fmt(margin_l) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(plot_w) + "\" height=\"" +
               fmt(panel_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int tick = 0; tick <= 5; ++tick) {
            const double t = t_max * tick / 5.0;
            const double y = y_max * tick / 5.0;
            svg += "<text x=\"" + fmt(sx(t)) + "\" y=\"" + fmt(top + panel_h + 16) + "\" text-anchor=\"middle\">" +
                   fmt(t) + "</text>\n";
            svg += "<text x=\"" + fmt(margin_l - 6) + "\" y=\"" + fmt(sy(y) + 4) + "\" text-anchor=\"end\">" + fmt(y) +
                   "</text>\n";
        }
        svg += "<text x=\"" + fmt(margin_l + plot_w / 2) + "\" y=\"" + fmt(top + panel_h + 34) +
               "\" text-anchor=\"middle\">time (s)</text>\n";

        for (std::size_t i = 0; i < vehicles.size(); ++i) {
            const auto* v = vehicles[i];
            const char* colour = palette[i % palette.size()];
            svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.2\" points=\"";
            for (const auto& p : v->trajectory) {
                svg += fmt(sx(p.t)) + ',' + fmt(sy(fuel ? p.fuel_rate : p.co2_rate)) + ' ';
            }
            svg += "\"/>\n";
            const double ly = top + 20 + 18 * static_cast<double>(i);
            svg += "<line x1=\"" + fmt(width - margin_r + 15) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
                   fmt(width - margin_r + 35) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + colour +
                   "\" stroke-width=\"2\"/>\n";
            svg += "<text x=\"" + fmt(width - margin_r + 40) + "\" y=\"" + fmt(ly) + "\">" + v->id + "</text>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

void render_report(const ScenarioReport& report, const engine::SimulationResult& bundled,
                   const engine::SimulationResult& unbundled, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, out_dir.string(), ec.message());
    io::write_file((out_dir / "report.csv").string(), report_csv(report));
    io::write_file((out_dir / "travel_times.csv").string(), travel_times_csv(report));
    io::write_file((out_dir / "co2_timeseries.csv").string(), timeseries_csv(bundled, unbundled, false));
    io::write_file((out_dir / "fuel_timeseries.csv").string(), timeseries_csv(bundled, unbundled, true));
    io::write_file((out_dir / "comparison.svg").string(), comparison_svg(bundled, unbundled));
}

ComparisonRun run_comparison(const net::Network& network, const ScenarioConfig& config) {
    const io::RoutesFile vtypes = io::parse_routes_file(io::read_file(config.vtypes_file));
    auto find_vtype = [&](const std::string& id) -> const io::VehicleTypeSpec& {
        for (const auto& t : vtypes.vtypes) {
            if (t.id == id) return t;
        }
        throw Error(ErrorCode::UnknownVType, id, config.vtypes_file);
    };
    const io::AdditionalFile additional = io::parse_additional_file(io::read_file(config.additional_file), network);
    auto registry = std::make_shared<const emissions::Registry>(
        emissions::load_emission_classes(io::read_file(config.emissions_file)));

    ComparisonRun run;
    run.bundled = build_scenario(ScenarioLabel::scenario_I, network, additional.container_stops,
                                 find_vtype(config.double_vtype), config.stops, config.origin_edge,
                                 config.destination_edge, {0.0}, config.dwell);
    run.unbundled = build_scenario(ScenarioLabel::scenario_II, network, additional.container_stops,
                                   find_vtype(config.single_vtype), config.stops, config.origin_edge,
                                   config.destination_edge, {0.0, config.depart_stagger}, config.dwell);

    engine::SimulationConfig sim = config.sim;
    sim.record_trajectories = true;
    auto simulate = [&](const ScenarioDefinition& def) {
        engine::ScenarioInputs in{def.network, def.routes, additional, registry};
        auto world = engine::World::load(std::move(in), sim);
        return world.run();
    };
    auto bundled = std::async(std::launch::async, simulate, std::cref(run.bundled));
    auto unbundled = std::async(std::launch::async, simulate, std::cref(run.unbundled));
    run.bundled_result = bundled.get();
    run.unbundled_result = unbundled.get();
    run.report = compare(run.bundled_result, run.unbundled_result);
    return run;
}

void write_comparison(const ComparisonRun& run, const std::filesystem::path& out_dir) {
    render_report(run.report, run.bundled_result, run.unbundled_result, out_dir);
    io::write_file((out_dir / "scenario_I.rou.xml").string(), io::write_routes_file(run.bundled.routes));
    io::write_file((out_dir / "scenario_II.rou.xml").string(), io::write_routes_file(run.unbundled.routes));
    io::write_file((out_dir / "detectors_scenario_I.xml").string(),
                   io::write_detector_output(run.bundled_result.intervals));
    io::write_file((out_dir / "detectors_scenario_II.xml").string(),
                   io::write_detector_output(run.unbundled_result.intervals));
}

}  // namespace bundlesim::compare
