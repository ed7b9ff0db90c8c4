#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "core/network.hpp"
#include "core/scenario_io.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(BUNDLESIM_DATA_DIR) + "/" + name; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("bundlesim_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// Random inputs for property tests. std::mt19937_64 has a fixed output
/// sequence, but the std distributions do not, so only raw draws are used.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t bits() { return rng_(); }
    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
    int integer(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1))); }
    bool chance(double p) { return unit() < p; }

    /// A double with an awkward decimal expansion.
    double awkward(double lo, double hi) {
        switch (index(4)) {
        case 0: return uniform(lo, hi);
        case 1: return std::clamp(std::round(uniform(lo, hi)), lo, hi);
        case 2: return std::clamp(std::round(uniform(lo, hi) * 100.0) / 100.0, lo, hi);
        default: return std::nextafter(uniform(lo, hi), hi);
        }
    }

    /// Non-empty identifier without whitespace, mixing XML-special and
    /// multi-byte characters.
    std::string ident(const std::string& prefix) {
        static const std::vector<std::string> alphabet = {"a", "b", "Z", "0", "9", "_", "-", ".", ":", "/",
                                                          "&", "<", ">", "\"", "'", "\xc3\xa4", "\xe2\x82\xac"};
        std::string s = prefix;
        const int n = integer(0, 6);
        for (int i = 0; i < n; ++i) s += alphabet[index(alphabet.size())];
        return s;
    }

private:
    std::mt19937_64 rng_;
};

/// A valid random network: a chain so routes exist, plus random extra edges
/// and traffic lights.
inline bundlesim::net::Network random_network(Gen& g) {
    using namespace bundlesim::net;
    const int n_nodes = g.integer(2, 8);
    std::vector<Node> nodes;
    for (int i = 0; i < n_nodes; ++i) nodes.push_back({g.ident("n" + std::to_string(i) + "_"), NodeKind::plain, {}});

    std::vector<Edge> edges;
    auto make_edge = [&](int from, int to) {
        Edge e;
        e.id = g.ident("e" + std::to_string(edges.size()) + "_");
        e.from_node = nodes[static_cast<std::size_t>(from)].id;
        e.to_node = nodes[static_cast<std::size_t>(to)].id;
        e.length = g.awkward(1.0, 2000.0);
        e.speed_limit = g.awkward(1.0, 40.0);
        e.priority = g.integer(0, 15);
        if (g.chance(0.3)) e.allowed.insert("truck_single");
        if (g.chance(0.3)) e.allowed.insert("truck_double");
        if (g.chance(0.1)) e.allowed.insert(g.ident("cls"));
        edges.push_back(std::move(e));
    };
    for (int i = 0; i + 1 < n_nodes; ++i) make_edge(i, i + 1);
    const int extra = g.integer(0, 6);
    for (int k = 0; k < extra; ++k) {
        const int a = g.integer(0, n_nodes - 1);
        int b = g.integer(0, n_nodes - 1);
        if (a == b) b = (a + 1) % n_nodes;
        make_edge(a, b);
    }

    std::vector<TrafficLightProgram> programs;
    for (int i = 1; i < n_nodes; ++i) {
        if (!g.chance(0.3)) continue;
        auto& node = nodes[static_cast<std::size_t>(i)];
        TrafficLightProgram p;
        p.id = g.ident("tl" + std::to_string(i) + "_");
        p.offset = g.awkward(0.0, 120.0);
        node.kind = NodeKind::traffic_light;
        node.tls_ref = p.id;
        for (const auto& e : edges) {
            if (e.to_node == node.id && g.chance(0.8)) p.controlled_edges.push_back(e.id);
        }
        const int n_phases = g.integer(1, 4);
        for (int k = 0; k < n_phases; ++k) {
            Phase ph;
            ph.duration = g.awkward(0.5, 60.0);
            for (std::size_t s = 0; s < p.controlled_edges.size(); ++s) {
                ph.states.push_back(static_cast<Signal>(g.index(3)));
            }
            p.phases.push_back(std::move(ph));
        }
        programs.push_back(std::move(p));
    }
    return build_network(std::move(nodes), std::move(edges), std::move(programs));
}

inline bundlesim::io::RoutesFile random_routes(Gen& g) {
    using namespace bundlesim::io;
    RoutesFile r;
    const int n_types = g.integer(0, 3);
    for (int i = 0; i < n_types; ++i) {
        VehicleTypeSpec t;
        t.id = g.ident("t" + std::to_string(i) + "_");
        t.vclass = g.chance(0.5) ? VehicleClass::truck_single : VehicleClass::truck_double;
        t.max_speed = g.awkward(5.0, 40.0);
        t.min_speed = g.awkward(0.1, t.max_speed);
        if (t.min_speed > t.max_speed) t.min_speed = t.max_speed;
        t.accel = g.awkward(0.1, 5.0);
        t.decel = g.awkward(0.5, 9.0);
        t.length = g.awkward(1.0, 30.0);
        t.min_gap = g.awkward(0.5, 5.0);
        t.sigma = g.chance(0.5) ? 0.0 : g.unit();
        t.emission_class = g.ident("HBEFA3/");
        r.vtypes.push_back(std::move(t));
    }
    const int n_routes = g.integer(0, 3);
    for (int i = 0; i < n_routes; ++i) {
        bundlesim::net::Route route;
        route.id = g.ident("r" + std::to_string(i) + "_");
        const int len = g.integer(1, 5);
        for (int k = 0; k < len; ++k) route.edges.push_back(g.ident("e"));
        r.routes.push_back(std::move(route));
    }
    const int n_vehicles = g.integer(0, 4);
    for (int i = 0; i < n_vehicles; ++i) {
        VehicleSpec v;
        v.id = g.ident("v" + std::to_string(i) + "_");
        v.vtype = g.ident("t");
        v.route = g.ident("r");
        v.depart = g.awkward(0.0, 3600.0);
        const int n_stops = g.integer(0, 3);
        for (int k = 0; k < n_stops; ++k) v.stops.push_back({g.ident("cs"), g.awkward(0.0, 300.0)});
        r.vehicles.push_back(std::move(v));
    }
    return r;
}

inline bundlesim::io::AdditionalFile random_additional(Gen& g, const bundlesim::net::Network& net) {
    using namespace bundlesim::io;
    AdditionalFile a;
    const auto& edges = net.edges();
    const int n_det = g.integer(0, 4);
    for (int i = 0; i < n_det; ++i) {
        const auto& e = edges[g.index(edges.size())];
        a.detectors.push_back({g.ident("d" + std::to_string(i) + "_"), e.id, g.chance(0.1) ? e.length : g.uniform(0.0, e.length),
                               g.awkward(1.0, 300.0)});
    }
    const int n_stops = g.integer(0, 3);
    for (int i = 0; i < n_stops; ++i) {
        const auto& e = edges[g.index(edges.size())];
        const double start = g.uniform(0.0, e.length * 0.9);
        const double end = g.chance(0.2) ? e.length : g.uniform(start + e.length * 0.01, e.length);
        a.container_stops.push_back({g.ident("cs" + std::to_string(i) + "_"), e.id, start, end});
    }
    return a;
}

}  // namespace testing
