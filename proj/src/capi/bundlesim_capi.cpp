#include "bundlesim/bundlesim.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>

#include "core/compare.hpp"
#include "core/control_server.hpp"
#include "core/engine.hpp"
#include "core/error.hpp"

struct bsim_world {
    bundlesim::engine::World world;
};

namespace {

using bundlesim::Error;
using bundlesim::ErrorCode;

thread_local std::string g_last_error;
thread_local std::string g_last_code;

bsim_status fail(bsim_status status, std::string_view code, std::string_view message) {
    g_last_code = code;
    g_last_error = message;
    return status;
}

bsim_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io:
            return BSIM_ERR_IO;
        case ErrorCode::MalformedXml:
        case ErrorCode::SchemaViolation:
        case ErrorCode::MalformedConfig:
            return BSIM_ERR_PARSE;
        case ErrorCode::IncompleteResult:
            return BSIM_ERR_INCOMPLETE;
        default:
            return BSIM_ERR_VALIDATION;
    }
}

template <class F>
bsim_status guarded(F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        return fail(status_of(e.code()), bundlesim::to_string(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(BSIM_ERR_INTERNAL, "OutOfMemory", "allocation failed");
    } catch (const std::exception& e) {
        return fail(BSIM_ERR_INTERNAL, "Internal", e.what());
    } catch (...) {
        return fail(BSIM_ERR_INTERNAL, "Internal", "unknown exception");
    }
}

bsim_status null_argument(const char* name) {
    return fail(BSIM_ERR_ARGUMENT, "NullArgument", std::string(name) + " is null");
}

bundlesim::engine::SimulationConfig to_config(const bsim_sim_config* c) {
    bundlesim::engine::SimulationConfig config;
    if (c) {
        config.dt = c->dt;
        config.t_max = c->t_max;
        config.seed = c->seed;
        config.record_trajectories = c->record_trajectories != 0;
    }
    return config;
}

}  // namespace

extern "C" {

const char* bsim_last_error(void) { return g_last_error.c_str(); }
const char* bsim_last_error_code(void) { return g_last_code.c_str(); }
const char* bsim_version(void) { return "0.1.0"; }

bsim_sim_config bsim_sim_config_default(void) {
    const bundlesim::engine::SimulationConfig d;
    return bsim_sim_config{d.dt, d.t_max, d.seed, d.record_trajectories ? 1 : 0};
}

bsim_status bsim_world_load(const char* net_path, const char* routes_path, const char* additional_path,
                            const char* emissions_path, const bsim_sim_config* config, bsim_world** out) {
    if (!out) return null_argument("out");
    *out = nullptr;
    if (!net_path || !routes_path || !additional_path || !emissions_path) return null_argument("path");
    return guarded([&] {
        auto inputs = bundlesim::engine::read_scenario_files(net_path, routes_path, additional_path, emissions_path);
        *out = new bsim_world{bundlesim::engine::World::load(std::move(inputs), to_config(config))};
        return BSIM_OK;
    });
}

void bsim_world_free(bsim_world* world) { delete world; }

bsim_status bsim_world_step(bsim_world* world, uint64_t n) {
    if (!world) return null_argument("world");
    return guarded([&] {
        for (uint64_t i = 0; i < n; ++i) world->world.step();
        return BSIM_OK;
    });
}

bsim_status bsim_world_run(bsim_world* world) {
    if (!world) return null_argument("world");
    return guarded([&] {
        const auto result = world->world.run();
        if (result.t_max_exceeded) {
            return fail(BSIM_ERR_INCOMPLETE, "IncompleteResult", "t_max reached with vehicles still active");
        }
        return BSIM_OK;
    });
}

bsim_status bsim_world_time(const bsim_world* world, double* out) {
    if (!world) return null_argument("world");
    if (!out) return null_argument("out");
    *out = world->world.time();
    return BSIM_OK;
}

bsim_status bsim_world_min_expected(const bsim_world* world, size_t* out) {
    if (!world) return null_argument("world");
    if (!out) return null_argument("out");
    *out = world->world.min_expected_number();
    return BSIM_OK;
}

bsim_status bsim_world_write_outputs(const bsim_world* world, const char* out_dir) {
    if (!world) return null_argument("world");
    if (!out_dir) return null_argument("out_dir");
    return guarded([&] {
        namespace fs = std::filesystem;
        const fs::path dir = out_dir;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(ErrorCode::Io, dir.string(), ec.message());
        const auto result = world->world.result(true);
        bundlesim::io::write_file((dir / "accounts.json").string(), bundlesim::engine::accounts_json(result));
        bundlesim::io::write_file((dir / "detectors.xml").string(),
                                  bundlesim::io::write_detector_output(result.intervals));
        if (world->world.config().record_trajectories) {
            bundlesim::io::write_file((dir / "trajectory.csv").string(), bundlesim::engine::trajectory_csv(result));
        }
        return BSIM_OK;
    });
}

bsim_status bsim_world_accounts_json(const bsim_world* world, char** out) {
    if (!world) return null_argument("world");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        const std::string text = bundlesim::engine::accounts_json(world->world.result());
        char* buf = static_cast<char*>(std::malloc(text.size() + 1));
        if (!buf) throw std::bad_alloc();
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out = buf;
        return BSIM_OK;
    });
}

void bsim_string_free(char* s) { std::free(s); }

bsim_status bsim_compare(const char* net_path, const char* scenario_config_path, const char* out_dir,
                         bsim_report* report) {
    if (!net_path || !scenario_config_path || !out_dir) return null_argument("path");
    return guarded([&] {
        using namespace bundlesim;
        const auto network = io::parse_network_file(io::read_file(net_path));
        const auto config = compare::load_scenario_config(scenario_config_path);
        const auto run = compare::run_comparison(network, config);
        compare::write_comparison(run, out_dir);
        if (report) {
            const compare::ScenarioTotals* totals[2] = {&run.report.bundled, &run.report.unbundled};
            for (int i = 0; i < 2; ++i) {
                report->co2_kg[i] = totals[i]->co2_mg * 1e-6;
                report->fuel_l[i] = totals[i]->fuel_ml * 1e-3;
                report->travel_time_sum_s[i] = totals[i]->travel_time_sum_s;
                report->travel_time_max_s[i] = totals[i]->travel_time_max_s;
                report->distance_m[i] = totals[i]->distance_m;
            }
            report->co2_reduction_pct = run.report.co2_reduction_pct;
            report->fuel_reduction_pct = run.report.fuel_reduction_pct;
            report->time_delta_s = run.report.time_delta_s;
        }
        return BSIM_OK;
    });
}

bsim_status bsim_generate_routes(const char* net_path, int64_t n_steps, double p_single, double p_double,
                                 uint64_t seed, const char* route, const char* out_path) {
    if (!net_path || !out_path) return null_argument("path");
    return guarded([&] {
        using namespace bundlesim;
        const auto network = io::parse_network_file(io::read_file(net_path));
        io::RouteGenSpec spec{n_steps, p_single, p_double, seed, {}};
        if (route) {
            std::istringstream words(route);
            for (std::string edge; words >> edge;) spec.route.push_back(edge);
        }
        io::write_file(out_path, io::generate_route_file(spec, network));
        return BSIM_OK;
    });
}

bsim_status bsim_serve(uint16_t port, const char* net_path, const char* routes_path, const char* additional_path,
                       const char* emissions_path, int any_address, bsim_listen_fn on_listen, void* user) {
    const int given = (net_path != nullptr) + (routes_path != nullptr) + (additional_path != nullptr) +
                      (emissions_path != nullptr);
    if (given != 0 && given != 4) {
        return fail(BSIM_ERR_ARGUMENT, "BadArgs", "preload needs net, routes, additional and emissions together");
    }
    return guarded([&] {
        std::optional<bundlesim::server::ScenarioPaths> preload;
        if (given == 4) preload = bundlesim::server::ScenarioPaths{net_path, routes_path, additional_path, emissions_path};
        bundlesim::server::Server server(port, preload, any_address != 0);
        if (on_listen) on_listen(server.port(), user);
        server.serve();
        return BSIM_OK;
    });
}

}  // extern "C"
