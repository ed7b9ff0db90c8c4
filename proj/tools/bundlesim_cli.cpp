#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"

#include "bundlesim/bundlesim.h"

namespace {

int report_failure(bsim_status status) {
    std::fprintf(stderr, "error [%s]: %s\n", bsim_last_error_code(), bsim_last_error());
    return static_cast<int>(status);
}

void announce(uint16_t port, void*) {
    std::fprintf(stderr, "listening on port %u\n", static_cast<unsigned>(port));
    std::fflush(stderr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delivery-truck bundling traffic simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", bsim_version());

    std::string net, routes, additional, emissions, out, scenario_config, route;
    double dt = 1.0, t_max = 3600.0, p_single = 0.0, p_double = 0.0;
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
    bool trajectory = false;
    bool any_address = false;
    int port = -1;

    auto* simulate = app.add_subcommand("simulate", "Run one scenario to completion");
    simulate->add_option("--net", net, "Network file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--routes", routes, "Route file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--additional", additional, "Detector and container-stop file")
        ->required()
        ->check(CLI::ExistingFile);
    simulate->add_option("--emissions", emissions, "Emission class config")->required()->check(CLI::ExistingFile);
    simulate->add_option("--dt", dt, "Step length in seconds")->check(CLI::PositiveNumber);
    simulate->add_option("--t-max", t_max, "Simulation horizon in seconds")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", seed, "Random seed");
    simulate->add_option("--out", out, "Output directory")->default_val("out");
    simulate->add_flag("--trajectory", trajectory, "Also write trajectory.csv");

    auto* cmp = app.add_subcommand("compare", "Run the bundled and unbundled delivery scenarios");
    cmp->add_option("--net", net, "Network file")->required()->check(CLI::ExistingFile);
    cmp->add_option("--scenario-config", scenario_config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    cmp->add_option("--out", out, "Output directory")->required();

    auto* gen = app.add_subcommand("gen-routes", "Generate random truck demand");
    gen->add_option("--net", net, "Network file")->required()->check(CLI::ExistingFile);
    gen->add_option("--steps", steps, "Number of generation steps")->required()->check(CLI::NonNegativeNumber);
    gen->add_option("--p-single", p_single, "Per-step probability of a single truck")->required();
    gen->add_option("--p-double", p_double, "Per-step probability of a double truck")->required();
    gen->add_option("--seed", seed, "Random seed")->required();
    gen->add_option("--route", route, "Space-separated edge ids (default: shortest first-to-last edge path)");
    gen->add_option("--out", out, "Output route file")->required();

    auto* serve = app.add_subcommand("serve", "Serve the control protocol over TCP");
    serve->add_option("--port", port, "TCP port (falls back to BUNDLESIM_PORT)")->check(CLI::Range(0, 65535));
    auto* s_net = serve->add_option("--net", net, "Preload network file")->check(CLI::ExistingFile);
    auto* s_routes = serve->add_option("--routes", routes, "Preload route file")->check(CLI::ExistingFile);
    auto* s_add = serve->add_option("--additional", additional, "Preload additional file")->check(CLI::ExistingFile);
    auto* s_em = serve->add_option("--emissions", emissions, "Preload emission config")->check(CLI::ExistingFile);
    s_net->needs(s_routes, s_add, s_em);
    s_routes->needs(s_net);
    s_add->needs(s_net);
    s_em->needs(s_net);
    serve->add_flag("--any-address", any_address, "Listen on all interfaces instead of loopback");

    CLI11_PARSE(app, argc, argv);

    if (*simulate) {
        bsim_sim_config config = bsim_sim_config_default();
        config.dt = dt;
        config.t_max = t_max;
        config.seed = seed;
        config.record_trajectories = trajectory ? 1 : 0;
        bsim_world* world = nullptr;
        bsim_status st = bsim_world_load(net.c_str(), routes.c_str(), additional.c_str(), emissions.c_str(), &config,
                                         &world);
        if (st != BSIM_OK) return report_failure(st);
        const bsim_status run = bsim_world_run(world);
        if (run != BSIM_OK && run != BSIM_ERR_INCOMPLETE) {
            bsim_world_free(world);
            return report_failure(run);
        }
        if (run == BSIM_ERR_INCOMPLETE) std::fprintf(stderr, "warning: %s\n", bsim_last_error());
        st = bsim_world_write_outputs(world, out.c_str());
        double t = 0.0;
        bsim_world_time(world, &t);
        bsim_world_free(world);
        if (st != BSIM_OK) return report_failure(st);
        std::printf("simulated until t=%g s, outputs in %s\n", t, out.c_str());
        return run == BSIM_OK ? 0 : static_cast<int>(run);
    }

    if (*cmp) {
        bsim_report report{};
        const bsim_status st = bsim_compare(net.c_str(), scenario_config.c_str(), out.c_str(), &report);
        if (st != BSIM_OK) return report_failure(st);
        std::printf("scenario_I:  co2 %.4f kg  fuel %.4f L  time %.0f s\n", report.co2_kg[0], report.fuel_l[0],
                    report.travel_time_sum_s[0]);
        std::printf("scenario_II: co2 %.4f kg  fuel %.4f L  time %.0f s\n", report.co2_kg[1], report.fuel_l[1],
                    report.travel_time_sum_s[1]);
        std::printf("reduction:   co2 %.2f %%  fuel %.2f %%\n", report.co2_reduction_pct, report.fuel_reduction_pct);
        return 0;
    }

    if (*gen) {
        const bsim_status st = bsim_generate_routes(net.c_str(), steps, p_single, p_double, seed,
                                                    route.empty() ? nullptr : route.c_str(), out.c_str());
        return st == BSIM_OK ? 0 : report_failure(st);
    }

    if (port < 0) {
        const char* env = std::getenv("BUNDLESIM_PORT");
        if (!env) {
            std::fprintf(stderr, "error: --port not given and BUNDLESIM_PORT not set\n");
            return 2;
        }
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || value < 0 || value > 65535) {
            std::fprintf(stderr, "error: BUNDLESIM_PORT is not a port number: %s\n", env);
            return 2;
        }
        port = static_cast<int>(value);
    }
    const bool preload = !net.empty();
    const bsim_status st =
        bsim_serve(static_cast<uint16_t>(port), preload ? net.c_str() : nullptr, preload ? routes.c_str() : nullptr,
                   preload ? additional.c_str() : nullptr, preload ? emissions.c_str() : nullptr, any_address ? 1 : 0,
                   announce, nullptr);
    return st == BSIM_OK ? 0 : report_failure(st);
}
