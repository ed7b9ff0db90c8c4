#ifndef BUNDLESIM_BUNDLESIM_H
#define BUNDLESIM_BUNDLESIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define BSIM_API __attribute__((visibility("default")))
#else
#define BSIM_API
#endif

typedef enum bsim_status {
    BSIM_OK = 0,
    BSIM_ERR_ARGUMENT = 1,   /* null pointer or out-of-range argument */
    BSIM_ERR_IO = 2,         /* file or socket failure */
    BSIM_ERR_PARSE = 3,      /* malformed or schema-violating input file */
    BSIM_ERR_VALIDATION = 4, /* well-formed input with bad references or values */
    BSIM_ERR_INCOMPLETE = 5, /* a run ended at t_max with vehicles still active */
    BSIM_ERR_INTERNAL = 6
} bsim_status;

/* Message and error-code name of the last failure on this thread. Valid until
 * the next failing call on the same thread. */
BSIM_API const char* bsim_last_error(void);
BSIM_API const char* bsim_last_error_code(void);

BSIM_API const char* bsim_version(void);

typedef struct bsim_sim_config {
    double dt;           /* s */
    double t_max;        /* s */
    uint64_t seed;
    int record_trajectories;
} bsim_sim_config;

BSIM_API bsim_sim_config bsim_sim_config_default(void);

typedef struct bsim_world bsim_world;

BSIM_API bsim_status bsim_world_load(const char* net_path, const char* routes_path, const char* additional_path,
                                     const char* emissions_path, const bsim_sim_config* config, bsim_world** out);
BSIM_API void bsim_world_free(bsim_world* world);

BSIM_API bsim_status bsim_world_step(bsim_world* world, uint64_t n);
/* Steps until no vehicle is active or pending, or t_max is reached.
 * Returns BSIM_ERR_INCOMPLETE in the latter case. */
BSIM_API bsim_status bsim_world_run(bsim_world* world);
BSIM_API bsim_status bsim_world_time(const bsim_world* world, double* out);
BSIM_API bsim_status bsim_world_min_expected(const bsim_world* world, size_t* out);

/* Writes accounts.json and detectors.xml, plus trajectory.csv when
 * trajectories were recorded. */
BSIM_API bsim_status bsim_world_write_outputs(const bsim_world* world, const char* out_dir);
/* Per-vehicle accounts as JSON text; release with bsim_string_free. */
BSIM_API bsim_status bsim_world_accounts_json(const bsim_world* world, char** out);
BSIM_API void bsim_string_free(char* s);

typedef struct bsim_report {
    double co2_kg[2];             /* [0] bundled, [1] unbundled */
    double fuel_l[2];
    double travel_time_sum_s[2];
    double travel_time_max_s[2];
    double distance_m[2];
    double co2_reduction_pct;
    double fuel_reduction_pct;
    double time_delta_s;
} bsim_report;

/* Runs both delivery scenarios and writes the report files into out_dir.
 * `report` may be null. */
BSIM_API bsim_status bsim_compare(const char* net_path, const char* scenario_config_path, const char* out_dir,
                                  bsim_report* report);

/* `route` is a space-separated edge list or null for the default route. */
BSIM_API bsim_status bsim_generate_routes(const char* net_path, int64_t n_steps, double p_single, double p_double,
                                          uint64_t seed, const char* route, const char* out_path);

typedef void (*bsim_listen_fn)(uint16_t port, void* user);

/* Serves the control protocol until the process ends. Scenario paths are all
 * null or all set (preload). `on_listen`, if set, receives the bound port. */
BSIM_API bsim_status bsim_serve(uint16_t port, const char* net_path, const char* routes_path,
                                const char* additional_path, const char* emissions_path, int any_address,
                                bsim_listen_fn on_listen, void* user);

#ifdef __cplusplus
}
#endif

#endif
