#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/dynamics.hpp"
#include "core/scenario_io.hpp"

namespace bundlesim::detectors {

using io::DetectorInterval;
using io::DetectorSpec;

struct Crossing {
    std::string vehicle;
    double speed = 0.0;
    double co2_rate = 0.0;   // mg/s
    double fuel_rate = 0.0;  // ml/s

    bool operator==(const Crossing&) const = default;
};

/// Movement of one vehicle during one step, in route coordinates of `plan`.
struct Motion {
    const std::string* vehicle = nullptr;
    const dynamics::VehiclePlan* plan = nullptr;
    std::size_t prev_edge_index = 0;
    double prev_offset = 0.0;
    std::size_t next_edge_index = 0;
    double next_offset = 0.0;
    double speed = 0.0;
    double co2_rate = 0.0;
    double fuel_rate = 0.0;
};

/// E1-style loop: collects crossings and emits fixed-frequency intervals.
struct DetectorRuntime {
    DetectorSpec spec;
    std::size_t edge = 0;  // network edge index of spec.edge
    double interval_begin = 0.0;
    std::vector<Crossing> crossings;
    std::vector<DetectorInterval> emitted;
};

DetectorRuntime make_detector(const DetectorSpec& spec, const net::Network& network);

/// A vehicle crosses when the loop position lies in [prev, next) along its route,
/// i.e. it was at or before the loop and is now strictly past it. A route that
/// visits the loop's edge several times yields one crossing per pass.
std::vector<Crossing> detect_crossings(const DetectorRuntime& detector, std::span<const Motion> motions);

/// Aggregate of the current window closed at `end`.
DetectorInterval aggregate(const DetectorRuntime& detector, double end, double dt);

/// Closes the current window when now - interval_begin >= freq.
std::optional<DetectorInterval> flush_interval(DetectorRuntime& detector, double now, double dt);

/// Closes every due window and, when `final` is set, the trailing partial one.
void close_windows(DetectorRuntime& detector, double now, double dt, bool final);

}  // namespace bundlesim::detectors
