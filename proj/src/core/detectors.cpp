#include "core/detectors.hpp"

#include <algorithm>
#include <tuple>

#include "core/error.hpp"

namespace bundlesim::detectors {

DetectorRuntime make_detector(const DetectorSpec& spec, const net::Network& network) {
    auto idx = network.edge_index(spec.edge);
    if (!idx) throw Error(ErrorCode::UnknownEdge, spec.edge, "detector " + spec.id);
    DetectorRuntime rt;
    rt.spec = spec;
    rt.edge = *idx;
    return rt;
}

std::vector<Crossing> detect_crossings(const DetectorRuntime& detector, std::span<const Motion> motions) {
    std::vector<Crossing> out;
    for (const Motion& m : motions) {
        const auto& plan = *m.plan;
        const double before = plan.coordinate(m.prev_edge_index, m.prev_offset);
        const double after = plan.coordinate(m.next_edge_index, m.next_offset);
        if (!(after > before)) continue;
        for (std::size_t k = 0; k < plan.edges.size(); ++k) {
            if (plan.edges[k] != detector.edge) continue;
            const double mark = plan.edge_start[k] + detector.spec.pos;
            if (before <= mark && mark < after) {
                out.push_back({*m.vehicle, m.speed, m.co2_rate, m.fuel_rate});
            }
        }
    }
    return out;
}

DetectorInterval aggregate(const DetectorRuntime& detector, double end, double dt) {
    DetectorInterval iv;
    iv.id = detector.spec.id;
    iv.begin = detector.interval_begin;
    iv.end = end;
    iv.n_veh = static_cast<std::int64_t>(detector.crossings.size());
    if (!detector.crossings.empty()) {
        // Summed in a canonical order so the result does not depend on vehicle processing order.
        std::vector<Crossing> sorted = detector.crossings;
        std::sort(sorted.begin(), sorted.end(), [](const Crossing& a, const Crossing& b) {
            return std::tie(a.vehicle, a.speed, a.co2_rate, a.fuel_rate) <
                   std::tie(b.vehicle, b.speed, b.co2_rate, b.fuel_rate);
        });
        double speed_sum = 0.0;
        for (const auto& c : sorted) {
            speed_sum += c.speed;
            iv.co2_mg += c.co2_rate * dt;
            iv.fuel_ml += c.fuel_rate * dt;
        }
        iv.mean_speed = speed_sum / static_cast<double>(detector.crossings.size());
    }
    return iv;
}

std::optional<DetectorInterval> flush_interval(DetectorRuntime& detector, double now, double dt) {
    if (now - detector.interval_begin < detector.spec.freq) return std::nullopt;
    const double end = detector.interval_begin + detector.spec.freq;
    DetectorInterval iv = aggregate(detector, end, dt);
    detector.emitted.push_back(iv);
    detector.crossings.clear();
    detector.interval_begin = end;
    return iv;
}

void close_windows(DetectorRuntime& detector, double now, double dt, bool final) {
    while (flush_interval(detector, now, dt)) {
    }
    if (final && now > detector.interval_begin) {
        detector.emitted.push_back(aggregate(detector, now, dt));
        detector.crossings.clear();
        detector.interval_begin = now;
    }
}

}  // namespace bundlesim::detectors
