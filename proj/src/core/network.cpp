#include "core/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <utility>

#include "core/error.hpp"
#include "core/numbers.hpp"

namespace bundlesim::net {

std::string_view to_string(NodeKind kind) noexcept {
    return kind == NodeKind::traffic_light ? "traffic_light" : "plain";
}

std::optional<NodeKind> parse_node_kind(std::string_view token) noexcept {
    if (token == "plain") return NodeKind::plain;
    if (token == "traffic_light") return NodeKind::traffic_light;
    return std::nullopt;
}

bool Edge::allows(std::string_view vclass) const {
    return allowed.empty() || allowed.contains(std::string(vclass));
}

char to_char(Signal s) noexcept {
    switch (s) {
    case Signal::green: return 'g';
    case Signal::yellow: return 'y';
    case Signal::red: return 'r';
    }
    return 'r';
}

std::optional<Signal> parse_signal(char c) noexcept {
    switch (c) {
    case 'g': return Signal::green;
    case 'y': return Signal::yellow;
    case 'r': return Signal::red;
    default: return std::nullopt;
    }
}

double TrafficLightProgram::cycle_length() const {
    CompensatedSum total;
    for (const auto& p : phases) total.add(p.duration);
    return total.value();
}

std::size_t TrafficLightProgram::phase_index_at(double t) const {
    const double cycle = cycle_length();
    double local = std::fmod(t - offset, cycle);
    if (local < 0) local += cycle;
    double acc = 0.0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        acc += phases[i].duration;
        if (local < acc) return i;
    }
    return phases.size() - 1;
}

Signal TrafficLightProgram::state_at(double t, std::size_t slot) const {
    return phases.at(phase_index_at(t)).states.at(slot);
}

std::optional<std::size_t> Network::node_index(std::string_view id) const {
    auto it = node_lookup_.find(std::string(id));
    if (it == node_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Network::edge_index(std::string_view id) const {
    auto it = edge_lookup_.find(std::string(id));
    if (it == edge_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Network::program_index(std::string_view id) const {
    auto it = program_lookup_.find(std::string(id));
    if (it == program_lookup_.end()) return std::nullopt;
    return it->second;
}

const Edge& Network::edge(std::string_view id) const {
    auto idx = edge_index(id);
    if (!idx) throw Error(ErrorCode::UnknownEdge, std::string(id));
    return edges_[*idx];
}

namespace {

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

bool has_space(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

Network build_network(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<TrafficLightProgram> programs) {
    if (edges.empty()) throw Error(ErrorCode::NoEdges, "");

    Network net;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.id.empty()) throw Error(ErrorCode::InvalidValue, n.id, "empty node id");
        if (!net.node_lookup_.emplace(n.id, i).second) throw Error(ErrorCode::DuplicateId, n.id, "node");
        if ((n.kind == NodeKind::traffic_light) != n.tls_ref.has_value()) {
            throw Error(ErrorCode::InvalidValue, n.id, "traffic_light nodes need a tls reference and only they may have one");
        }
    }
    for (std::size_t i = 0; i < programs.size(); ++i) {
        const auto& p = programs[i];
        if (!net.program_lookup_.emplace(p.id, i).second) throw Error(ErrorCode::DuplicateId, p.id, "tlProgram");
        if (!(std::isfinite(p.offset) && p.offset >= 0.0)) throw Error(ErrorCode::InvalidValue, p.id, "offset < 0");
        if (p.phases.empty()) throw Error(ErrorCode::InvalidValue, p.id, "program without phases");
        for (const auto& ph : p.phases) {
            if (!positive(ph.duration)) throw Error(ErrorCode::InvalidValue, p.id, "phase duration must be > 0");
            if (ph.states.size() != p.controlled_edges.size()) {
                throw Error(ErrorCode::InvalidValue, p.id, "phase state count differs from controlled edge count");
            }
        }
    }
    for (const Node& n : nodes) {
        if (n.tls_ref && !net.program_lookup_.contains(*n.tls_ref)) throw Error(ErrorCode::MissingProgram, *n.tls_ref);
    }

    net.outgoing_.assign(nodes.size(), {});
    net.signals_.assign(edges.size(), std::nullopt);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const Edge& e = edges[i];
        if (e.id.empty()) throw Error(ErrorCode::InvalidValue, e.id, "empty edge id");
        if (has_space(e.id)) throw Error(ErrorCode::InvalidValue, e.id, "edge id contains whitespace");
        for (const auto& tag : e.allowed) {
            if (tag.empty() || has_space(tag)) throw Error(ErrorCode::InvalidValue, e.id, "bad vehicle class tag");
        }
        if (!net.edge_lookup_.emplace(e.id, i).second) throw Error(ErrorCode::DuplicateId, e.id, "edge");
        auto from = net.node_lookup_.find(e.from_node);
        if (from == net.node_lookup_.end()) throw Error(ErrorCode::DanglingNode, e.from_node);
        auto to = net.node_lookup_.find(e.to_node);
        if (to == net.node_lookup_.end()) throw Error(ErrorCode::DanglingNode, e.to_node);
        if (e.from_node == e.to_node) throw Error(ErrorCode::InvalidValue, e.id, "self loop");
        if (!positive(e.length)) throw Error(ErrorCode::InvalidValue, e.id, "length must be > 0");
        if (!positive(e.speed_limit)) throw Error(ErrorCode::InvalidValue, e.id, "speed must be > 0");
        if (e.priority < 0) throw Error(ErrorCode::InvalidValue, e.id, "priority must be >= 0");
        net.edge_from_.push_back(from->second);
        net.edge_to_.push_back(to->second);
        net.outgoing_[from->second].push_back(i);
    }

    for (std::size_t p = 0; p < programs.size(); ++p) {
        const auto& prog = programs[p];
        for (std::size_t slot = 0; slot < prog.controlled_edges.size(); ++slot) {
            const auto& eid = prog.controlled_edges[slot];
            auto it = net.edge_lookup_.find(eid);
            if (it == net.edge_lookup_.end()) throw Error(ErrorCode::UnknownEdge, eid, "controlled by " + prog.id);
            const Node& end = nodes[net.edge_to_[it->second]];
            if (end.tls_ref != prog.id) {
                throw Error(ErrorCode::InvalidValue, eid, "controlled edge does not end at a node of program " + prog.id);
            }
            if (net.signals_[it->second]) throw Error(ErrorCode::DuplicateId, eid, "edge controlled twice");
            net.signals_[it->second] = SignalSlot{p, slot};
        }
    }

    net.nodes_ = std::move(nodes);
    net.edges_ = std::move(edges);
    net.programs_ = std::move(programs);
    return net;
}

void validate_route(const Network& network, const Route& route) {
    if (route.edges.empty()) throw Error(ErrorCode::DisconnectedRoute, route.id, "empty route");
    const Edge* prev = nullptr;
    for (const auto& eid : route.edges) {
        const Edge& e = network.edge(eid);
        if (prev && prev->to_node != e.from_node) {
            throw Error(ErrorCode::DisconnectedRoute, route.id, prev->id + " -> " + e.id);
        }
        prev = &e;
    }
}

double route_length(const Network& network, const Route& route) {
    double total = 0.0;
    for (const auto& eid : route.edges) total += network.edge(eid).length;
    return total;
}

double effective_speed_limit(const Edge& edge, double vtype_max_speed) noexcept {
    return std::min(edge.speed_limit, vtype_max_speed);
}

Network set_edge_priority(const Network& network, std::string_view edge_id, int priority) {
    auto idx = network.edge_index(edge_id);
    if (!idx) throw Error(ErrorCode::UnknownEdge, std::string(edge_id));
    if (priority < 0) throw Error(ErrorCode::InvalidValue, std::string(edge_id), "priority must be >= 0");
    std::vector<Edge> edges = network.edges();
    edges[*idx].priority = priority;
    return build_network(network.nodes(), std::move(edges), network.programs());
}

std::vector<std::size_t> shortest_path(const Network& network, std::size_t from_edge, std::size_t to_edge,
                                       std::string_view vclass, int min_priority) {
    const auto& edges = network.edges();
    if (from_edge >= edges.size() || to_edge >= edges.size()) return {};
    auto usable = [&](std::size_t e) { return edges[e].allows(vclass) && edges[e].priority >= min_priority; };
    if (!usable(from_edge) || !usable(to_edge)) return {};
    if (from_edge == to_edge) return {from_edge};

    // Dijkstra over edges; cost of a path is the length of all edges after the first.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(edges.size(), inf);
    std::vector<std::size_t> prev(edges.size(), edges.size());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist[from_edge] = 0.0;
    open.emplace(0.0, from_edge);
    while (!open.empty()) {
        auto [d, e] = open.top();
        open.pop();
        if (d > dist[e]) continue;
        if (e == to_edge) break;
        for (std::size_t next : network.outgoing(network.to_index(e))) {
            if (!usable(next)) continue;
            const double nd = d + edges[next].length;
            if (nd < dist[next]) {
                dist[next] = nd;
                prev[next] = e;
                open.emplace(nd, next);
            }
        }
    }
    if (dist[to_edge] == inf) return {};
    std::vector<std::size_t> path;
    for (std::size_t e = to_edge; e != edges.size(); e = prev[e]) {
        path.push_back(e);
        if (e == from_edge) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace bundlesim::net
