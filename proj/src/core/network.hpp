#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bundlesim::net {

/// Priority of a main street. Container stops are only reachable through
/// edges at or above this level.
inline constexpr int kMainStreetPriority = 10;

enum class NodeKind { plain, traffic_light };

std::string_view to_string(NodeKind kind) noexcept;
std::optional<NodeKind> parse_node_kind(std::string_view token) noexcept;

struct Node {
    std::string id;
    NodeKind kind = NodeKind::plain;
    std::optional<std::string> tls_ref;

    bool operator==(const Node&) const = default;
};

struct Edge {
    std::string id;
    std::string from_node;
    std::string to_node;
    double length = 0.0;       // m
    double speed_limit = 0.0;  // m/s
    int priority = 0;
    /// Vehicle classes permitted on the edge; empty means unrestricted.
    std::set<std::string> allowed;

    bool allows(std::string_view vclass) const;
    bool operator==(const Edge&) const = default;
};

enum class Signal { green, yellow, red };

char to_char(Signal s) noexcept;
std::optional<Signal> parse_signal(char c) noexcept;

struct Phase {
    double duration = 0.0;
    /// One entry per controlled edge, in TrafficLightProgram::controlled_edges order.
    std::vector<Signal> states;

    bool operator==(const Phase&) const = default;
};

/// Fixed-time signal plan. The first phase starts at t = offset (mod cycle).
struct TrafficLightProgram {
    std::string id;
    double offset = 0.0;
    std::vector<std::string> controlled_edges;
    std::vector<Phase> phases;

    double cycle_length() const;
    std::size_t phase_index_at(double t) const;
    Signal state_at(double t, std::size_t slot) const;

    bool operator==(const TrafficLightProgram&) const = default;
};

struct Route {
    std::string id;
    std::vector<std::string> edges;

    bool operator==(const Route&) const = default;
};

/// Where a controlled edge's signal is read from.
struct SignalSlot {
    std::size_t program = 0;
    std::size_t slot = 0;
};

/// Validated, indexed road graph. Immutable once built; mutating helpers return
/// a new value.
class Network {
public:
    Network() = default;

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::vector<TrafficLightProgram>& programs() const noexcept { return programs_; }

    std::optional<std::size_t> node_index(std::string_view id) const;
    std::optional<std::size_t> edge_index(std::string_view id) const;
    std::optional<std::size_t> program_index(std::string_view id) const;

    /// Throws Error(UnknownEdge) when absent.
    const Edge& edge(std::string_view id) const;
    const Edge& edge_at(std::size_t index) const { return edges_.at(index); }

    /// Outgoing edge indices of a node, in file order.
    const std::vector<std::size_t>& outgoing(std::size_t node) const { return outgoing_.at(node); }
    std::size_t from_index(std::size_t edge) const { return edge_from_.at(edge); }
    std::size_t to_index(std::size_t edge) const { return edge_to_.at(edge); }

    /// Signal controlling the downstream end of an edge, if any.
    const std::optional<SignalSlot>& signal_of(std::size_t edge) const { return signals_.at(edge); }

    bool operator==(const Network& other) const {
        return nodes_ == other.nodes_ && edges_ == other.edges_ && programs_ == other.programs_;
    }

private:
    friend Network build_network(std::vector<Node>, std::vector<Edge>, std::vector<TrafficLightProgram>);

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<TrafficLightProgram> programs_;

    std::unordered_map<std::string, std::size_t> node_lookup_;
    std::unordered_map<std::string, std::size_t> edge_lookup_;
    std::unordered_map<std::string, std::size_t> program_lookup_;
    std::vector<std::vector<std::size_t>> outgoing_;
    std::vector<std::size_t> edge_from_;
    std::vector<std::size_t> edge_to_;
    std::vector<std::optional<SignalSlot>> signals_;
};

/// Validates and indexes the collections. Throws Error with DuplicateId,
/// DanglingNode, MissingProgram, InvalidValue or NoEdges.
Network build_network(std::vector<Node> nodes, std::vector<Edge> edges, std::vector<TrafficLightProgram> programs);

/// Throws UnknownEdge or DisconnectedRoute.
void validate_route(const Network& network, const Route& route);

/// Sum of member edge lengths. Throws UnknownEdge.
double route_length(const Network& network, const Route& route);

double effective_speed_limit(const Edge& edge, double vtype_max_speed) noexcept;

Network set_edge_priority(const Network& network, std::string_view edge_id, int priority);

/// Shortest edge sequence (by length) starting with `from_edge` and ending with
/// `to_edge`, using only edges that allow `vclass` and have at least
/// `min_priority`. Empty when unreachable.
std::vector<std::size_t> shortest_path(const Network& network, std::size_t from_edge, std::size_t to_edge,
                                       std::string_view vclass, int min_priority = 0);

}  // namespace bundlesim::net
