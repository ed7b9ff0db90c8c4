#include "core/scenario_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "core/error.hpp"
#include "core/numbers.hpp"
#include "core/rng.hpp"

namespace bundlesim::io {

namespace pt = boost::property_tree;

std::string_view to_string(VehicleClass vclass) noexcept {
    return vclass == VehicleClass::truck_double ? "truck_double" : "truck_single";
}

std::optional<VehicleClass> parse_vehicle_class(std::string_view token) noexcept {
    if (token == "truck_single") return VehicleClass::truck_single;
    if (token == "truck_double") return VehicleClass::truck_double;
    return std::nullopt;
}

VehicleTypeSpec reference_single_truck() {
    VehicleTypeSpec t;
    t.id = "truck_single";
    t.vclass = VehicleClass::truck_single;
    t.accel = 1.3;
    t.length = 12.0;
    return t;
}

VehicleTypeSpec reference_double_truck() {
    VehicleTypeSpec t;
    t.id = "truck_double";
    t.vclass = VehicleClass::truck_double;
    t.accel = 1.0;
    t.length = 18.75;
    return t;
}

namespace {

// ---------------------------------------------------------------------------
// reading

pt::ptree parse_xml(std::string_view bytes) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(bytes)};
        pt::read_xml(in, tree, pt::xml_parser::no_comments | pt::xml_parser::trim_whitespace);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::MalformedXml, "", e.what());
    }
    return tree;
}

/// The single document element, which must be named `root`.
const pt::ptree& document_root(const pt::ptree& tree, const std::string& root) {
    const pt::ptree* found = nullptr;
    for (const auto& [name, child] : tree) {
        if (name == root && !found) {
            found = &child;
        } else {
            throw Error(ErrorCode::SchemaViolation, name, "expected single <" + root + "> document element");
        }
    }
    if (!found) throw Error(ErrorCode::SchemaViolation, root, "missing <" + root + "> element");
    return *found;
}

/// Attribute access for one element with a fixed attribute vocabulary.
class Element {
public:
    Element(std::string name, const pt::ptree& node, std::initializer_list<std::string_view> known)
        : name_(std::move(name)), node_(node) {
        if (auto attrs = node.get_child_optional("<xmlattr>")) {
            for (const auto& [key, value] : *attrs) {
                if (std::find(known.begin(), known.end(), key) == known.end()) {
                    throw Error(ErrorCode::SchemaViolation, name_ + "@" + key, "unknown attribute");
                }
                attrs_.emplace(key, value.data());
            }
        }
    }

    bool has(const std::string& key) const { return attrs_.contains(key); }

    const std::string& text(const std::string& key) const {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) throw Error(ErrorCode::SchemaViolation, name_ + "@" + key, "missing attribute");
        return it->second;
    }

    std::optional<std::string> optional_text(const std::string& key) const {
        auto it = attrs_.find(key);
        if (it == attrs_.end()) return std::nullopt;
        return it->second;
    }

    double number(const std::string& key) const {
        auto v = parse_number(text(key));
        if (!v) throw Error(ErrorCode::SchemaViolation, name_ + "@" + key, "not a number: '" + text(key) + "'");
        return *v;
    }

    std::optional<double> optional_number(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return number(key);
    }

    std::int64_t integer(const std::string& key) const {
        auto v = parse_integer(text(key));
        if (!v) throw Error(ErrorCode::SchemaViolation, name_ + "@" + key, "not an integer: '" + text(key) + "'");
        return *v;
    }

    const pt::ptree& node() const { return node_; }

private:
    std::string name_;
    const pt::ptree& node_;
    std::map<std::string, std::string> attrs_;
};

std::vector<std::string> split_ws(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

[[noreturn]] void unexpected_child(const std::string& parent, const std::string& child) {
    throw Error(ErrorCode::SchemaViolation, parent + "/" + child, "unexpected element");
}

bool is_attribute_node(const std::string& name) { return name == "<xmlattr>"; }

void expect_no_children(const std::string& parent, const pt::ptree& node) {
    for (const auto& [name, child] : node) {
        if (!is_attribute_node(name)) unexpected_child(parent, name);
    }
}

// ---------------------------------------------------------------------------
// writing

std::string escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        case '\t': out += "&#9;"; break;
        case '\n': out += "&#10;"; break;
        case '\r': out += "&#13;"; break;
        default: out += c;
        }
    }
    return out;
}

class XmlWriter {
public:
    void open(std::string_view name, int depth) {
        pad(depth);
        out_ += '<';
        out_ += name;
    }
    void attr(std::string_view key, std::string_view value) {
        out_ += ' ';
        out_ += key;
        out_ += "=\"";
        out_ += escape(value);
        out_ += '"';
    }
    void attr(std::string_view key, double value) { attr(key, format_number(value)); }
    void attr_int(std::string_view key, std::int64_t value) { attr(key, std::to_string(value)); }
    void close_empty() { out_ += "/>\n"; }
    void close_open() { out_ += ">\n"; }
    void end(std::string_view name, int depth) {
        pad(depth);
        out_ += "</";
        out_ += name;
        out_ += ">\n";
    }
    std::string take() { return std::move(out_); }

private:
    void pad(int depth) { out_.append(static_cast<std::size_t>(depth) * 4, ' '); }
    std::string out_;
};

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// network file

net::Network parse_network_file(std::string_view bytes) {
    const pt::ptree tree = parse_xml(bytes);
    const pt::ptree& root = document_root(tree, "network");
    Element{"network", root, {}};

    std::vector<net::Node> nodes;
    std::vector<net::Edge> edges;
    std::vector<net::TrafficLightProgram> programs;
    for (const auto& [name, child] : root) {
        if (is_attribute_node(name)) continue;
        if (name == "node") {
            Element el{name, child, {"id", "kind", "tls"}};
            expect_no_children(name, child);
            net::Node n;
            n.id = el.text("id");
            auto kind = net::parse_node_kind(el.text("kind"));
            if (!kind) throw Error(ErrorCode::SchemaViolation, "node@kind", "unknown kind '" + el.text("kind") + "'");
            n.kind = *kind;
            n.tls_ref = el.optional_text("tls");
            nodes.push_back(std::move(n));
        } else if (name == "edge") {
            Element el{name, child, {"id", "from", "to", "length", "speed", "priority", "allow"}};
            expect_no_children(name, child);
            net::Edge e;
            e.id = el.text("id");
            e.from_node = el.text("from");
            e.to_node = el.text("to");
            e.length = el.number("length");
            e.speed_limit = el.number("speed");
            const auto prio = el.integer("priority");
            if (prio < 0 || prio > 1'000'000) throw Error(ErrorCode::InvalidValue, e.id, "priority out of range");
            e.priority = static_cast<int>(prio);
            if (auto allow = el.optional_text("allow")) {
                for (auto& tag : split_ws(*allow)) e.allowed.insert(std::move(tag));
            }
            edges.push_back(std::move(e));
        } else if (name == "tlProgram") {
            Element el{name, child, {"id", "offset", "edges"}};
            net::TrafficLightProgram p;
            p.id = el.text("id");
            p.offset = el.number("offset");
            p.controlled_edges = split_ws(el.text("edges"));
            for (const auto& [pname, pchild] : child) {
                if (is_attribute_node(pname)) continue;
                if (pname != "phase") unexpected_child(name, pname);
                Element ph{pname, pchild, {"dur", "state"}};
                expect_no_children(pname, pchild);
                net::Phase phase;
                phase.duration = ph.number("dur");
                for (char c : ph.text("state")) {
                    auto s = net::parse_signal(c);
                    if (!s) throw Error(ErrorCode::SchemaViolation, "phase@state", std::string("bad signal '") + c + "'");
                    phase.states.push_back(*s);
                }
                p.phases.push_back(std::move(phase));
            }
            programs.push_back(std::move(p));
        } else {
            unexpected_child("network", name);
        }
    }
    return net::build_network(std::move(nodes), std::move(edges), std::move(programs));
}

std::string write_network_file(const net::Network& network) {
    XmlWriter w;
    w.open("network", 0);
    w.close_open();
    for (const auto& n : network.nodes()) {
        w.open("node", 1);
        w.attr("id", n.id);
        w.attr("kind", net::to_string(n.kind));
        if (n.tls_ref) w.attr("tls", *n.tls_ref);
        w.close_empty();
    }
    for (const auto& e : network.edges()) {
        w.open("edge", 1);
        w.attr("id", e.id);
        w.attr("from", e.from_node);
        w.attr("to", e.to_node);
        w.attr("length", e.length);
        w.attr("speed", e.speed_limit);
        w.attr_int("priority", e.priority);
        if (!e.allowed.empty()) {
            w.attr("allow", join(std::vector<std::string>(e.allowed.begin(), e.allowed.end())));
        }
        w.close_empty();
    }
    for (const auto& p : network.programs()) {
        w.open("tlProgram", 1);
        w.attr("id", p.id);
        w.attr("offset", p.offset);
        w.attr("edges", join(p.controlled_edges));
        w.close_open();
        for (const auto& ph : p.phases) {
            w.open("phase", 2);
            w.attr("dur", ph.duration);
            std::string state;
            for (auto s : ph.states) state += net::to_char(s);
            w.attr("state", state);
            w.close_empty();
        }
        w.end("tlProgram", 1);
    }
    w.end("network", 0);
    return w.take();
}

// ---------------------------------------------------------------------------
// route file

namespace {

void check_vtype(const VehicleTypeSpec& t) {
    auto bad = [&](const char* what) { throw Error(ErrorCode::InvalidValue, t.id, what); };
    if (t.id.empty()) bad("empty vType id");
    if (!(t.min_speed > 0.0 && t.min_speed <= t.max_speed)) bad("need 0 < minSpeed <= maxSpeed");
    if (!(t.accel > 0.0)) bad("accel must be > 0");
    if (!(t.decel > 0.0)) bad("decel must be > 0");
    if (!(t.length > 0.0)) bad("length must be > 0");
    if (!(t.min_gap > 0.0)) bad("minGap must be > 0");
    if (!(t.sigma >= 0.0 && t.sigma <= 1.0)) bad("sigma must lie in [0, 1]");
    if (t.emission_class.empty()) bad("empty emissionClass");
}

}  // namespace

RoutesFile parse_routes_file(std::string_view bytes) {
    const pt::ptree tree = parse_xml(bytes);
    const pt::ptree& root = document_root(tree, "routes");
    Element{"routes", root, {}};

    RoutesFile out;
    std::set<std::string> vtype_ids, route_ids, vehicle_ids;
    for (const auto& [name, child] : root) {
        if (is_attribute_node(name)) continue;
        if (name == "vType") {
            Element el{name, child,
                       {"id", "vClass", "maxSpeed", "minSpeed", "accel", "decel", "length", "minGap", "sigma",
                        "emissionClass"}};
            expect_no_children(name, child);
            VehicleTypeSpec t;
            t.id = el.text("id");
            auto vc = parse_vehicle_class(el.text("vClass"));
            if (!vc) throw Error(ErrorCode::UnknownVClass, el.text("vClass"));
            t.vclass = *vc;
            t.max_speed = el.number("maxSpeed");
            t.min_speed = el.number("minSpeed");
            t.accel = el.number("accel");
            t.decel = el.number("decel");
            t.length = el.number("length");
            t.min_gap = el.number("minGap");
            t.sigma = el.number("sigma");
            t.emission_class = el.text("emissionClass");
            check_vtype(t);
            if (!vtype_ids.insert(t.id).second) throw Error(ErrorCode::DuplicateId, t.id, "vType");
            out.vtypes.push_back(std::move(t));
        } else if (name == "route") {
            Element el{name, child, {"id", "edges"}};
            expect_no_children(name, child);
            net::Route r;
            r.id = el.text("id");
            r.edges = split_ws(el.text("edges"));
            if (r.edges.empty()) throw Error(ErrorCode::InvalidValue, r.id, "route without edges");
            if (!route_ids.insert(r.id).second) throw Error(ErrorCode::DuplicateId, r.id, "route");
            out.routes.push_back(std::move(r));
        } else if (name == "vehicle") {
            Element el{name, child, {"id", "type", "route", "depart"}};
            VehicleSpec v;
            v.id = el.text("id");
            v.vtype = el.text("type");
            v.route = el.text("route");
            v.depart = el.number("depart");
            if (v.depart < 0.0) throw Error(ErrorCode::NegativeDepart, v.id);
            for (const auto& [sname, schild] : child) {
                if (is_attribute_node(sname)) continue;
                if (sname != "stop") unexpected_child(name, sname);
                Element st{sname, schild, {"containerStop", "dwell"}};
                expect_no_children(sname, schild);
                StopSpec s;
                s.container_stop = st.text("containerStop");
                s.dwell = st.optional_number("dwell").value_or(kDefaultDwell);
                if (s.dwell < 0.0) throw Error(ErrorCode::InvalidValue, v.id, "negative dwell");
                v.stops.push_back(std::move(s));
            }
            if (!vehicle_ids.insert(v.id).second) throw Error(ErrorCode::DuplicateId, v.id, "vehicle");
            out.vehicles.push_back(std::move(v));
        } else {
            unexpected_child("routes", name);
        }
    }
    return out;
}

std::string write_routes_file(const RoutesFile& routes) {
    XmlWriter w;
    w.open("routes", 0);
    w.close_open();
    for (const auto& t : routes.vtypes) {
        w.open("vType", 1);
        w.attr("id", t.id);
        w.attr("vClass", to_string(t.vclass));
        w.attr("maxSpeed", t.max_speed);
        w.attr("minSpeed", t.min_speed);
        w.attr("accel", t.accel);
        w.attr("decel", t.decel);
        w.attr("length", t.length);
        w.attr("minGap", t.min_gap);
        w.attr("sigma", t.sigma);
        w.attr("emissionClass", t.emission_class);
        w.close_empty();
    }
    for (const auto& r : routes.routes) {
        w.open("route", 1);
        w.attr("id", r.id);
        w.attr("edges", join(r.edges));
        w.close_empty();
    }
    for (const auto& v : routes.vehicles) {
        w.open("vehicle", 1);
        w.attr("id", v.id);
        w.attr("type", v.vtype);
        w.attr("route", v.route);
        w.attr("depart", v.depart);
        if (v.stops.empty()) {
            w.close_empty();
            continue;
        }
        w.close_open();
        for (const auto& s : v.stops) {
            w.open("stop", 2);
            w.attr("containerStop", s.container_stop);
            w.attr("dwell", s.dwell);
            w.close_empty();
        }
        w.end("vehicle", 1);
    }
    w.end("routes", 0);
    return w.take();
}

// ---------------------------------------------------------------------------
// additional file

AdditionalFile parse_additional_file(std::string_view bytes, const net::Network& network) {
    const pt::ptree tree = parse_xml(bytes);
    const pt::ptree& root = document_root(tree, "additional");
    Element{"additional", root, {}};

    AdditionalFile out;
    std::set<std::string> ids;
    for (const auto& [name, child] : root) {
        if (is_attribute_node(name)) continue;
        if (name == "inductionLoop") {
            Element el{name, child, {"id", "edge", "pos", "freq"}};
            expect_no_children(name, child);
            DetectorSpec d;
            d.id = el.text("id");
            d.edge = el.text("edge");
            d.pos = el.number("pos");
            d.freq = el.number("freq");
            const auto& edge = network.edge(d.edge);
            if (d.pos < 0.0 || d.pos > edge.length) throw Error(ErrorCode::PosOutOfRange, d.id);
            if (!(d.freq > 0.0)) throw Error(ErrorCode::InvalidValue, d.id, "freq must be > 0");
            if (!ids.insert(d.id).second) throw Error(ErrorCode::DuplicateId, d.id, "inductionLoop");
            out.detectors.push_back(std::move(d));
        } else if (name == "containerStop") {
            Element el{name, child, {"id", "edge", "startPos", "endPos"}};
            expect_no_children(name, child);
            ContainerStopSpec c;
            c.id = el.text("id");
            c.edge = el.text("edge");
            c.start_pos = el.number("startPos");
            c.end_pos = el.number("endPos");
            const auto& edge = network.edge(c.edge);
            if (!(c.start_pos >= 0.0 && c.start_pos < c.end_pos && c.end_pos <= edge.length)) {
                throw Error(ErrorCode::PosOutOfRange, c.id);
            }
            if (!ids.insert(c.id).second) throw Error(ErrorCode::DuplicateId, c.id, "containerStop");
            out.container_stops.push_back(std::move(c));
        } else {
            unexpected_child("additional", name);
        }
    }
    return out;
}

std::string write_additional_file(const AdditionalFile& additional) {
    XmlWriter w;
    w.open("additional", 0);
    w.close_open();
    for (const auto& d : additional.detectors) {
        w.open("inductionLoop", 1);
        w.attr("id", d.id);
        w.attr("edge", d.edge);
        w.attr("pos", d.pos);
        w.attr("freq", d.freq);
        w.close_empty();
    }
    for (const auto& c : additional.container_stops) {
        w.open("containerStop", 1);
        w.attr("id", c.id);
        w.attr("edge", c.edge);
        w.attr("startPos", c.start_pos);
        w.attr("endPos", c.end_pos);
        w.close_empty();
    }
    w.end("additional", 0);
    return w.take();
}

// ---------------------------------------------------------------------------
// detector output

std::string write_detector_output(const std::vector<DetectorInterval>& intervals) {
    for (std::size_t i = 1; i < intervals.size(); ++i) {
        const auto& a = intervals[i - 1];
        const auto& b = intervals[i];
        if (std::tie(b.id, b.begin) < std::tie(a.id, a.begin)) throw Error(ErrorCode::UnsortedIntervals, b.id);
    }
    if (intervals.empty()) return "<detector/>\n";
    XmlWriter w;
    w.open("detector", 0);
    w.close_open();
    for (const auto& iv : intervals) {
        w.open("interval", 1);
        w.attr("begin", iv.begin);
        w.attr("end", iv.end);
        w.attr("id", iv.id);
        w.attr_int("nVehContrib", iv.n_veh);
        w.attr("meanSpeed", iv.mean_speed);
        w.attr("co2_mg", iv.co2_mg);
        w.attr("fuel_ml", iv.fuel_ml);
        w.close_empty();
    }
    w.end("detector", 0);
    return w.take();
}

std::vector<DetectorInterval> parse_detector_output(std::string_view bytes) {
    const pt::ptree tree = parse_xml(bytes);
    const pt::ptree& root = document_root(tree, "detector");
    std::vector<DetectorInterval> out;
    for (const auto& [name, child] : root) {
        if (is_attribute_node(name)) continue;
        if (name != "interval") unexpected_child("detector", name);
        Element el{name, child, {"begin", "end", "id", "nVehContrib", "meanSpeed", "co2_mg", "fuel_ml"}};
        expect_no_children(name, child);
        DetectorInterval iv;
        iv.begin = el.number("begin");
        iv.end = el.number("end");
        iv.id = el.text("id");
        iv.n_veh = el.integer("nVehContrib");
        iv.mean_speed = el.number("meanSpeed");
        iv.co2_mg = el.number("co2_mg");
        iv.fuel_ml = el.number("fuel_ml");
        out.push_back(std::move(iv));
    }
    return out;
}

// ---------------------------------------------------------------------------
// route generation

std::string generate_route_file(const RouteGenSpec& spec, const net::Network& network) {
    auto valid_p = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
    if (!valid_p(spec.p_single)) throw Error(ErrorCode::InvalidProbability, "p_single");
    if (!valid_p(spec.p_double)) throw Error(ErrorCode::InvalidProbability, "p_double");
    if (spec.n_steps < 0) throw Error(ErrorCode::InvalidValue, "n_steps", "must be >= 0");

    RoutesFile out;
    out.vtypes = {reference_single_truck(), reference_double_truck()};

    net::Route route{"gen_route", spec.route};
    if (route.edges.empty()) {
        const std::size_t last = network.edges().size() - 1;
        for (const auto& vt : out.vtypes) {
            auto path = net::shortest_path(network, 0, last, to_string(vt.vclass));
            if (path.empty()) {
                throw Error(ErrorCode::NotConnected, network.edge_at(0).id, "no path to " + network.edge_at(last).id);
            }
            if (route.edges.empty()) {
                for (auto e : path) route.edges.push_back(network.edge_at(e).id);
            }
        }
    }
    net::validate_route(network, route);
    out.routes.push_back(route);

    Xoshiro256 rng{spec.seed};
    std::int64_t veh_nr = 0;
    for (std::int64_t i = 0; i < spec.n_steps; ++i) {
        const double u_single = rng.uniform();
        const double u_double = rng.uniform();
        if (u_single < spec.p_single) {
            out.vehicles.push_back({std::to_string(veh_nr++), "truck_single", route.id, static_cast<double>(i), {}});
        }
        if (u_double < spec.p_double) {
            out.vehicles.push_back({std::to_string(veh_nr++), "truck_double", route.id, static_cast<double>(i), {}});
        }
    }
    return write_routes_file(out);
}

// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, path, "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, path, "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, path, "write failed");
}

}  // namespace bundlesim::io
