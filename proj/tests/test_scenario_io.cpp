#include <array>
#include <cstdint>
#include <string>

#include "doctest.h"

#include "core/error.hpp"
#include "core/numbers.hpp"
#include "core/rng.hpp"
#include "core/scenario_io.hpp"
#include "support.hpp"

using namespace bundlesim;
using namespace bundlesim::io;

namespace {

net::Network reference_net() { return parse_network_file(read_file(testing::data_path("linz_reference.net.xml"))); }

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

// Reference xoshiro256** and splitmix64, written from the published algorithm
// independently of the library class.
struct RefXoshiro {
    std::array<std::uint64_t, 4> s{};

    static std::uint64_t splitmix(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    explicit RefXoshiro(std::uint64_t seed) {
        for (int i = 0; i < 4; ++i) s[i] = splitmix(seed);
    }
    std::uint64_t next() {
        const std::uint64_t out = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return out;
    }
    double unit() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
};

}  // namespace

TEST_CASE("network file examples") {
    SUBCASE("empty network") {
        CHECK(code_of([] { parse_network_file("<network/>"); }) == ErrorCode::NoEdges);
    }
    SUBCASE("speed parses exactly") {
        const auto net = parse_network_file(
            R"(<network><node id="A" kind="plain"/><node id="B" kind="plain"/>)"
            R"(<edge id="ab" from="A" to="B" length="100" speed="13.89" priority="1"/></network>)");
        CHECK(net.edge("ab").speed_limit == 13.89);
    }
    SUBCASE("unknown attribute names the element and attribute") {
        try {
            parse_network_file(R"(<network><node id="A" kind="plain" lanes="2"/></network>)");
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SchemaViolation);
            CHECK(e.subject() == "node@lanes");
        }
    }
    SUBCASE("missing attribute") {
        CHECK(code_of([] { parse_network_file(R"(<network><node id="A"/></network>)"); }) == ErrorCode::SchemaViolation);
    }
    SUBCASE("wrong root") { CHECK(code_of([] { parse_network_file("<routes/>"); }) == ErrorCode::SchemaViolation); }
    SUBCASE("malformed xml") { CHECK(code_of([] { parse_network_file("<network>"); }) == ErrorCode::MalformedXml); }
    SUBCASE("shipped reference network has the delivery edges") {
        const auto net = reference_net();
        for (const char* id : {"c1", "c2", "univ_side", "c4", "dornach_side", "c6"}) CHECK(net.edge_index(id));
    }
}

TEST_CASE("route file examples") {
    SUBCASE("scenario I: one double truck with two stops") {
        const auto r = parse_routes_file(read_file(testing::data_path("scenario_I.rou.xml")));
        REQUIRE(r.vehicles.size() == 1);
        CHECK(r.vehicles[0].vtype == "truck_double");
        CHECK(r.vehicles[0].stops.size() == 2);
    }
    SUBCASE("scenario II: two trucks with one stop each") {
        const auto r = parse_routes_file(read_file(testing::data_path("scenario_II.rou.xml")));
        REQUIRE(r.vehicles.size() == 2);
        for (const auto& v : r.vehicles) CHECK(v.stops.size() == 1);
    }
    SUBCASE("negative depart") {
        CHECK(code_of([] {
                  parse_routes_file(R"(<routes><vehicle id="v" type="t" route="r" depart="-1"/></routes>)");
              }) == ErrorCode::NegativeDepart);
    }
    SUBCASE("unknown vehicle class") {
        CHECK(code_of([] {
                  parse_routes_file(R"(<routes><vType id="t" vClass="bus" maxSpeed="15" minSpeed="5" accel="1" )"
                                    R"(decel="4" length="12" minGap="2.5" sigma="0" emissionClass="x"/></routes>)");
              }) == ErrorCode::UnknownVClass);
    }
    SUBCASE("stop dwell defaults to 90 s") {
        const auto r = parse_routes_file(
            R"(<routes><vehicle id="v" type="t" route="r" depart="0"><stop containerStop="cs"/></vehicle></routes>)");
        CHECK(r.vehicles.at(0).stops.at(0).dwell == 90.0);
    }
}

TEST_CASE("additional file examples") {
    const auto net = reference_net();
    SUBCASE("shipped detectors all run at 50 s") {
        const auto a = parse_additional_file(read_file(testing::data_path("linz_reference.add.xml")), net);
        REQUIRE_FALSE(a.detectors.empty());
        for (const auto& d : a.detectors) CHECK(d.freq == 50.0);
        CHECK(a.container_stops.size() == 2);
    }
    SUBCASE("container stop beyond the edge end") {
        CHECK(code_of([&] {
                  parse_additional_file(R"(<additional><containerStop id="s" edge="c1" startPos="290" endPos="301"/>)"
                                        R"(</additional>)",
                                        net);
              }) == ErrorCode::PosOutOfRange);
    }
    SUBCASE("zero detectors") {
        const auto a = parse_additional_file("<additional/>", net);
        CHECK(a.detectors.empty());
        CHECK(a.container_stops.empty());
    }
}

TEST_CASE("detector output") {
    SUBCASE("empty list writes the root only") { CHECK(write_detector_output({}) == "<detector/>\n"); }
    SUBCASE("one interval keeps its attributes verbatim") {
        const std::vector<DetectorInterval> one = {{"det", 0.0, 50.0, 1, 13.5, 2655.25, 1.5}};
        const auto text = write_detector_output(one);
        CHECK(text ==
              "<detector>\n    <interval begin=\"0\" end=\"50\" id=\"det\" nVehContrib=\"1\" meanSpeed=\"13.5\" "
              "co2_mg=\"2655.25\" fuel_ml=\"1.5\"/>\n</detector>\n");
        CHECK(parse_detector_output(text) == one);
    }
    SUBCASE("unsorted input is rejected") {
        const std::vector<DetectorInterval> bad = {{"b", 0, 50, 0, -1, 0, 0}, {"a", 0, 50, 0, -1, 0, 0}};
        CHECK(code_of([&] { write_detector_output(bad); }) == ErrorCode::UnsortedIntervals);
    }
    SUBCASE("randomised intervals round-trip") {
        testing::Gen g(5);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<DetectorInterval> xs;
            const int dets = g.integer(1, 3);
            for (int d = 0; d < dets; ++d) {
                const std::string id = "d" + std::to_string(d) + g.ident("_");
                double begin = 0.0;
                const int n = g.integer(1, 4);
                for (int k = 0; k < n; ++k) {
                    const double end = begin + g.awkward(0.5, 100.0);
                    const auto veh = static_cast<std::int64_t>(g.index(5));
                    xs.push_back({id, begin, end, veh, veh ? g.awkward(0.0, 30.0) : -1.0, g.awkward(0.0, 1e5),
                                  g.awkward(0.0, 50.0)});
                    begin = end;
                }
            }
            CHECK(parse_detector_output(write_detector_output(xs)) == xs);
        }
    }
}

TEST_CASE("parse(write(x)) == x for 1000 random files of each kind") {
    testing::Gen g(20240601);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto net = testing::random_network(g);
        const auto net_text = write_network_file(net);
        const auto net_back = parse_network_file(net_text);
        REQUIRE(net_back == net);
        CHECK(write_network_file(net_back) == net_text);

        const auto routes = testing::random_routes(g);
        REQUIRE(parse_routes_file(write_routes_file(routes)) == routes);

        const auto additional = testing::random_additional(g, net);
        REQUIRE(parse_additional_file(write_additional_file(additional), net) == additional);
    }
}

TEST_CASE("parsers return structured errors on arbitrary bytes") {
    testing::Gen g(77);
    const std::array<std::string, 3> seeds = {read_file(testing::data_path("linz_reference.net.xml")),
                                              read_file(testing::data_path("scenario_I.rou.xml")),
                                              read_file(testing::data_path("linz_reference.add.xml"))};
    const auto net = reference_net();
    auto attempt = [&](const std::string& bytes) {
        for (int kind = 0; kind < 4; ++kind) {
            try {
                switch (kind) {
                case 0: parse_network_file(bytes); break;
                case 1: parse_routes_file(bytes); break;
                case 2: parse_additional_file(bytes, net); break;
                default: parse_detector_output(bytes); break;
                }
            } catch (const Error&) {
                // structured rejection
            }
        }
    };

    for (int trial = 0; trial < 3000; ++trial) {
        std::string bytes;
        if (trial % 3 == 0) {
            const int n = g.integer(0, 200);
            for (int i = 0; i < n; ++i) bytes.push_back(static_cast<char>(g.bits() & 0xFF));
        } else {
            bytes = seeds[g.index(seeds.size())];
            const int edits = g.integer(1, 8);
            for (int e = 0; e < edits && !bytes.empty(); ++e) {
                const std::size_t at = g.index(bytes.size());
                switch (g.index(4)) {
                case 0: bytes[at] = static_cast<char>(g.bits() & 0xFF); break;
                case 1: bytes.erase(at, g.index(16) + 1); break;
                case 2: bytes.insert(at, 1, "<>\"&=/ '\0"[g.index(9)]); break;
                default: bytes.resize(at); break;
                }
            }
        }
        CHECK_NOTHROW(attempt(bytes));
    }
}

TEST_CASE("library PRNG matches the reference xoshiro256** stream") {
    std::uint64_t x = 0;
    CHECK(RefXoshiro::splitmix(x) == 0xe220a8397b1dcdafULL);
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
        Xoshiro256 lib(seed);
        RefXoshiro ref(seed);
        for (int i = 0; i < 1000; ++i) REQUIRE(lib.next() == ref.next());
    }
}

TEST_CASE("generate_route_file") {
    const auto net = reference_net();
    auto count_vehicles = [](const std::string& text) { return parse_routes_file(text).vehicles.size(); };

    SUBCASE("zero probabilities") { CHECK(count_vehicles(generate_route_file({100, 0.0, 0.0, 1, {}}, net)) == 0); }

    SUBCASE("certain single trucks") {
        const auto r = parse_routes_file(generate_route_file({5, 1.0, 0.0, 9, {}}, net));
        REQUIRE(r.vehicles.size() == 5);
        for (int i = 0; i < 5; ++i) {
            CHECK(r.vehicles[static_cast<std::size_t>(i)].id == std::to_string(i));
            CHECK(r.vehicles[static_cast<std::size_t>(i)].depart == i);
            CHECK(r.vehicles[static_cast<std::size_t>(i)].vtype == "truck_single");
        }
    }

    SUBCASE("seeded counts match a replay of the generator stream") {
        const std::uint64_t seed = 2024;
        const auto r = parse_routes_file(generate_route_file({1000, 0.5, 0.5, seed, {}}, net));
        RefXoshiro replay(seed);
        std::vector<std::pair<std::string, double>> expected;
        for (int step = 0; step < 1000; ++step) {
            const double u_single = replay.unit();
            const double u_double = replay.unit();
            if (u_single < 0.5) expected.emplace_back("truck_single", step);
            if (u_double < 0.5) expected.emplace_back("truck_double", step);
        }
        REQUIRE(r.vehicles.size() == expected.size());
        CHECK(r.vehicles.size() >= 900);
        CHECK(r.vehicles.size() <= 1100);
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(r.vehicles[i].vtype == expected[i].first);
            CHECK(r.vehicles[i].depart == expected[i].second);
            CHECK(r.vehicles[i].id == std::to_string(i));
        }
    }

    SUBCASE("same seed gives the same bytes, different seeds differ") {
        const auto a = generate_route_file({200, 0.3, 0.2, 7, {}}, net);
        CHECK(a == generate_route_file({200, 0.3, 0.2, 7, {}}, net));
        CHECK(a != generate_route_file({200, 0.3, 0.2, 8, {}}, net));
    }

    SUBCASE("default route runs from the first to the last edge") {
        const auto r = parse_routes_file(generate_route_file({1, 1.0, 0.0, 0, {}}, net));
        REQUIRE(r.routes.size() == 1);
        CHECK(r.routes[0].edges.front() == net.edge_at(0).id);
        CHECK(r.routes[0].edges.back() == net.edges().back().id);
        net::validate_route(net, r.routes[0]);
    }

    SUBCASE("bad probabilities") {
        CHECK(code_of([&] { generate_route_file({1, 1.5, 0.0, 0, {}}, net); }) == ErrorCode::InvalidProbability);
        CHECK(code_of([&] { generate_route_file({1, 0.0, -0.1, 0, {}}, net); }) == ErrorCode::InvalidProbability);
    }
}

TEST_CASE("number text") {
    CHECK(parse_number("13.89") == 13.89);
    CHECK(parse_number("+2") == 2.0);
    CHECK_FALSE(parse_number("+-2"));
    CHECK_FALSE(parse_number("1e999"));
    CHECK_FALSE(parse_number("nan"));
    CHECK_FALSE(parse_number("1.0x"));
    CHECK(format_number(-0.0) == "0");
    testing::Gen g(1);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::ldexp(g.uniform(-1.0, 1.0), g.integer(-60, 60));
        CHECK(parse_number(format_number(v)) == v);
    }
}
