#include "core/control_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>

#include "json.hpp"

#include "core/error.hpp"

namespace bundlesim::server {

using Json = nlohmann::ordered_json;

std::string encode_frame(std::string_view payload) {
    if (payload.size() > kMaxPayload) {
        throw Error(ErrorCode::InvalidValue, "frame", "payload exceeds " + std::to_string(kMaxPayload) + " bytes");
    }
    const auto n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(4 + payload.size());
    out.push_back(static_cast<char>((n >> 24) & 0xFF));
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
    out.append(payload);
    return out;
}

void FrameDecoder::feed(std::string_view bytes) {
    if (overflowed_) return;
    if (pos_ > 0 && pos_ == buffer_.size()) {
        buffer_.clear();
        pos_ = 0;
    }
    buffer_.append(bytes);
}

FrameDecoder::Status FrameDecoder::next(std::string& payload) {
    if (overflowed_) return Status::overflow;
    if (buffer_.size() - pos_ < 4) return Status::need_more;
    const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data() + pos_);
    const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
                            std::uint32_t{p[3]};
    if (n > kMaxPayload) {
        overflowed_ = true;
        buffer_.clear();
        pos_ = 0;
        return Status::overflow;
    }
    if (buffer_.size() - pos_ - 4 < n) return Status::need_more;
    payload.assign(buffer_, pos_ + 4, n);
    pos_ += 4 + n;
    if (pos_ > (1u << 20) && pos_ * 2 > buffer_.size()) {
        buffer_.erase(0, pos_);
        pos_ = 0;
    }
    return Status::frame;
}

std::string error_payload(std::optional<std::int64_t> id, std::string_view code, std::string_view message) {
    Json j;
    j["id"] = id ? Json(*id) : Json(nullptr);
    j["error"] = {{"code", code}, {"message", message}};
    return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

namespace {

/// Client-side mistake reported with a protocol-level code.
struct CommandError {
    std::string code;
    std::string message;
};

[[noreturn]] void bad_args(const std::string& message) { throw CommandError{"BadArgs", message}; }

const Json& require(const Json& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end()) bad_args(std::string("missing '") + key + "'");
    return *it;
}

std::string require_string(const Json& args, const char* key) {
    const Json& v = require(args, key);
    if (!v.is_string()) bad_args(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

double optional_number(const Json& args, const char* key, double fallback) {
    auto it = args.find(key);
    if (it == args.end()) return fallback;
    if (!it->is_number()) bad_args(std::string("'") + key + "' must be a number");
    return it->get<double>();
}

Json interval_json(const io::DetectorInterval& iv) {
    return Json{{"id", iv.id},          {"begin", iv.begin},         {"end", iv.end},
                {"nVehContrib", iv.n_veh}, {"meanSpeed", iv.mean_speed}, {"co2_mg", iv.co2_mg},
                {"fuel_ml", iv.fuel_ml}};
}

io::VehicleSpec parse_vehicle(const Json& spec, std::optional<net::Route>& new_route) {
    if (!spec.is_object()) bad_args("'spec' must be an object");
    io::VehicleSpec v;
    v.id = require_string(spec, "id");
    v.vtype = require_string(spec, "type");
    v.depart = optional_number(spec, "depart", 0.0);
    if (auto it = spec.find("edges"); it != spec.end()) {
        if (!it->is_array() || it->empty()) bad_args("'edges' must be a non-empty array");
        net::Route r;
        r.id = spec.contains("route") ? require_string(spec, "route") : "route_" + v.id;
        for (const auto& e : *it) {
            if (!e.is_string()) bad_args("'edges' entries must be strings");
            r.edges.push_back(e.get<std::string>());
        }
        v.route = r.id;
        new_route = std::move(r);
    } else {
        v.route = require_string(spec, "route");
    }
    if (auto it = spec.find("stops"); it != spec.end()) {
        if (!it->is_array()) bad_args("'stops' must be an array");
        for (const auto& s : *it) {
            if (!s.is_object()) bad_args("'stops' entries must be objects");
            v.stops.push_back({require_string(s, "containerStop"), optional_number(s, "duration", io::kDefaultDwell)});
        }
    }
    return v;
}

}  // namespace

Session::Session(const ScenarioPaths& preload, engine::SimulationConfig config) { load(preload, config); }

void Session::load(const ScenarioPaths& paths, engine::SimulationConfig config) {
    auto inputs = engine::read_scenario_files(paths.net, paths.routes, paths.additional, paths.emissions);
    world_ = std::make_unique<engine::World>(engine::World::load(std::move(inputs), config));
}

std::string Session::handle(std::string_view payload) {
    std::optional<std::int64_t> id;
    Json request;
    try {
        request = Json::parse(payload);
    } catch (const Json::exception& e) {
        return error_payload(id, "MalformedJson", e.what());
    }
    if (!request.is_object()) return error_payload(id, "BadRequest", "payload must be a JSON object");
    if (auto it = request.find("id"); it != request.end() && !it->is_null()) {
        if (!it->is_number_integer() ||
            (it->is_number_unsigned() && it->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))) {
            return error_payload(id, "BadRequest", "'id' must be a 64-bit signed integer");
        }
        id = it->get<std::int64_t>();
    }
    auto cmd_it = request.find("cmd");
    if (cmd_it == request.end() || !cmd_it->is_string()) return error_payload(id, "BadRequest", "'cmd' must be a string");
    const std::string cmd = cmd_it->get<std::string>();
    Json args = Json::object();
    if (auto it = request.find("args"); it != request.end() && !it->is_null()) {
        if (!it->is_object()) return error_payload(id, "BadArgs", "'args' must be an object");
        args = *it;
    }

    auto need_world = [&]() -> engine::World& {
        if (!world_) throw CommandError{"NoWorldLoaded", "no scenario loaded"};
        return *world_;
    };

    try {
        Json result;
        if (cmd == "load") {
            ScenarioPaths paths{require_string(args, "net"), require_string(args, "routes"),
                                require_string(args, "additional"), require_string(args, "emissions")};
            engine::SimulationConfig config;
            config.dt = optional_number(args, "dt", config.dt);
            config.t_max = optional_number(args, "t_max", config.t_max);
            if (!(config.dt > 0.0)) bad_args("'dt' must be positive");
            if (auto it = args.find("seed"); it != args.end()) {
                if (!it->is_number_unsigned()) bad_args("'seed' must be a non-negative integer");
                config.seed = it->get<std::uint64_t>();
            }
            load(paths, config);
            result = "ok";
        } else if (cmd == "step") {
            auto& world = need_world();
            std::int64_t n = 1;
            if (auto it = args.find("n"); it != args.end()) {
                if (!it->is_number_integer()) bad_args("'n' must be an integer");
                n = it->get<std::int64_t>();
                if (n < 0 || n > 1'000'000) bad_args("'n' out of range");
            }
            for (std::int64_t i = 0; i < n; ++i) world.step();
            result = world.time();
        } else if (cmd == "getTime") {
            result = need_world().time();
        } else if (cmd == "getMinExpectedNumber") {
            result = need_world().min_expected_number();
        } else if (cmd == "inductionloop.getIDList") {
            result = need_world().detector_ids();
        } else if (cmd == "inductionloop.getIntervals") {
            auto& world = need_world();
            const std::string det = require_string(args, "id");
            auto intervals = world.detector_intervals(det);
            if (!intervals) throw CommandError{"UnknownDetector", det};
            result = Json::array();
            for (const auto& iv : *intervals) result.push_back(interval_json(iv));
        } else if (cmd == "vehicle.add") {
            auto& world = need_world();
            std::optional<net::Route> route;
            auto spec = parse_vehicle(require(args, "spec"), route);
            world.add_vehicle(spec, std::move(route));
            result = "ok";
        } else if (cmd == "getAccounts") {
            result = Json::parse(engine::accounts_json(need_world().result()));
        } else if (cmd == "close") {
            closed_ = true;
            result = "ok";
        } else {
            return error_payload(id, "UnknownCommand", cmd);
        }
        Json response;
        response["id"] = id ? Json(*id) : Json(nullptr);
        response["result"] = std::move(result);
        return response.dump(-1, ' ', false, Json::error_handler_t::replace);
    } catch (const CommandError& e) {
        return error_payload(id, e.code, e.message);
    } catch (const Error& e) {
        return error_payload(id, to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_payload(id, "Internal", e.what());
    }
}

Server::Server(std::uint16_t port, std::optional<ScenarioPaths> preload, bool any_address)
    : preload_(std::move(preload)) {
    if (preload_) Session probe(*preload_);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::Io, "socket", std::strerror(errno));
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(any_address ? INADDR_ANY : INADDR_LOOPBACK);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        throw Error(ErrorCode::Io, "port " + std::to_string(port), why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Server::~Server() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::stop() { stopping_ = true; }

namespace {

constexpr int kPollMs = 50;

bool send_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
        const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

}  // namespace

void Server::serve(bool single_session) {
    while (!stopping_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, kPollMs);
        if (ready <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        run_session(fd);
        ::close(fd);
        if (single_session) return;
    }
}

void Server::run_session(int fd) {
    std::unique_ptr<Session> session;
    try {
        session = preload_ ? std::make_unique<Session>(*preload_) : std::make_unique<Session>();
    } catch (const std::exception& e) {
        send_all(fd, encode_frame(error_payload(std::nullopt, "LoadFailed", e.what())));
        return;
    }

    FrameDecoder decoder;
    char buf[64 * 1024];
    std::string payload;
    while (!stopping_) {
        pollfd pfd{fd, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, kPollMs);
        if (ready < 0 && errno != EINTR) return;
        if (ready <= 0) continue;
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            if (decoder.pending() > 0) {
                send_all(fd, encode_frame(error_payload(std::nullopt, "TruncatedFrame", "stream ended inside a frame")));
            }
            return;
        }
        decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        for (;;) {
            const auto status = decoder.next(payload);
            if (status == FrameDecoder::Status::need_more) break;
            if (status == FrameDecoder::Status::overflow) {
                send_all(fd, encode_frame(error_payload(std::nullopt, "FrameTooLarge",
                                                        "payload length exceeds " + std::to_string(kMaxPayload))));
                return;
            }
            if (!send_all(fd, encode_frame(session->handle(payload)))) return;
            if (session->closed()) return;
        }
    }
}

}  // namespace bundlesim::server
