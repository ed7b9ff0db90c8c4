#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "core/engine.hpp"

namespace bundlesim::server {

inline constexpr std::uint32_t kMaxPayload = 16u * 1024u * 1024u;

/// 4-byte big-endian length followed by the payload. Throws InvalidValue for
/// payloads over kMaxPayload.
std::string encode_frame(std::string_view payload);

/// Incremental splitter for the length-prefixed stream.
class FrameDecoder {
public:
    enum class Status { frame, need_more, overflow };

    void feed(std::string_view bytes);
    /// On `frame`, `payload` holds the next complete payload. `overflow` is
    /// sticky: the stream cannot be resynchronised.
    Status next(std::string& payload);
    /// Bytes buffered but not yet returned as a frame.
    std::size_t pending() const noexcept { return buffer_.size() - pos_; }

private:
    std::string buffer_;
    std::size_t pos_ = 0;
    bool overflowed_ = false;
};

struct ScenarioPaths {
    std::string net;
    std::string routes;
    std::string additional;
    std::string emissions;
};

/// `{"id":id,"error":{"code":code,"message":message}}`; a missing id is null.
std::string error_payload(std::optional<std::int64_t> id, std::string_view code, std::string_view message);

/// One client session: an optional loaded world plus the command table.
class Session {
public:
    Session() = default;
    /// Loads `preload` immediately; load errors propagate.
    explicit Session(const ScenarioPaths& preload, engine::SimulationConfig config = {});

    /// Handles one request payload and returns the response payload. Never
    /// throws on client input.
    std::string handle(std::string_view payload);

    bool closed() const noexcept { return closed_; }
    const engine::World* world() const noexcept { return world_.get(); }

private:
    void load(const ScenarioPaths& paths, engine::SimulationConfig config);

    std::unique_ptr<engine::World> world_;
    bool closed_ = false;
};

/// Blocking TCP server, one session at a time. Binds to 127.0.0.1 unless
/// `any_address` is set; port 0 picks a free port.
class Server {
public:
    Server(std::uint16_t port, std::optional<ScenarioPaths> preload, bool any_address = false);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::uint16_t port() const noexcept { return port_; }

    /// Accept loop. Returns after stop(), or after the first session when
    /// `single_session` is set.
    void serve(bool single_session = false);
    /// Safe to call from another thread.
    void stop();

private:
    void run_session(int fd);

    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::optional<ScenarioPaths> preload_;
    std::atomic<bool> stopping_{false};
};

}  // namespace bundlesim::server
