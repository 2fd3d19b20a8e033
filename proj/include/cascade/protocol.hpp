#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cascade::protocol {

// Newline-delimited JSON, one message per line:
//   handshake  {"ready": true, "tag": text}                    (server, once)
//   request    {"id": int, "kind": "mono"|"duo", "query": text, "doc": text[, "doc_b": text]}
//   response   {"id": int, "score": real in [0,1]}
//   error      {"id": null, "error": text}
// Responses may arrive in any order and are matched by id.

enum class Kind { Mono, Duo };

struct Request {
    std::int64_t id = 0;
    Kind kind = Kind::Mono;
    std::string query;
    std::string doc;
    std::string doc_b;  // duo only

    friend bool operator==(const Request&, const Request&) = default;
};

struct Response {
    std::int64_t id = 0;
    double score = 0.0;

    friend bool operator==(const Response&, const Response&) = default;
};

std::string encode_request(const Request& request);
std::string encode_response(const Response& response);
std::string encode_error(std::string_view message);
std::string encode_handshake(std::string_view tag);

/// Throws ProtocolError on anything that is not a well-formed request.
Request decode_request(std::string_view line);

/// Throws ProtocolError on malformed JSON, a missing or null id, an error
/// message, or a score outside [0, 1].
Response decode_response(std::string_view line);

/// Returns the server tag. Throws ProtocolError unless the line is a handshake.
std::string decode_handshake(std::string_view line);

/// "tcp:HOST:PORT" or "stdio:COMMAND" (COMMAND runs under /bin/sh -c).
struct Endpoint {
    enum class Transport { Tcp, Stdio };
    Transport transport = Transport::Tcp;
    std::string host;
    std::uint16_t port = 0;
    std::string command;
};

/// Throws ConfigError on an unrecognised address.
Endpoint parse_endpoint(std::string_view address);

using Clock = std::chrono::steady_clock;

/// A connected scorer: either a TCP socket or a child process wired through
/// pipes. The handshake has been consumed by the time connect() returns.
class Channel {
  public:
    virtual ~Channel() = default;

    const std::string& tag() const { return tag_; }

    /// Sends every request and waits until each id has been answered or the
    /// timeout elapses. Responses are returned in request order.
    /// Throws Timeout (with the number still outstanding), ProtocolError, or
    /// IoError if the peer disappears.
    std::vector<Response> exchange(std::span<const Request> requests, std::chrono::milliseconds timeout);

  protected:
    Channel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

    void read_handshake(std::chrono::milliseconds timeout);

    int read_fd_ = -1;
    int write_fd_ = -1;

  private:
    std::optional<std::string> next_line(Clock::time_point deadline);

    std::string buffer_;
    std::string tag_;
};

/// Throws IoError if the endpoint cannot be reached or started, Timeout or
/// ProtocolError if the handshake is late or malformed.
std::unique_ptr<Channel> connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

}  // namespace cascade::protocol
