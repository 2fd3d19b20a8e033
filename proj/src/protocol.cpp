#include "cascade/protocol.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <unordered_map>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "cascade/error.hpp"

namespace cascade::protocol {

using nlohmann::json;

namespace {

std::string dump(const json& j)
{
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

json parse_object(std::string_view line, const char* what)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProtocolError, std::string("malformed ") + what + ": " + e.what());
    }
    if (!j.is_object()) {
        throw Error(ErrorCode::ProtocolError, std::string(what) + " is not a JSON object");
    }
    return j;
}

std::string string_field(const json& j, const char* key, const char* what)
{
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw Error(ErrorCode::ProtocolError, std::string(what) + " lacks string field '" + key + "'");
    }
    return it->get<std::string>();
}

std::int64_t id_field(const json& j, const char* what)
{
    auto it = j.find("id");
    if (it == j.end() || !it->is_number_integer()) {
        throw Error(ErrorCode::ProtocolError, std::string(what) + " lacks an integer id");
    }
    return it->get<std::int64_t>();
}

int remaining_ms(Clock::time_point deadline)
{
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

void set_nonblocking(int fd)
{
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

class TcpChannel final : public Channel {
  public:
    explicit TcpChannel(int fd) : Channel(fd, fd) {}
    ~TcpChannel() override { ::close(read_fd_); }

    static std::unique_ptr<Channel> open(const Endpoint& ep, std::chrono::milliseconds timeout)
    {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* found = nullptr;
        auto port = std::to_string(ep.port);
        if (int rc = getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
            throw Error(ErrorCode::IoError, "cannot resolve " + ep.host + ": " + gai_strerror(rc));
        }
        std::string last_error = "no address";
        int fd = -1;
        auto deadline = Clock::now() + timeout;
        for (auto* ai = found; ai != nullptr && fd < 0; ai = ai->ai_next) {
            int s = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
            if (s < 0) {
                last_error = std::strerror(errno);
                continue;
            }
            set_nonblocking(s);
            int rc = ::connect(s, ai->ai_addr, ai->ai_addrlen);
            if (rc != 0 && errno == EINPROGRESS) {
                pollfd p{s, POLLOUT, 0};
                if (::poll(&p, 1, remaining_ms(deadline)) == 1) {
                    int err = 0;
                    socklen_t len = sizeof(err);
                    getsockopt(s, SOL_SOCKET, SO_ERROR, &err, &len);
                    rc = err == 0 ? 0 : -1;
                    errno = err;
                } else {
                    errno = ETIMEDOUT;
                }
            }
            if (rc == 0) {
                fd = s;
            } else {
                last_error = std::strerror(errno);
                ::close(s);
            }
        }
        freeaddrinfo(found);
        if (fd < 0) {
            throw Error(ErrorCode::IoError, "cannot connect to " + ep.host + ":" + port + ": " + last_error);
        }
        std::unique_ptr<TcpChannel> channel(new TcpChannel(fd));
        channel->read_handshake(timeout);
        return channel;
    }
};

class StdioChannel final : public Channel {
  public:
    StdioChannel(int read_fd, int write_fd, pid_t child) : Channel(read_fd, write_fd), child_(child) {}

    ~StdioChannel() override
    {
        ::close(write_fd_);
        ::close(read_fd_);
        // Closing stdin asks the child to exit; give it a moment, then insist.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(child_, nullptr, WNOHANG) == child_) {
                return;
            }
            ::usleep(10'000);
        }
        ::kill(child_, SIGTERM);
        ::waitpid(child_, nullptr, 0);
    }

    static std::unique_ptr<Channel> open(const Endpoint& ep, std::chrono::milliseconds timeout)
    {
        // A dead child must surface as an IoError, not kill the process.
        std::signal(SIGPIPE, SIG_IGN);

        int to_child[2];
        int from_child[2];
        if (::pipe2(to_child, O_CLOEXEC) != 0) {
            throw Error(ErrorCode::IoError, std::string("pipe: ") + std::strerror(errno));
        }
        if (::pipe2(from_child, O_CLOEXEC) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw Error(ErrorCode::IoError, std::string("pipe: ") + std::strerror(errno));
        }
        pid_t pid = ::fork();
        if (pid < 0) {
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
                ::close(fd);
            }
            throw Error(ErrorCode::IoError, std::string("fork: ") + std::strerror(errno));
        }
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", ep.command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        std::unique_ptr<StdioChannel> channel(new StdioChannel(from_child[0], to_child[1], pid));
        channel->read_handshake(timeout);
        return channel;
    }

  private:
    pid_t child_;
};

}  // namespace

std::string encode_request(const Request& request)
{
    json j = {{"id", request.id},
              {"kind", request.kind == Kind::Mono ? "mono" : "duo"},
              {"query", request.query},
              {"doc", request.doc}};
    if (request.kind == Kind::Duo) {
        j["doc_b"] = request.doc_b;
    }
    return dump(j);
}

std::string encode_response(const Response& response)
{
    return dump(json{{"id", response.id}, {"score", response.score}});
}

std::string encode_error(std::string_view message)
{
    return dump(json{{"id", nullptr}, {"error", std::string(message)}});
}

std::string encode_handshake(std::string_view tag)
{
    return dump(json{{"ready", true}, {"tag", std::string(tag)}});
}

Request decode_request(std::string_view line)
{
    auto j = parse_object(line, "request");
    Request r;
    r.id = id_field(j, "request");
    auto kind = string_field(j, "kind", "request");
    if (kind == "mono") {
        r.kind = Kind::Mono;
    } else if (kind == "duo") {
        r.kind = Kind::Duo;
        r.doc_b = string_field(j, "doc_b", "duo request");
    } else {
        throw Error(ErrorCode::ProtocolError, "unknown request kind '" + kind + "'");
    }
    r.query = string_field(j, "query", "request");
    r.doc = string_field(j, "doc", "request");
    return r;
}

Response decode_response(std::string_view line)
{
    auto j = parse_object(line, "response");
    if (auto err = j.find("error"); err != j.end()) {
        throw Error(ErrorCode::ProtocolError, "scorer reported an error: " + (err->is_string() ? err->get<std::string>() : err->dump()));
    }
    Response r;
    r.id = id_field(j, "response");
    auto score = j.find("score");
    if (score == j.end() || !score->is_number()) {
        throw Error(ErrorCode::ProtocolError, "response " + std::to_string(r.id) + " lacks a numeric score");
    }
    r.score = score->get<double>();
    if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
        throw Error(ErrorCode::ProtocolError, "response " + std::to_string(r.id) + " score outside [0,1]");
    }
    return r;
}

std::string decode_handshake(std::string_view line)
{
    auto j = parse_object(line, "handshake");
    auto ready = j.find("ready");
    if (ready == j.end() || !ready->is_boolean() || !ready->get<bool>()) {
        throw Error(ErrorCode::ProtocolError, "handshake without \"ready\": true");
    }
    auto tag = j.find("tag");
    return tag != j.end() && tag->is_string() ? tag->get<std::string>() : std::string();
}

Endpoint parse_endpoint(std::string_view address)
{
    Endpoint ep;
    if (address.rfind("stdio:", 0) == 0) {
        ep.transport = Endpoint::Transport::Stdio;
        ep.command = std::string(address.substr(6));
        if (ep.command.empty()) {
            throw Error(ErrorCode::ConfigError, "stdio endpoint needs a command");
        }
        return ep;
    }
    if (address.rfind("tcp:", 0) == 0) {
        auto rest = address.substr(4);
        auto colon = rest.rfind(':');
        if (colon == std::string_view::npos || colon == 0) {
            throw Error(ErrorCode::ConfigError, "tcp endpoint must be tcp:HOST:PORT");
        }
        ep.host = std::string(rest.substr(0, colon));
        if (ep.host.size() > 2 && ep.host.front() == '[' && ep.host.back() == ']') {
            ep.host = ep.host.substr(1, ep.host.size() - 2);
        }
        auto port = rest.substr(colon + 1);
        unsigned long value = 0;
        try {
            std::size_t used = 0;
            value = std::stoul(std::string(port), &used);
            if (used != port.size()) {
                value = 0;
            }
        } catch (const std::logic_error&) {
            value = 0;
        }
        if (value == 0 || value > 65535) {
            throw Error(ErrorCode::ConfigError, "bad tcp port in endpoint '" + std::string(address) + "'");
        }
        ep.port = static_cast<std::uint16_t>(value);
        return ep;
    }
    throw Error(ErrorCode::ConfigError, "endpoint must start with tcp: or stdio: (got '" + std::string(address) + "')");
}

std::optional<std::string> Channel::next_line(Clock::time_point deadline)
{
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            return line;
        }
        pollfd p{read_fd_, POLLIN, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc == 0) {
            return std::nullopt;
        }
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(ErrorCode::IoError, std::string("poll: ") + std::strerror(errno));
        }
        char chunk[65536];
        ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
        if (n < 0 && (errno == EAGAIN || errno == EINTR)) {
            continue;
        }
        if (n <= 0) {
            throw Error(ErrorCode::IoError, "scorer closed the connection");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void Channel::read_handshake(std::chrono::milliseconds timeout)
{
    auto line = next_line(Clock::now() + timeout);
    if (!line) {
        throw Error(ErrorCode::Timeout, "no handshake from scorer within " + std::to_string(timeout.count()) + " ms");
    }
    tag_ = decode_handshake(*line);
}

std::vector<Response> Channel::exchange(std::span<const Request> requests, std::chrono::milliseconds timeout)
{
    std::unordered_map<std::int64_t, std::size_t> slot;
    std::string outgoing;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (!slot.emplace(requests[i].id, i).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate request id " + std::to_string(requests[i].id));
        }
        outgoing += encode_request(requests[i]);
        outgoing += '\n';
    }

    std::vector<Response> responses(requests.size());
    std::vector<char> answered(requests.size(), 0);
    std::size_t outstanding = requests.size();
    std::size_t written = 0;
    auto deadline = Clock::now() + timeout;
    set_nonblocking(write_fd_);
    set_nonblocking(read_fd_);

    auto take_line = [&](std::string line) {
        if (line.empty()) {
            return;
        }
        auto r = decode_response(line);
        auto it = slot.find(r.id);
        if (it == slot.end()) {
            throw Error(ErrorCode::ProtocolError, "response for unknown id " + std::to_string(r.id));
        }
        if (answered[it->second]) {
            throw Error(ErrorCode::ProtocolError, "second response for id " + std::to_string(r.id));
        }
        answered[it->second] = 1;
        responses[it->second] = r;
        --outstanding;
    };

    while (outstanding > 0) {
        for (auto nl = buffer_.find('\n'); outstanding > 0 && nl != std::string::npos; nl = buffer_.find('\n')) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            take_line(std::move(line));
        }
        if (outstanding == 0) {
            break;
        }

        pollfd fds[2] = {{read_fd_, POLLIN, 0}, {write_fd_, POLLOUT, 0}};
        nfds_t count = 1;
        if (written < outgoing.size()) {
            if (write_fd_ == read_fd_) {
                fds[0].events |= POLLOUT;
            } else {
                count = 2;
            }
        }
        int rc = ::poll(fds, count, remaining_ms(deadline));
        if (rc == 0) {
            throw Error(ErrorCode::Timeout, std::to_string(outstanding) + " of " + std::to_string(requests.size()) +
                                                " requests unanswered after " + std::to_string(timeout.count()) + " ms");
        }
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw Error(ErrorCode::IoError, std::string("poll: ") + std::strerror(errno));
        }

        bool can_write = (count == 2 ? fds[1].revents : fds[0].revents) & (POLLOUT | POLLERR | POLLHUP);
        if (written < outgoing.size() && can_write) {
            ssize_t n = write_fd_ == read_fd_
                            ? ::send(write_fd_, outgoing.data() + written, outgoing.size() - written, MSG_NOSIGNAL)
                            : ::write(write_fd_, outgoing.data() + written, outgoing.size() - written);
            if (n < 0 && errno != EAGAIN && errno != EINTR) {
                throw Error(ErrorCode::IoError, std::string("write to scorer: ") + std::strerror(errno));
            }
            if (n > 0) {
                written += static_cast<std::size_t>(n);
            }
        }
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            char chunk[65536];
            ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
            if (n < 0 && (errno == EAGAIN || errno == EINTR)) {
                continue;
            }
            if (n <= 0) {
                throw Error(ErrorCode::IoError, "scorer closed the connection with " + std::to_string(outstanding) + " of " +
                                                    std::to_string(requests.size()) + " requests unanswered");
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }
    return responses;
}

std::unique_ptr<Channel> connect(const Endpoint& endpoint, std::chrono::milliseconds timeout)
{
    if (endpoint.transport == Endpoint::Transport::Tcp) {
        return TcpChannel::open(endpoint, timeout);
    }
    return StdioChannel::open(endpoint, timeout);
}

}  // namespace cascade::protocol
