// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/model_client.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

#include "json.hpp"
#include "vulnrisk/error.hpp"
#include "vulnrisk/text.hpp"

extern char** environ;

namespace vulnrisk::impute {
namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

[[noreturn]] void timeout(const std::string& what) { throw Error(ErrorCode::Timeout, what); }

// Reads and writes over a pair of non-blocking file descriptors.
class FdChannel : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd, pid_t child = -1) : read_fd_(read_fd), write_fd_(write_fd), child_(child) {
        for (int fd : {read_fd_, write_fd_}) ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
    }
    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;
    ~FdChannel() override {
        if (write_fd_ != read_fd_) ::close(write_fd_);
        ::close(read_fd_);
        if (child_ > 0) {
            // Closing stdin asks the server to exit; give it a moment, then kill.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(child_, nullptr, WNOHANG) == child_) return;
                std::this_thread::sleep_for(std::chrono::milliseconds(10));
            }
            ::kill(child_, SIGKILL);
            ::waitpid(child_, nullptr, 0);
        }
    }

    void write_line(std::string_view line, Clock::time_point deadline) override {
        std::string data(line);
        data.push_back('\n');
        std::size_t sent = 0;
        while (sent < data.size()) {
            pollfd pfd{write_fd_, POLLOUT, 0};
            const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
            if (ready == 0) timeout("model server did not accept the request in time");
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::Protocol, std::string("poll failed: ") + std::strerror(errno));
            }
            const auto n = send_or_write(write_fd_, data.data() + sent, data.size() - sent);
            if (n < 0) {
                if (errno == EAGAIN || errno == EINTR) continue;
                throw Error(ErrorCode::Protocol, std::string("write to model server failed: ") + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(Clock::time_point deadline) override {
        while (true) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                auto line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            pollfd pfd{read_fd_, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
            if (ready == 0) timeout("model server did not answer before the deadline");
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::Protocol, std::string("poll failed: ") + std::strerror(errno));
            }
            char chunk[4096];
            const auto n = ::read(read_fd_, chunk, sizeof chunk);
            if (n == 0) throw Error(ErrorCode::Protocol, "model server closed the connection");
            if (n < 0) {
                if (errno == EAGAIN || errno == EINTR) continue;
                throw Error(ErrorCode::Protocol, std::string("read from model server failed: ") + std::strerror(errno));
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    static ssize_t send_or_write(int fd, const char* data, std::size_t size) {
        // MSG_NOSIGNAL avoids SIGPIPE on sockets; pipes fall back to write().
        const auto n = ::send(fd, data, size, MSG_NOSIGNAL);
        if (n < 0 && errno == ENOTSOCK) return ::write(fd, data, size);
        return n;
    }

    int read_fd_;
    int write_fd_;
    pid_t child_;
    std::string buffer_;
};

int try_connect_unix(const std::string& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) throw Error(ErrorCode::Config, "unix socket path too long: " + path);
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) return -1;
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return -1;
    }
    return fd;
}

int try_connect_tcp(const std::string& host, std::uint16_t port, Clock::time_point deadline) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* list = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &list) != 0) return -1;
    int result = -1;
    for (auto* ai = list; ai != nullptr && result < 0; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            result = fd;
            break;
        }
        if (errno == EINPROGRESS) {
            pollfd pfd{fd, POLLOUT, 0};
            if (::poll(&pfd, 1, remaining_ms(deadline)) == 1) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                if (err == 0) {
                    result = fd;
                    break;
                }
            }
        }
        ::close(fd);
    }
    ::freeaddrinfo(list);
    return result;
}

std::unique_ptr<LineChannel> spawn_server(const std::vector<std::string>& argv) {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(ErrorCode::Io, "pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw Error(ErrorCode::Io, "pipe failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
        ::close(to_child[1]);
        ::close(from_child[0]);
        throw Error(ErrorCode::Config, "cannot start model server '" + argv.front() + "': " + std::strerror(rc));
    }
    return std::make_unique<FdChannel>(from_child[0], to_child[1], pid);
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    Endpoint ep;
    if (text.starts_with("unix:")) {
        ep.kind = Kind::Unix;
        ep.path = std::string(text.substr(5));
        if (ep.path.empty()) throw Error(ErrorCode::Config, "empty unix socket path");
        return ep;
    }
    if (text.starts_with("tcp:")) {
        ep.kind = Kind::Tcp;
        const auto rest = text.substr(4);
        const auto colon = rest.rfind(':');
        if (colon == std::string_view::npos || colon == 0) throw Error(ErrorCode::Config, "tcp endpoint must be tcp:host:port");
        ep.host = std::string(rest.substr(0, colon));
        const auto port_text = rest.substr(colon + 1);
        unsigned value = 0;
        const auto res = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
        if (res.ec != std::errc{} || res.ptr != port_text.data() + port_text.size() || value == 0 || value > 65535) {
            throw Error(ErrorCode::Config, "bad tcp port '" + std::string(port_text) + "'");
        }
        ep.port = static_cast<std::uint16_t>(value);
        return ep;
    }
    if (text.starts_with("exec:")) {
        ep.kind = Kind::Exec;
        std::string current;
        for (char ch : text.substr(5)) {
            if (ch == ' ') {
                if (!current.empty()) ep.argv.push_back(std::move(current));
                current.clear();
            } else {
                current.push_back(ch);
            }
        }
        if (!current.empty()) ep.argv.push_back(std::move(current));
        if (ep.argv.empty()) throw Error(ErrorCode::Config, "exec endpoint needs a command");
        return ep;
    }
    throw Error(ErrorCode::Config, "unrecognized endpoint '" + std::string(text) + "' (use unix:, tcp: or exec:)");
}

std::string Endpoint::to_string() const {
    switch (kind) {
        case Kind::Unix: return "unix:" + path;
        case Kind::Tcp: return "tcp:" + host + ":" + std::to_string(port);
        case Kind::Exec: {
            std::string out = "exec:";
            for (std::size_t i = 0; i < argv.size(); ++i) out += (i ? " " : "") + argv[i];
            return out;
        }
    }
    return {};
}

std::string encode_request(const PredictRequest& request) {
    nlohmann::ordered_json doc;
    doc["id"] = request.cve_id;
    doc["description"] = request.description;
    return doc.dump();
}

Prediction decode_response(std::string_view line, const std::string& expected_id) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Protocol, std::string("response is not JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::Protocol, "response must be a JSON object");
    const auto id = doc.value("id", std::string{});
    if (doc.contains("error")) {
        throw Error(ErrorCode::Protocol, "model server error for '" + id + "': " + doc["error"].dump());
    }
    if (id != expected_id) throw Error(ErrorCode::Protocol, "response id '" + id + "' does not match request '" + expected_id + "'");
    const auto labels = doc.find("labels");
    const auto confidences = doc.find("confidences");
    if (labels == doc.end() || !labels->is_object() || confidences == doc.end() || !confidences->is_object()) {
        throw Error(ErrorCode::Protocol, "response lacks 'labels' or 'confidences' object");
    }
    Prediction out;
    out.cve_id = id;
    out.source = PredictionSource::ExternalModel;
    for (auto metric : cvss::kAllMetrics) {
        const auto key = std::string(cvss::metric_key(metric));
        const auto label_it = labels->find(key);
        const auto conf_it = confidences->find(key);
        if (label_it == labels->end() || !label_it->is_string()) throw Error(ErrorCode::Protocol, "response lacks label for " + key);
        if (conf_it == confidences->end() || !conf_it->is_number()) throw Error(ErrorCode::Protocol, "response lacks confidence for " + key);
        const auto text = label_it->get<std::string>();
        const auto label = cvss::parse_label(metric, text);
        if (!label) throw Error(ErrorCode::IllegalLabel, "'" + text + "' is not a legal " + std::string(cvss::metric_name(metric)) + " label");
        const double confidence = conf_it->get<double>();
        if (!(confidence >= 0.0 && confidence <= 1.0)) throw Error(ErrorCode::Protocol, "confidence for " + key + " outside [0, 1]");
        out.metrics[static_cast<std::size_t>(metric)] = {*label, confidence};
    }
    return out;
}

std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint, Clock::time_point deadline) {
    if (endpoint.kind == Endpoint::Kind::Exec) return spawn_server(endpoint.argv);
    // The server may still be starting: retry until the deadline.
    while (true) {
        const int fd = endpoint.kind == Endpoint::Kind::Unix ? try_connect_unix(endpoint.path)
                                                             : try_connect_tcp(endpoint.host, endpoint.port, deadline);
        if (fd >= 0) return std::make_unique<FdChannel>(fd, fd);
        if (Clock::now() >= deadline) timeout("cannot reach model server at " + endpoint.to_string());
        std::this_thread::sleep_for(std::min<Clock::duration>(std::chrono::milliseconds(25), deadline - Clock::now()));
    }
}

ExternalModelClient::ExternalModelClient(Endpoint endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

ExternalModelClient::~ExternalModelClient() = default;

LineChannel& ExternalModelClient::channel(Clock::time_point deadline) const {
    if (!channel_) channel_ = open_channel(endpoint_, deadline);
    return *channel_;
}

Prediction ExternalModelClient::predict(const std::string& cve_id, const std::string& description) const {
    const PredictRequest request{cve_id, description};
    return predict_batch(std::span(&request, 1), 1).front();
}

std::vector<Prediction> ExternalModelClient::predict_batch(std::span<const PredictRequest> requests, std::size_t) const {
    std::lock_guard lock(mutex_);
    std::vector<Prediction> out;
    out.reserve(requests.size());
    try {
        // Bounded in-flight window keeps both pipe buffers from filling up.
        constexpr std::size_t kWindow = 64;
        std::size_t sent = 0;
        while (out.size() < requests.size()) {
            const auto deadline = Clock::now() + timeout_;
            auto& ch = channel(deadline);
            while (sent < requests.size() && sent - out.size() < kWindow) ch.write_line(encode_request(requests[sent++]), deadline);
            out.push_back(decode_response(ch.read_line(deadline), requests[out.size()].cve_id));
            auto& p = out.back();
            p.low_confidence = text::tokenize(requests[out.size() - 1].description).size() < text::kLowConfidenceWordCount;
        }
    } catch (...) {
        channel_.reset();  // the stream position is unknown after a failure
        throw;
    }
    return out;
}

}  // namespace vulnrisk::impute
