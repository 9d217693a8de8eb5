// SPDX-License-Identifier: Apache-2.0
/**
 * @file model_client.hpp
 * @brief Client for an external imputation model server.
 *
 * Wire protocol: newline-delimited UTF-8 JSON, one response per request, in
 * request order.
 *
 *   request:  {"id": "...", "description": "..."}
 *   response: {"id": "...", "labels": {"AV": ..., "AC": ..., "Au": ..., "C": ..., "I": ..., "A": ...},
 *              "confidences": {same keys: number in [0, 1]}}
 *   error:    {"id": "...", "error": "message"}
 *
 * Labels are NVD enumeration names ("NETWORK", "ADJACENT_NETWORK", ...) or the
 * single-letter vector codes; anything else is an IllegalLabel.
 *
 * Endpoints: "unix:/path/to.sock", "tcp:host:port", or "exec:command args..."
 * (the server runs as a child process speaking the protocol on stdin/stdout).
 */
#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vulnrisk/imputer.hpp"

namespace vulnrisk::impute {

struct Endpoint {
    enum class Kind { Unix, Tcp, Exec };
    Kind kind = Kind::Unix;
    std::string path;                ///< Unix socket path
    std::string host;                ///< Tcp
    std::uint16_t port = 0;          ///< Tcp
    std::vector<std::string> argv;   ///< Exec

    /// Throws Error(Config) for unrecognized forms.
    static Endpoint parse(std::string_view text);
    [[nodiscard]] std::string to_string() const;
};

std::string encode_request(const PredictRequest& request);
/// Validates a response line against the request id and the legal label sets.
/// Throws ProtocolError or IllegalLabel.
Prediction decode_response(std::string_view line, const std::string& expected_id);

/// Bidirectional line channel with deadlines.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void write_line(std::string_view line, std::chrono::steady_clock::time_point deadline) = 0;
    /// Throws Timeout when no complete line arrives before the deadline and
    /// ProtocolError when the peer closes the stream.
    virtual std::string read_line(std::chrono::steady_clock::time_point deadline) = 0;
};

/// Connects (retrying until the deadline) or spawns the server. Throws Timeout.
std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint, std::chrono::steady_clock::time_point deadline);

class ExternalModelClient final : public Imputer {
public:
    ExternalModelClient(Endpoint endpoint, std::chrono::milliseconds timeout);
    ~ExternalModelClient() override;

    [[nodiscard]] std::string_view name() const noexcept override { return "external-model"; }
    Prediction predict(const std::string& cve_id, const std::string& description) const override;
    /// Pipelines all requests over one connection; `workers` is ignored.
    std::vector<Prediction> predict_batch(std::span<const PredictRequest> requests, std::size_t workers) const override;

private:
    LineChannel& channel(std::chrono::steady_clock::time_point deadline) const;

    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex mutex_;
    mutable std::unique_ptr<LineChannel> channel_;
};

}  // namespace vulnrisk::impute
