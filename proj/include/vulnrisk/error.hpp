// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vulnrisk {

/// Error categories. The numeric value is the process exit status the CLI
/// returns for that category, so values must stay stable.
enum class ErrorCode : int {
    Usage = 2,
    Config = 3,
    Io = 4,
    MalformedVector = 10,
    MissingLabel = 11,
    Schema = 20,
    DuplicateConflict = 21,
    EmptyAfterPreprocess = 30,
    EmptyDataset = 31,
    Domain = 32,
    Protocol = 40,
    Timeout = 41,
    IllegalLabel = 42,
    UnresolvableMetric = 50,
    EmptyComponent = 51,
    LengthMismatch = 60,
    InsufficientData = 61,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace vulnrisk
