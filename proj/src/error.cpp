// SPDX-License-Identifier: Apache-2.0
#include "vulnrisk/error.hpp"

namespace vulnrisk {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Usage: return "Usage";
        case ErrorCode::Config: return "ConfigError";
        case ErrorCode::Io: return "IoError";
        case ErrorCode::MalformedVector: return "MalformedVector";
        case ErrorCode::MissingLabel: return "MissingLabel";
        case ErrorCode::Schema: return "SchemaError";
        case ErrorCode::DuplicateConflict: return "DuplicateConflict";
        case ErrorCode::EmptyAfterPreprocess: return "EmptyAfterPreprocess";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::Domain: return "DomainError";
        case ErrorCode::Protocol: return "ProtocolError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::IllegalLabel: return "IllegalLabel";
        case ErrorCode::UnresolvableMetric: return "UnresolvableMetric";
        case ErrorCode::EmptyComponent: return "EmptyComponent";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InsufficientData: return "InsufficientData";
    }
    return "Unknown";
}

}  // namespace vulnrisk
