#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace maestro {

enum class ErrorCode {
    SchemaError,
    DuplicateId,
    EmptyPool,
    EmptyMixture,
    InvalidIdentifier,
    UnknownTriple,
    VersionMismatch,
    UnresolvableIdentifier,
    MisalignedRecords,
    RaggedInput,
    NotAnExtension,
    NotNested,
    IoError,
    ConfigError,
    Internal,
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::EmptyMixture: return "EmptyMixture";
    case ErrorCode::InvalidIdentifier: return "InvalidIdentifier";
    case ErrorCode::UnknownTriple: return "UnknownTriple";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::UnresolvableIdentifier: return "UnresolvableIdentifier";
    case ErrorCode::MisalignedRecords: return "MisalignedRecords";
    case ErrorCode::RaggedInput: return "RaggedInput";
    case ErrorCode::NotAnExtension: return "NotAnExtension";
    case ErrorCode::NotNested: return "NotNested";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::Internal: return "Internal";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

    // User errors map to exit code 1, internal errors to 2.
    bool is_user_error() const {
        switch (code_) {
        case ErrorCode::SchemaError:
        case ErrorCode::DuplicateId:
        case ErrorCode::EmptyPool:
        case ErrorCode::EmptyMixture:
        case ErrorCode::InvalidIdentifier:
        case ErrorCode::RaggedInput:
        case ErrorCode::NotAnExtension:
        case ErrorCode::NotNested:
        case ErrorCode::IoError:
        case ErrorCode::ConfigError:
        case ErrorCode::VersionMismatch:
            return true;
        default:
            return false;
        }
    }

private:
    ErrorCode code_;
};

} // namespace maestro
