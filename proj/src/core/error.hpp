#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bundlesim {

enum class ErrorCode {
    // network
    DuplicateId,
    DanglingNode,
    MissingProgram,
    InvalidValue,
    UnknownEdge,
    DisconnectedRoute,
    NoEdges,
    // files
    Io,
    MalformedXml,
    SchemaViolation,
    UnknownVClass,
    NegativeDepart,
    PosOutOfRange,
    InvalidProbability,
    UnsortedIntervals,
    // emissions
    UnknownClass,
    UnknownQuantity,
    MalformedConfig,
    DuplicateClass,
    MissingCoefficient,
    // scenario loading
    UnknownVType,
    UnknownRoute,
    UnknownContainerStop,
    StopOffRoute,
    VClassNotAllowed,
    // comparison
    UnknownStop,
    NotConnected,
    IncompleteResult,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Error carrying a machine-readable code and the offending identifier (if any).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string subject, std::string detail = {});

    ErrorCode code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    ErrorCode code_;
    std::string subject_;
};

}  // namespace bundlesim
