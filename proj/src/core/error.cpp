#include "core/error.hpp"

namespace bundlesim {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingNode: return "DanglingNode";
    case ErrorCode::MissingProgram: return "MissingProgram";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::UnknownEdge: return "UnknownEdge";
    case ErrorCode::DisconnectedRoute: return "DisconnectedRoute";
    case ErrorCode::NoEdges: return "NoEdges";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownVClass: return "UnknownVClass";
    case ErrorCode::NegativeDepart: return "NegativeDepart";
    case ErrorCode::PosOutOfRange: return "PosOutOfRange";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::UnsortedIntervals: return "UnsortedIntervals";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::UnknownQuantity: return "UnknownQuantity";
    case ErrorCode::MalformedConfig: return "MalformedConfig";
    case ErrorCode::DuplicateClass: return "DuplicateClass";
    case ErrorCode::MissingCoefficient: return "MissingCoefficient";
    case ErrorCode::UnknownVType: return "UnknownVType";
    case ErrorCode::UnknownRoute: return "UnknownRoute";
    case ErrorCode::UnknownContainerStop: return "UnknownContainerStop";
    case ErrorCode::StopOffRoute: return "StopOffRoute";
    case ErrorCode::VClassNotAllowed: return "VClassNotAllowed";
    case ErrorCode::UnknownStop: return "UnknownStop";
    case ErrorCode::NotConnected: return "NotConnected";
    case ErrorCode::IncompleteResult: return "IncompleteResult";
    }
    return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& subject, const std::string& detail) {
    std::string msg{to_string(code)};
    if (!subject.empty()) {
        msg += "(\"" + subject + "\")";
    }
    if (!detail.empty()) {
        msg += ": " + detail;
    }
    return msg;
}

}  // namespace

Error::Error(ErrorCode code, std::string subject, std::string detail)
    : std::runtime_error(compose(code, subject, detail)), code_(code), subject_(std::move(subject)) {}

}  // namespace bundlesim
