#include "ipsg/error.hpp"

namespace ipsg {

const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::Policy: return "PolicyError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Format: return "FormatError";
    case ErrorCode::Integrity: return "IntegrityError";
    case ErrorCode::Version: return "VersionError";
    case ErrorCode::DuplicateKey: return "DuplicateKeyError";
    case ErrorCode::Chain: return "ChainError";
    case ErrorCode::Domain: return "DomainError";
    case ErrorCode::Scenario: return "ScenarioError";
    case ErrorCode::Trace: return "TraceError";
    case ErrorCode::NotFlagged: return "NotFlaggedError";
    case ErrorCode::ExpiredChallenge: return "ExpiredChallengeError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

}  // namespace ipsg
