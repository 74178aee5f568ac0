#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ipsg {

enum class ErrorCode {
    Policy,
    Io,
    Format,
    Integrity,
    Version,
    DuplicateKey,
    Chain,
    Domain,
    Scenario,
    Trace,
    NotFlagged,
    ExpiredChallenge,
    InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

// Base of every error raised by the toolkit. `line` is 1-based and 0 when the
// error is not tied to a position in a text file.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::size_t line = 0)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          code_(code),
          line_(line)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }

private:
    ErrorCode code_;
    std::size_t line_;
};

template <ErrorCode Code>
class CodedError : public Error {
public:
    explicit CodedError(const std::string& what, std::size_t line = 0) : Error(Code, what, line) {}
};

using PolicyError = CodedError<ErrorCode::Policy>;
using IoError = CodedError<ErrorCode::Io>;
using FormatError = CodedError<ErrorCode::Format>;
using IntegrityError = CodedError<ErrorCode::Integrity>;
using VersionError = CodedError<ErrorCode::Version>;
using DuplicateKeyError = CodedError<ErrorCode::DuplicateKey>;
using ChainError = CodedError<ErrorCode::Chain>;
using DomainError = CodedError<ErrorCode::Domain>;
using ScenarioError = CodedError<ErrorCode::Scenario>;
using TraceError = CodedError<ErrorCode::Trace>;
using NotFlaggedError = CodedError<ErrorCode::NotFlagged>;
using ExpiredChallengeError = CodedError<ErrorCode::ExpiredChallenge>;
using InvalidArgument = CodedError<ErrorCode::InvalidArgument>;

}  // namespace ipsg
