#pragma once

#include <stdexcept>
#include <string>

namespace archsearch {

enum class ErrorCode {
    InvalidInput,
    SchemaValidation,
    DegenerateEmbedding,
    DegenerateTraining,
    DegenerateAgreement,
    UndefinedRate,
    Conflict,
    NotFound,
    CorruptIndex,
    InvalidRun,
    JudgeFormat,
    Transport,
    ClassificationUnavailable,
};

const char* to_string(ErrorCode code);

/// Base error for the whole library. Every thrown error carries a code so the
/// CLI and the HTTP layer can map it onto exit codes / status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Schema validation failure; `field()` names the offending JSON path.
class SchemaError : public Error {
public:
    SchemaError(std::string field, const std::string& what)
        : Error(ErrorCode::SchemaValidation, field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) {
        throw Error(code, what);
    }
}

}  // namespace archsearch
