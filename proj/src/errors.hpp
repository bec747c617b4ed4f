#pragma once

#include <stdexcept>
#include <string>

namespace turbperf {

// Failure classes shared by the C API status codes and the CLI exit codes.
enum class ErrClass : int {
    Config = 2,
    Data = 3,
    Train = 4,
    Io = 5,
};

enum class ErrKind {
    // config
    BadConfig,
    BadFractions,
    BadOverride,
    // data
    MissingFile,
    MissingColumn,
    ParseError,
    EmptyFile,
    DegenerateColumn,
    InsufficientData,
    EmptyInput,
    LengthMismatch,
    ShapeMismatch,
    WindowTooLong,
    EmptySplit,
    EmptyBatch,
    TooFewSamples,
    DuplicateName,
    // train
    DivergenceDetected,
    TrainFailure,
    // io
    IoError,
};

ErrClass err_class(ErrKind kind);
const char* err_name(ErrKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrKind kind, const std::string& message)
        : std::runtime_error(std::string(err_name(kind)) + ": " + message), kind_(kind) {}

    ErrKind kind() const { return kind_; }
    ErrClass cls() const { return err_class(kind_); }

private:
    ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline ErrClass err_class(ErrKind kind) {
    switch (kind) {
        case ErrKind::BadConfig:
        case ErrKind::BadFractions:
        case ErrKind::BadOverride:
            return ErrClass::Config;
        case ErrKind::DivergenceDetected:
        case ErrKind::TrainFailure:
            return ErrClass::Train;
        case ErrKind::IoError:
            return ErrClass::Io;
        default:
            return ErrClass::Data;
    }
}

inline const char* err_name(ErrKind kind) {
    switch (kind) {
        case ErrKind::BadConfig: return "BadConfig";
        case ErrKind::BadFractions: return "BadFractions";
        case ErrKind::BadOverride: return "BadOverride";
        case ErrKind::MissingFile: return "MissingFile";
        case ErrKind::MissingColumn: return "MissingColumn";
        case ErrKind::ParseError: return "ParseError";
        case ErrKind::EmptyFile: return "EmptyFile";
        case ErrKind::DegenerateColumn: return "DegenerateColumn";
        case ErrKind::InsufficientData: return "InsufficientData";
        case ErrKind::EmptyInput: return "EmptyInput";
        case ErrKind::LengthMismatch: return "LengthMismatch";
        case ErrKind::ShapeMismatch: return "ShapeMismatch";
        case ErrKind::WindowTooLong: return "WindowTooLong";
        case ErrKind::EmptySplit: return "EmptySplit";
        case ErrKind::EmptyBatch: return "EmptyBatch";
        case ErrKind::TooFewSamples: return "TooFewSamples";
        case ErrKind::DuplicateName: return "DuplicateName";
        case ErrKind::DivergenceDetected: return "DivergenceDetected";
        case ErrKind::TrainFailure: return "TrainFailure";
        case ErrKind::IoError: return "IoError";
    }
    return "Error";
}

} // namespace turbperf
