#pragma once

#include <stdexcept>
#include <string>

namespace ecgpcg {

enum class ErrorKind {
    MalformedFile,
    LengthMismatch,
    NonFiniteSample,
    OrderingViolation,
    InvalidConfig,
    IoFailure,
    InvalidBand,
    SignalTooShort,
    InvalidFrequency,
    WindowTooShort,
    DegenerateSegment,
    NonIntegerFactor,
    EmptyDataset,
    RecordTooShort,
    TooFewRecords,
    NonFiniteFeature,
    DivergedTraining,
    SchemeMismatch,
    EmptySelection,
    ZeroSignal,
    DegenerateVariance,
    InsufficientAveraging,
    NoMatchedBeats,
    InvalidArgument,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind),
          message_(message) {}

    ErrorKind kind() const { return kind_; }
    const char* kind_name() const { return error_kind_name(kind_); }
    const std::string& message() const { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace ecgpcg
