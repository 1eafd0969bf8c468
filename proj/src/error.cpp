#include "ecgpcg/error.hpp"

namespace ecgpcg {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedFile: return "MalformedFile";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::NonFiniteSample: return "NonFiniteSample";
        case ErrorKind::OrderingViolation: return "OrderingViolation";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::InvalidBand: return "InvalidBand";
        case ErrorKind::SignalTooShort: return "SignalTooShort";
        case ErrorKind::InvalidFrequency: return "InvalidFrequency";
        case ErrorKind::WindowTooShort: return "WindowTooShort";
        case ErrorKind::DegenerateSegment: return "DegenerateSegment";
        case ErrorKind::NonIntegerFactor: return "NonIntegerFactor";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::RecordTooShort: return "RecordTooShort";
        case ErrorKind::TooFewRecords: return "TooFewRecords";
        case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
        case ErrorKind::DivergedTraining: return "DivergedTraining";
        case ErrorKind::SchemeMismatch: return "SchemeMismatch";
        case ErrorKind::EmptySelection: return "EmptySelection";
        case ErrorKind::ZeroSignal: return "ZeroSignal";
        case ErrorKind::DegenerateVariance: return "DegenerateVariance";
        case ErrorKind::InsufficientAveraging: return "InsufficientAveraging";
        case ErrorKind::NoMatchedBeats: return "NoMatchedBeats";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

}  // namespace ecgpcg
