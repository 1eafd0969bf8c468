#pragma once

#include <string>

#include "ecgpcg/types.hpp"

namespace ecgpcg {

enum class RecordFormat {
    PairedCsv,
    RawBinaryPair,
};

// PairedCsv layout: first line `fs=<int>`, optional `subject=<id>,scenario=<name>`
// line, optional `# <provenance>` line, then `ecg,pcg` rows (LF line ends).
// RawBinaryPair is a single headered file with little-endian 64-bit floats.
Record load_record(const std::string& path, RecordFormat format);
void write_record(const std::string& path, const Record& record, RecordFormat format);

// CSV with header qrs_on,r_peak,qrs_off,t_on,t_peak,t_off; blank cells mean
// the landmark is absent. Times are seconds.
FiducialSet load_fiducials(const std::string& path);
void write_fiducials(const std::string& path, const FiducialSet& fiducials);

}  // namespace ecgpcg
