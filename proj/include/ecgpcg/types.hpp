#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ecgpcg {

enum class Scenario {
    Rest,
    Walk,
    TreadmillStress,
    BicycleStress,
    Synthetic,
};

const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// Per-beat landmark times in seconds from record start. Absent landmarks stay
// empty; present ones must be finite and, within a beat, ordered
// qrs_on <= r_peak <= qrs_off <= t_on <= t_peak <= t_off.
struct BeatAnnotation {
    std::optional<double> qrs_on;
    std::optional<double> r_peak;
    std::optional<double> qrs_off;
    std::optional<double> t_on;
    std::optional<double> t_peak;
    std::optional<double> t_off;
};

struct FiducialSet {
    std::vector<BeatAnnotation> beats;

    std::size_t size() const { return beats.size(); }

    // Checks finiteness, within-beat ordering, and monotone r_peak sequence.
    // Loaders and the synthesizer call this; callers building perturbed sets
    // by hand may skip it.
    void validate() const;
};

struct Record {
    std::string subject_id;
    Scenario scenario = Scenario::Synthetic;
    int fs = 0;
    std::vector<double> ecg;
    std::vector<double> pcg;
    std::optional<FiducialSet> fiducials;
    std::string provenance;

    double duration_s() const {
        return fs > 0 ? static_cast<double>(ecg.size()) / fs : 0.0;
    }

    // Checks fs > 0, equal channel lengths, finite samples, and any attached
    // fiducials (including that they fall inside the record).
    void validate() const;
};

}  // namespace ecgpcg
