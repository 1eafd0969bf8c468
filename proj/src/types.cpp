#include "ecgpcg/types.hpp"

#include <array>
#include <cmath>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

namespace {

const std::array<std::pair<Scenario, const char*>, 5> kScenarioNames = {{
    {Scenario::Rest, "rest"},
    {Scenario::Walk, "walk"},
    {Scenario::TreadmillStress, "treadmill_stress"},
    {Scenario::BicycleStress, "bicycle_stress"},
    {Scenario::Synthetic, "synthetic"},
}};

void check_ordered(const std::optional<double>& earlier, const std::optional<double>& later,
                   const char* earlier_name, const char* later_name, std::size_t beat) {
    if (earlier && later && *earlier > *later)
        raise(ErrorKind::OrderingViolation,
              std::string(earlier_name) + " after " + later_name + " in beat " +
                  std::to_string(beat));
}

}  // namespace

const char* scenario_name(Scenario s) {
    for (const auto& [value, name] : kScenarioNames)
        if (value == s) return name;
    return "synthetic";
}

Scenario scenario_from_name(const std::string& name) {
    for (const auto& [value, sname] : kScenarioNames)
        if (name == sname) return value;
    raise(ErrorKind::MalformedFile, "unknown scenario '" + name + "'");
}

void FiducialSet::validate() const {
    double prev_r = -1.0;
    for (std::size_t i = 0; i < beats.size(); ++i) {
        const BeatAnnotation& b = beats[i];
        for (const auto* field : {&b.qrs_on, &b.r_peak, &b.qrs_off, &b.t_on, &b.t_peak, &b.t_off}) {
            if (*field && !std::isfinite(**field))
                raise(ErrorKind::NonFiniteSample,
                      "non-finite landmark in beat " + std::to_string(i));
        }
        check_ordered(b.qrs_on, b.r_peak, "qrs_on", "r_peak", i);
        check_ordered(b.r_peak, b.qrs_off, "r_peak", "qrs_off", i);
        check_ordered(b.qrs_off, b.t_on, "qrs_off", "t_on", i);
        check_ordered(b.t_on, b.t_peak, "t_on", "t_peak", i);
        check_ordered(b.t_peak, b.t_off, "t_peak", "t_off", i);
        if (b.r_peak) {
            if (*b.r_peak <= prev_r)
                raise(ErrorKind::OrderingViolation,
                      "r_peak sequence not increasing at beat " + std::to_string(i));
            prev_r = *b.r_peak;
        }
    }
}

void Record::validate() const {
    if (fs <= 0) raise(ErrorKind::InvalidConfig, "record fs must be positive");
    if (ecg.size() != pcg.size())
        raise(ErrorKind::LengthMismatch,
              "channel lengths differ: " + std::to_string(ecg.size()) + " vs " +
                  std::to_string(pcg.size()));
    for (std::size_t i = 0; i < ecg.size(); ++i) {
        if (!std::isfinite(ecg[i]) || !std::isfinite(pcg[i]))
            raise(ErrorKind::NonFiniteSample, "non-finite sample at index " + std::to_string(i));
    }
    if (fiducials) {
        fiducials->validate();
        const double dur = duration_s();
        for (std::size_t i = 0; i < fiducials->beats.size(); ++i) {
            const BeatAnnotation& b = fiducials->beats[i];
            for (const auto* field :
                 {&b.qrs_on, &b.r_peak, &b.qrs_off, &b.t_on, &b.t_peak, &b.t_off}) {
                if (*field && (**field < 0.0 || **field > dur))
                    raise(ErrorKind::OrderingViolation,
                          "landmark outside record in beat " + std::to_string(i));
            }
        }
    }
}

}  // namespace ecgpcg
