#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecgpcg/types.hpp"

namespace ecgpcg {

enum class HrTrajectory {
    Constant,
    RampUpDown,
};

enum class CouplingKind {
    LinearFilter,
    NonlinearAmplitude,
};

struct SynthConfig {
    double duration_s = 60.0;
    int fs = 1000;
    double mean_hr_bpm = 70.0;
    HrTrajectory hr_trajectory = HrTrajectory::Constant;
    double electromechanical_delay_s = 0.04;
    CouplingKind coupling = CouplingKind::LinearFilter;
    double noise_std = 0.0;
    std::uint32_t rng_seed = 1;

    void validate() const;
    std::string to_kv() const;
    static SynthConfig from_kv(const std::string& text);
};

// Exact generation-time ground truth. burst_train holds the clean heart-sound
// bursts on the record grid; for LinearFilter coupling, pcg minus burst_train
// minus the additive noise equals fir_kernel convolved with the ecg channel.
struct CouplingTruth {
    std::vector<double> r_times;
    std::vector<double> s1_times;
    std::vector<double> s2_times;
    FiducialSet fiducials;
    std::vector<double> fir_kernel;
    std::vector<double> burst_train;
};

std::pair<Record, CouplingTruth> synth_coupled_record(const SynthConfig& cfg);

}  // namespace ecgpcg
