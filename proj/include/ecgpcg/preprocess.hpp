#pragma once

#include <span>
#include <string>
#include <vector>

#include "ecgpcg/types.hpp"

namespace ecgpcg {

struct Band {
    double lo_hz = 0.0;
    double hi_hz = 0.0;
};

// Per-sample sliding statistics over a centered window that shrinks at the
// record edges. sigma uses population normalization.
struct MovingStats {
    std::vector<double> m;
    std::vector<double> sigma;
    double window_s = 0.0;
};

struct PreprocessConfig {
    Band ecg_band{0.2, 30.0};
    Band pcg_band{10.0, 200.0};
    double notch_hz = 50.0;
    double notch_q = 45.0;
    double clip_k = 6.0;
    double clip_window_s = 60.0;
    double norm_window_s = 60.0;
    int target_fs = 1000;

    void validate(int fs) const;
    std::string to_kv() const;
    static PreprocessConfig from_kv(const std::string& text);
};

std::vector<double> bandpass(std::span<const double> x, double fs, double lo_hz, double hi_hz);
std::vector<double> notch(std::span<const double> x, double fs, double f0_hz, double q);
MovingStats moving_stats(std::span<const double> x, double fs, double window_s);
std::vector<double> clip_outliers(std::span<const double> x, double fs, double k, double window_s);
std::vector<double> adaptive_normalize(std::span<const double> x, double fs, double window_s);
std::vector<double> resample_decimate(std::span<const double> x, int fs_in, int fs_out);

// Full conditioning chain. ECG: bandpass, notch, clip, normalize, resample.
// PCG: same without the notch. Fiducial times pass through untouched.
Record preprocess_pipeline(const Record& record, const PreprocessConfig& cfg);

}  // namespace ecgpcg
