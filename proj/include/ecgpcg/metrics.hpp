#pragma once

#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ecgpcg {

struct Spectrum {
    std::vector<double> freqs;
    std::vector<double> values;
    double resolution_hz = 0.0;
    int n_segments_averaged = 0;
};

struct CrossSpectrum {
    std::vector<double> freqs;
    std::vector<std::complex<double>> values;
    double resolution_hz = 0.0;
    int n_segments_averaged = 0;
};

struct MetricsReport {
    double snr_db = 0.0;
    double cc = 0.0;
    double weighted_coherence = 0.0;
    std::vector<double> coherence_freqs;
    std::vector<double> coherence_curve;
    std::size_t n_samples_evaluated = 0;
    std::vector<std::string> flags;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
};

// 10*log10 of masked signal power over masked residual power, capped at
// +120 dB once the residual drops below 1e-12 of the signal power.
double snr_db(std::span<const double> x, std::span<const double> x_hat,
              const std::vector<bool>& mask);

double corr_coef(std::span<const double> x, std::span<const double> x_hat,
                 const std::vector<bool>& mask);

// Hann-tapered, mean-detrended, overlap-averaged one-sided spectra with
// density scaling (integrates to the signal variance).
Spectrum welch_psd(std::span<const double> x, double fs, double window_s = 1.0,
                   double overlap = 0.5);
CrossSpectrum cross_psd(std::span<const double> x, std::span<const double> x_hat, double fs,
                        double window_s = 1.0, double overlap = 0.5);

// Magnitude-squared coherence per bin; bins where either auto-spectrum falls
// below 1e-12 of its mean report zero. Needs at least two averaged segments.
Spectrum coherence(std::span<const double> x, std::span<const double> x_hat, double fs,
                   double window_s = 1.0, double overlap = 0.5);

// Mean of per-bin values weighted by the reference power in each bin.
double power_weighted_mean(std::span<const double> values, std::span<const double> weights);

// Coherence averaged with the reference auto-spectrum as weights, optionally
// restricted to [lo_hz, hi_hz].
double weighted_coherence(std::span<const double> x, std::span<const double> x_hat, double fs,
                          double window_s = 1.0, double overlap = 0.5, double lo_hz = 0.0,
                          double hi_hz = std::numeric_limits<double>::infinity());

MetricsReport evaluate(std::span<const double> x, std::span<const double> x_hat, double fs,
                       double guard_s = 1.0);

}  // namespace ecgpcg
