#include "ecgpcg/envelope.hpp"

#include <cmath>

#include "ecgpcg/dsp.hpp"
#include "ecgpcg/error.hpp"

namespace ecgpcg {

std::vector<std::complex<double>> analytic_signal(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) raise(ErrorKind::SignalTooShort, "analytic signal needs at least 4 samples");
    for (double v : x)
        if (!std::isfinite(v)) raise(ErrorKind::NonFiniteSample, "non-finite sample in input");

    std::vector<std::complex<double>> spec(n);
    const auto half = dsp::rfft(x);
    for (std::size_t k = 0; k < half.size(); ++k) spec[k] = half[k];
    for (std::size_t k = half.size(); k < n; ++k) spec[k] = std::conj(spec[n - k]);

    const std::size_t nyq = n / 2;
    for (std::size_t k = 1; k < n; ++k) {
        if (n % 2 == 0 && k == nyq) continue;
        if (k < (n + 1) / 2)
            spec[k] *= 2.0;
        else
            spec[k] = 0.0;
    }
    return dsp::ifft(spec);
}

std::vector<double> instantaneous_amplitude(std::span<const double> x) {
    const auto z = analytic_signal(x);
    std::vector<double> a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::abs(z[i]);
    return a;
}

std::vector<double> instantaneous_phase(std::span<const double> x) {
    const auto z = analytic_signal(x);
    std::vector<double> p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::arg(z[i]);
    return p;
}

AnalyticSeries analytic_series(std::span<const double> x) {
    const auto z = analytic_signal(x);
    AnalyticSeries out;
    out.amplitude.resize(z.size());
    out.phase.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.amplitude[i] = std::abs(z[i]);
        out.phase[i] = std::arg(z[i]);
    }
    return out;
}

WindowedDataset envelope_dataset_segments(
    const std::vector<double>& input_series, const std::vector<double>& target_series, double fs,
    const WindowScheme& scheme, double stride_s,
    const std::vector<std::pair<std::size_t, std::size_t>>& segments, Direction direction,
    bool envelope_inputs) {
    const auto target_env = instantaneous_amplitude(target_series);
    if (envelope_inputs) {
        const auto input_env = instantaneous_amplitude(input_series);
        return build_dataset_segments(input_env, target_env, fs, scheme, stride_s, segments,
                                      TargetKind::Envelope, direction);
    }
    return build_dataset_segments(input_series, target_env, fs, scheme, stride_s, segments,
                                  TargetKind::Envelope, direction);
}

WindowedDataset envelope_dataset(const std::vector<double>& input_series,
                                 const std::vector<double>& target_series, double fs,
                                 const WindowScheme& scheme, double stride_s, Direction direction,
                                 bool envelope_inputs) {
    return envelope_dataset_segments(input_series, target_series, fs, scheme, stride_s,
                                     {{0, input_series.size()}}, direction, envelope_inputs);
}

}  // namespace ecgpcg
