#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ecgpcg/windowing.hpp"

namespace ecgpcg {

struct AnalyticSeries {
    std::vector<double> amplitude;  // modulus, >= 0
    std::vector<double> phase;      // radians in (-pi, pi]
};

// Analytic extension computed over the whole record in one transform:
// negative frequencies zeroed, positive doubled, DC and Nyquist kept.
// The real part reproduces the input.
std::vector<std::complex<double>> analytic_signal(std::span<const double> x);

std::vector<double> instantaneous_amplitude(std::span<const double> x);
std::vector<double> instantaneous_phase(std::span<const double> x);
AnalyticSeries analytic_series(std::span<const double> x);

// Windowed regression data where targets are instantaneous amplitudes.
// Inputs default to the amplitude of the input series as well; pass
// envelope_inputs = false to keep raw waveform inputs with envelope targets.
WindowedDataset envelope_dataset(const std::vector<double>& input_series,
                                 const std::vector<double>& target_series, double fs,
                                 const WindowScheme& scheme, double stride_s,
                                 Direction direction = Direction::EcgToPcg,
                                 bool envelope_inputs = true);

WindowedDataset envelope_dataset_segments(
    const std::vector<double>& input_series, const std::vector<double>& target_series, double fs,
    const WindowScheme& scheme, double stride_s,
    const std::vector<std::pair<std::size_t, std::size_t>>& segments,
    Direction direction = Direction::EcgToPcg, bool envelope_inputs = true);

}  // namespace ecgpcg
