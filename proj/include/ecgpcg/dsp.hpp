#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ecgpcg::dsp {

// Second-order IIR section, coefficients normalized so a0 == 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

// Butterworth bandpass as a cascade of order/2 biquads. `order` counts the
// final bandpass order and must be even (order 4 gives two sections).
std::vector<Biquad> butter_bandpass(int order, double lo_hz, double hi_hz, double fs);

// Constrained notch with an exact null at f0_hz.
Biquad notch_biquad(double f0_hz, double q, double fs);

// Frequency response of a cascade at a single frequency.
std::complex<double> cascade_response(const std::vector<Biquad>& sections, double f_hz, double fs);

// Zero-phase forward-backward filtering with odd-reflection padding of
// 3x the cascade order and steady-state initial conditions. Output length
// equals input length. Throws SignalTooShort when the input does not cover
// the padding.
std::vector<double> filtfilt(const std::vector<Biquad>& sections, std::span<const double> x);

// Kaiser windowed-sinc lowpass, odd length, normalized to unit DC gain.
std::vector<double> kaiser_lowpass_fir(std::size_t n_taps, double cutoff_hz, double fs,
                                       double beta);

// Centered moving average with shrink-to-valid edges.
std::vector<double> moving_average(std::span<const double> x, std::size_t window_len);

// FFT helpers (thread-safe; plans are cached internally).
std::vector<std::complex<double>> rfft(std::span<const double> x);
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);
std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x);

// Modified Bessel function of the first kind, order zero.
double i0_bessel(double x);

}  // namespace ecgpcg::dsp
