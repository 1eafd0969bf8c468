#include "ecgpcg/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include "ecgpcg/error.hpp"

namespace ecgpcg::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

using cplx = std::complex<double>;

}  // namespace

double i0_bessel(double x) {
    // power series; converges quickly for the |x| <= beta range used here
    double sum = 1.0, term = 1.0;
    const double q = 0.25 * x * x;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

std::vector<Biquad> butter_bandpass(int order, double lo_hz, double hi_hz, double fs) {
    if (order < 2 || order % 2 != 0)
        raise(ErrorKind::InvalidArgument, "bandpass order must be even and >= 2");
    if (!(lo_hz > 0.0) || !(lo_hz < hi_hz) || !(hi_hz < fs / 2.0))
        raise(ErrorKind::InvalidBand,
              "need 0 < lo < hi < fs/2, got [" + std::to_string(lo_hz) + ", " +
                  std::to_string(hi_hz) + "] at fs " + std::to_string(fs));

    const int n = order / 2;  // analog lowpass prototype order

    // Butterworth prototype poles, left half plane, unit radius.
    std::vector<cplx> lp_poles;
    for (int k = 1; k <= n; ++k) {
        const double theta = kPi * (2.0 * k + n - 1.0) / (2.0 * n);
        lp_poles.emplace_back(std::cos(theta), std::sin(theta));
    }

    // Prewarped band edges for the bilinear transform.
    const double fs2 = 2.0 * fs;
    const double wl = fs2 * std::tan(kPi * lo_hz / fs);
    const double wh = fs2 * std::tan(kPi * hi_hz / fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // Lowpass -> bandpass: pole p maps to the roots of s^2 - p*bw*s + w0^2.
    // Zeros: n at s = 0. Gain picks up bw^n.
    std::vector<cplx> poles;
    for (const cplx& p : lp_poles) {
        const cplx pb = p * (bw / 2.0);
        const cplx disc = std::sqrt(pb * pb - cplx(w0 * w0, 0.0));
        poles.push_back(pb + disc);
        poles.push_back(pb - disc);
    }
    const double k_analog = std::pow(bw, n);

    // Bilinear transform of the zpk form. Analog zeros at 0 land on z = +1;
    // the pole surplus contributes n zeros at z = -1.
    cplx pole_prod(1.0, 0.0);
    std::vector<cplx> zpoles;
    for (const cplx& s : poles) {
        zpoles.push_back((cplx(fs2, 0.0) + s) / (cplx(fs2, 0.0) - s));
        pole_prod *= (cplx(fs2, 0.0) - s);
    }
    // pole_prod is real up to rounding (conjugate-closed pole set)
    const double k_total = k_analog * std::pow(fs2, n) / std::real(pole_prod);

    // Conjugate-closed set: build one section per upper-half-plane pole,
    // each paired with one zero at +1 and one at -1.
    std::vector<cplx> upper;
    for (const cplx& z : zpoles)
        if (z.imag() > 0.0) upper.push_back(z);
    if (static_cast<int>(upper.size()) != n)
        raise(ErrorKind::InvalidBand, "degenerate pole set for requested band");
    std::sort(upper.begin(), upper.end(),
              [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });

    std::vector<Biquad> sections;
    for (int i = 0; i < n; ++i) {
        Biquad s;
        const double g = (i == 0) ? k_total : 1.0;
        s.b0 = g;
        s.b1 = 0.0;
        s.b2 = -g;
        s.a1 = -2.0 * upper[i].real();
        s.a2 = std::norm(upper[i]);
        sections.push_back(s);
    }
    return sections;
}

Biquad notch_biquad(double f0_hz, double q, double fs) {
    if (!(f0_hz > 0.0) || !(f0_hz < fs / 2.0))
        raise(ErrorKind::InvalidFrequency, "notch frequency must lie in (0, fs/2)");
    if (!(q > 0.0)) raise(ErrorKind::InvalidArgument, "notch Q must be positive");
    const double w0 = 2.0 * kPi * f0_hz / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * std::cos(w0) / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * std::cos(w0) / a0;
    s.a2 = (1.0 - alpha) / a0;
    return s;
}

std::complex<double> cascade_response(const std::vector<Biquad>& sections, double f_hz, double fs) {
    const cplx z = std::polar(1.0, -2.0 * kPi * f_hz / fs);
    cplx h(1.0, 0.0);
    for (const Biquad& s : sections) {
        h *= (s.b0 + s.b1 * z + s.b2 * z * z) / (cplx(1.0, 0.0) + s.a1 * z + s.a2 * z * z);
    }
    return h;
}

namespace {

// One pass through the cascade, transposed direct form II, with step-matched
// initial conditions: each section starts in the steady state it would reach
// for a constant input at `level` (the first sample, propagated through the
// DC gains of earlier sections).
void sos_filter_inplace(const std::vector<Biquad>& sections, std::vector<double>& x) {
    double level = x.empty() ? 0.0 : x.front();
    for (const Biquad& s : sections) {
        const double g = s.dc_gain();
        double z1 = (s.b1 + s.b2 - (s.a1 + s.a2) * g) * level;
        double z2 = (s.b2 - s.a2 * g) * level;
        for (double& v : x) {
            const double y = s.b0 * v + z1;
            z1 = s.b1 * v - s.a1 * y + z2;
            z2 = s.b2 * v - s.a2 * y;
            v = y;
        }
        level *= g;
    }
}

}  // namespace

std::vector<double> filtfilt(const std::vector<Biquad>& sections, std::span<const double> x) {
    const std::size_t order = 2 * sections.size();
    const std::size_t padlen = 3 * order;
    if (x.size() <= padlen)
        raise(ErrorKind::SignalTooShort,
              "filtfilt needs more than " + std::to_string(padlen) + " samples, got " +
                  std::to_string(x.size()));

    const std::size_t n = x.size();
    std::vector<double> ext;
    ext.reserve(n + 2 * padlen);
    for (std::size_t i = 0; i < padlen; ++i) ext.push_back(2.0 * x[0] - x[padlen - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

    sos_filter_inplace(sections, ext);
    std::reverse(ext.begin(), ext.end());
    sos_filter_inplace(sections, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + padlen, ext.end() - padlen);
}

std::vector<double> kaiser_lowpass_fir(std::size_t n_taps, double cutoff_hz, double fs,
                                       double beta) {
    if (n_taps % 2 == 0 || n_taps < 3)
        raise(ErrorKind::InvalidArgument, "FIR length must be odd and >= 3");
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0))
        raise(ErrorKind::InvalidFrequency, "FIR cutoff must lie in (0, fs/2)");

    const long m = static_cast<long>(n_taps - 1) / 2;
    const double nu = cutoff_hz / fs;
    const double i0b = i0_bessel(beta);

    std::vector<double> h(n_taps);
    double sum = 0.0;
    for (long i = 0; i < static_cast<long>(n_taps); ++i) {
        const long k = i - m;
        const double sinc =
            (k == 0) ? 2.0 * nu : std::sin(2.0 * kPi * nu * k) / (kPi * static_cast<double>(k));
        const double r = static_cast<double>(k) / static_cast<double>(m);
        const double w = i0_bessel(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h[i] = sinc * w;
        sum += h[i];
    }
    for (double& v : h) v /= sum;  // unit DC gain
    return h;
}

std::vector<double> moving_average(std::span<const double> x, std::size_t window_len) {
    if (window_len == 0) raise(ErrorKind::InvalidArgument, "window_len must be positive");
    const std::size_t n = x.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];

    const long half = static_cast<long>(window_len) / 2;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const long lo = std::max<long>(0, static_cast<long>(i) - half);
        const long hi = std::min<long>(static_cast<long>(n) - 1, static_cast<long>(i) + half);
        out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// FFT wrappers. FFTW planning is not thread-safe, so plans are created and
// cached under a mutex; execution uses the new-array interface on per-call
// buffers (plans are created FFTW_UNALIGNED so any buffer is acceptable).
// ---------------------------------------------------------------------------

namespace {

std::mutex g_plan_mutex;

fftw_plan r2c_plan(std::size_t n) {
    static std::unordered_map<std::size_t, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> in(n);
    std::vector<cplx> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                       reinterpret_cast<fftw_complex*>(out.data()),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache[n] = p;
    return p;
}

fftw_plan c2c_plan(std::size_t n, int sign) {
    static std::unordered_map<std::size_t, fftw_plan> fwd, bwd;
    auto& cache = (sign == FFTW_FORWARD) ? fwd : bwd;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> in(n), out(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                   reinterpret_cast<fftw_complex*>(out.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache[n] = p;
    return p;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) raise(ErrorKind::SignalTooShort, "empty FFT input");
    fftw_plan p = r2c_plan(n);
    std::vector<double> in(x.begin(), x.end());
    std::vector<cplx> out(n / 2 + 1);
    fftw_execute_dft_r2c(p, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n == 0) raise(ErrorKind::SignalTooShort, "empty FFT input");
    fftw_plan p = c2c_plan(n, FFTW_FORWARD);
    std::vector<cplx> in(x), out(n);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    if (n == 0) raise(ErrorKind::SignalTooShort, "empty FFT input");
    fftw_plan p = c2c_plan(n, FFTW_BACKWARD);
    std::vector<cplx> in(x), out(n);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / static_cast<double>(n);
    for (cplx& v : out) v *= scale;
    return out;
}

}  // namespace ecgpcg::dsp
