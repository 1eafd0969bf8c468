#include "ecgpcg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ecgpcg/dsp.hpp"
#include "ecgpcg/error.hpp"
#include "ecgpcg/windowing.hpp"

namespace ecgpcg {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSnrCapDb = 120.0;

struct WelchSetup {
    std::size_t nperseg = 0;
    std::size_t step = 0;
    std::size_t n_segments = 0;
    std::vector<double> window;
    double scale = 0.0;  // density normalization per segment
};

WelchSetup welch_setup(std::size_t n, double fs, double window_s, double overlap) {
    if (!(window_s > 0.0)) raise(ErrorKind::InvalidConfig, "window_s must be positive");
    if (!(overlap >= 0.0 && overlap < 1.0))
        raise(ErrorKind::InvalidConfig, "overlap must lie in [0, 1)");
    WelchSetup s;
    s.nperseg = static_cast<std::size_t>(std::llround(window_s * fs));
    if (s.nperseg < 2) raise(ErrorKind::InvalidConfig, "window shorter than two samples");
    if (n < s.nperseg)
        raise(ErrorKind::SignalTooShort, "need at least " + std::to_string(s.nperseg) +
                                             " samples, got " + std::to_string(n));
    const std::size_t noverlap = static_cast<std::size_t>(s.nperseg * overlap);
    s.step = s.nperseg - noverlap;
    s.n_segments = (n - s.nperseg) / s.step + 1;

    s.window.resize(s.nperseg);
    double wss = 0.0;
    for (std::size_t i = 0; i < s.nperseg; ++i) {
        s.window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / s.nperseg));
        wss += s.window[i] * s.window[i];
    }
    s.scale = 1.0 / (fs * wss);
    return s;
}

// Averaged one-sided cross spectrum conj(X)*Y over Hann segments. Used for
// the auto spectra as well so every consumer shares one segmentation.
CrossSpectrum welch_cross(std::span<const double> x, std::span<const double> y, double fs,
                          double window_s, double overlap) {
    if (x.size() != y.size()) raise(ErrorKind::LengthMismatch, "series lengths differ");
    const WelchSetup s = welch_setup(x.size(), fs, window_s, overlap);
    const std::size_t n_bins = s.nperseg / 2 + 1;

    std::vector<std::complex<double>> acc(n_bins, {0.0, 0.0});
    std::vector<double> seg_x(s.nperseg), seg_y(s.nperseg);
    for (std::size_t seg = 0; seg < s.n_segments; ++seg) {
        const std::size_t off = seg * s.step;
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < s.nperseg; ++i) {
            mx += x[off + i];
            my += y[off + i];
        }
        mx /= static_cast<double>(s.nperseg);
        my /= static_cast<double>(s.nperseg);
        for (std::size_t i = 0; i < s.nperseg; ++i) {
            seg_x[i] = (x[off + i] - mx) * s.window[i];
            seg_y[i] = (y[off + i] - my) * s.window[i];
        }
        const auto fx = dsp::rfft(seg_x);
        const auto fy = dsp::rfft(seg_y);
        for (std::size_t b = 0; b < n_bins; ++b) acc[b] += std::conj(fx[b]) * fy[b];
    }

    CrossSpectrum out;
    out.resolution_hz = fs / static_cast<double>(s.nperseg);
    out.n_segments_averaged = static_cast<int>(s.n_segments);
    out.freqs.resize(n_bins);
    out.values.resize(n_bins);
    const bool even = s.nperseg % 2 == 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        out.freqs[b] = static_cast<double>(b) * out.resolution_hz;
        double factor = s.scale / static_cast<double>(s.n_segments);
        if (b != 0 && !(even && b == n_bins - 1)) factor *= 2.0;
        out.values[b] = acc[b] * factor;
    }
    return out;
}

struct CoherenceParts {
    std::vector<double> freqs;
    std::vector<double> pxx, pyy, mu;
    int n_segments = 0;
};

CoherenceParts coherence_parts(std::span<const double> x, std::span<const double> y, double fs,
                               double window_s, double overlap) {
    const auto pxy = welch_cross(x, y, fs, window_s, overlap);
    if (pxy.n_segments_averaged < 2)
        raise(ErrorKind::InsufficientAveraging,
              "coherence needs at least 2 averaged segments, got " +
                  std::to_string(pxy.n_segments_averaged));
    const auto pxx = welch_cross(x, x, fs, window_s, overlap);
    const auto pyy = welch_cross(y, y, fs, window_s, overlap);

    CoherenceParts parts;
    parts.freqs = pxy.freqs;
    parts.n_segments = pxy.n_segments_averaged;
    const std::size_t n_bins = pxy.freqs.size();
    parts.pxx.resize(n_bins);
    parts.pyy.resize(n_bins);
    parts.mu.resize(n_bins);
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        parts.pxx[b] = pxx.values[b].real();
        parts.pyy[b] = pyy.values[b].real();
        mean_x += parts.pxx[b];
        mean_y += parts.pyy[b];
    }
    mean_x /= static_cast<double>(n_bins);
    mean_y /= static_cast<double>(n_bins);
    const double eps_x = 1e-12 * mean_x;
    const double eps_y = 1e-12 * mean_y;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (parts.pxx[b] < eps_x || parts.pyy[b] < eps_y || parts.pxx[b] <= 0.0 ||
            parts.pyy[b] <= 0.0) {
            parts.mu[b] = 0.0;
            continue;
        }
        parts.mu[b] = std::norm(pxy.values[b]) / (parts.pxx[b] * parts.pyy[b]);
    }
    return parts;
}

}  // namespace

double snr_db(std::span<const double> x, std::span<const double> x_hat,
              const std::vector<bool>& mask) {
    if (x.size() != x_hat.size() || x.size() != mask.size())
        raise(ErrorKind::LengthMismatch, "signal and mask lengths differ");
    double sig = 0.0, res = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!mask[i]) continue;
        ++count;
        sig += x[i] * x[i];
        const double d = x[i] - x_hat[i];
        res += d * d;
    }
    if (count < 2) raise(ErrorKind::EmptySelection, "mask selects fewer than 2 samples");
    if (sig == 0.0) raise(ErrorKind::ZeroSignal, "reference power is zero under the mask");
    if (res < 1e-12 * sig) return kSnrCapDb;
    return 10.0 * std::log10(sig / res);
}

double corr_coef(std::span<const double> x, std::span<const double> x_hat,
                 const std::vector<bool>& mask) {
    if (x.size() != x_hat.size() || x.size() != mask.size())
        raise(ErrorKind::LengthMismatch, "signal and mask lengths differ");
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!mask[i]) continue;
        ++count;
        sx += x[i];
        sy += x_hat[i];
    }
    if (count < 2) raise(ErrorKind::EmptySelection, "mask selects fewer than 2 samples");
    const double mx = sx / static_cast<double>(count);
    const double my = sy / static_cast<double>(count);
    double vxx = 0.0, vyy = 0.0, vxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!mask[i]) continue;
        const double dx = x[i] - mx;
        const double dy = x_hat[i] - my;
        vxx += dx * dx;
        vyy += dy * dy;
        vxy += dx * dy;
    }
    if (vxx <= 0.0 || vyy <= 0.0)
        raise(ErrorKind::DegenerateVariance, "constant series under the mask");
    return std::clamp(vxy / std::sqrt(vxx * vyy), -1.0, 1.0);
}

Spectrum welch_psd(std::span<const double> x, double fs, double window_s, double overlap) {
    const auto cross = welch_cross(x, x, fs, window_s, overlap);
    Spectrum out;
    out.freqs = cross.freqs;
    out.resolution_hz = cross.resolution_hz;
    out.n_segments_averaged = cross.n_segments_averaged;
    out.values.resize(cross.values.size());
    for (std::size_t b = 0; b < cross.values.size(); ++b)
        out.values[b] = std::max(0.0, cross.values[b].real());
    return out;
}

CrossSpectrum cross_psd(std::span<const double> x, std::span<const double> x_hat, double fs,
                        double window_s, double overlap) {
    return welch_cross(x, x_hat, fs, window_s, overlap);
}

Spectrum coherence(std::span<const double> x, std::span<const double> x_hat, double fs,
                   double window_s, double overlap) {
    const auto parts = coherence_parts(x, x_hat, fs, window_s, overlap);
    Spectrum out;
    out.freqs = parts.freqs;
    out.values = parts.mu;
    out.resolution_hz = parts.freqs.size() > 1 ? parts.freqs[1] - parts.freqs[0] : 0.0;
    out.n_segments_averaged = parts.n_segments;
    return out;
}

double power_weighted_mean(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) raise(ErrorKind::LengthMismatch, "bin counts differ");
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < values.size(); ++b) {
        num += weights[b] * values[b];
        den += weights[b];
    }
    if (den <= 0.0) raise(ErrorKind::ZeroSignal, "no reference power inside the band");
    return num / den;
}

double weighted_coherence(std::span<const double> x, std::span<const double> x_hat, double fs,
                          double window_s, double overlap, double lo_hz, double hi_hz) {
    const auto parts = coherence_parts(x, x_hat, fs, window_s, overlap);
    std::vector<double> mu, pxx;
    for (std::size_t b = 0; b < parts.freqs.size(); ++b) {
        if (parts.freqs[b] < lo_hz || parts.freqs[b] > hi_hz) continue;
        mu.push_back(parts.mu[b]);
        pxx.push_back(parts.pxx[b]);
    }
    return power_weighted_mean(mu, pxx);
}

MetricsReport evaluate(std::span<const double> x, std::span<const double> x_hat, double fs,
                       double guard_s) {
    if (x.size() != x_hat.size()) raise(ErrorKind::LengthMismatch, "series lengths differ");
    const double duration = static_cast<double>(x.size()) / fs;
    if (!(duration > 2.0 * guard_s + 2.0))
        raise(ErrorKind::RecordTooShort, "need more than two Welch windows beyond the guards");

    const auto mask = evaluation_mask(duration, fs, guard_s);
    MetricsReport report;
    report.snr_db = snr_db(x, x_hat, mask);
    try {
        report.cc = corr_coef(x, x_hat, mask);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateVariance) throw;
        report.cc = 0.0;
        report.flags.push_back("cc_degenerate");
    }
    if (report.snr_db >= kSnrCapDb) report.flags.push_back("snr_capped");

    const std::size_t lo = static_cast<std::size_t>(std::llround(guard_s * fs));
    const std::size_t hi = x.size() - lo;
    const std::span<const double> xin = x.subspan(lo, hi - lo);
    const std::span<const double> yin = x_hat.subspan(lo, hi - lo);
    const auto curve = coherence(xin, yin, fs);
    report.coherence_freqs = curve.freqs;
    report.coherence_curve = curve.values;
    report.weighted_coherence = weighted_coherence(xin, yin, fs);
    for (std::size_t i = 0; i < mask.size(); ++i) report.n_samples_evaluated += mask[i] ? 1 : 0;
    return report;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["snr_db"] = snr_db;
    j["cc"] = cc;
    j["weighted_coherence"] = weighted_coherence;
    j["coherence_curve"]["freq"] = coherence_freqs;
    j["coherence_curve"]["value"] = coherence_curve;
    j["n_samples_evaluated"] = n_samples_evaluated;
    j["flags"] = flags;
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) raise(ErrorKind::MalformedFile, "invalid metrics JSON");
    MetricsReport r;
    try {
        r.snr_db = j.at("snr_db").get<double>();
        r.cc = j.at("cc").get<double>();
        r.weighted_coherence = j.at("weighted_coherence").get<double>();
        r.coherence_freqs = j.at("coherence_curve").at("freq").get<std::vector<double>>();
        r.coherence_curve = j.at("coherence_curve").at("value").get<std::vector<double>>();
        r.n_samples_evaluated = j.at("n_samples_evaluated").get<std::size_t>();
        r.flags = j.at("flags").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::MalformedFile, std::string("metrics JSON: ") + e.what());
    }
    return r;
}

}  // namespace ecgpcg
