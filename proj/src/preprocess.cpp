#include "ecgpcg/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "ecgpcg/dsp.hpp"
#include "ecgpcg/error.hpp"
#include "ecgpcg/kv.hpp"

namespace ecgpcg {

void PreprocessConfig::validate(int fs) const {
    for (const Band& b : {ecg_band, pcg_band}) {
        if (!(b.lo_hz > 0.0) || !(b.lo_hz < b.hi_hz) || !(b.hi_hz < fs / 2.0))
            raise(ErrorKind::InvalidBand, "band [" + std::to_string(b.lo_hz) + ", " +
                                              std::to_string(b.hi_hz) + "] invalid at fs " +
                                              std::to_string(fs));
    }
    if (!(notch_hz > 0.0) || !(notch_hz < fs / 2.0))
        raise(ErrorKind::InvalidFrequency, "notch frequency outside (0, fs/2)");
    if (!(notch_q > 0.0)) raise(ErrorKind::InvalidConfig, "notch_q must be positive");
    if (!(clip_k > 0.0)) raise(ErrorKind::InvalidConfig, "clip_k must be positive");
    if (!(clip_window_s > 0.0) || !(norm_window_s > 0.0))
        raise(ErrorKind::InvalidConfig, "window lengths must be positive");
    if (target_fs <= 0) raise(ErrorKind::InvalidConfig, "target_fs must be positive");
    if (fs % target_fs != 0)
        raise(ErrorKind::NonIntegerFactor, "target_fs " + std::to_string(target_fs) +
                                               " does not divide fs " + std::to_string(fs));
}

std::string PreprocessConfig::to_kv() const {
    kv::Map m;
    m["ecg_band_lo"] = kv::format_num(ecg_band.lo_hz);
    m["ecg_band_hi"] = kv::format_num(ecg_band.hi_hz);
    m["pcg_band_lo"] = kv::format_num(pcg_band.lo_hz);
    m["pcg_band_hi"] = kv::format_num(pcg_band.hi_hz);
    m["notch_hz"] = kv::format_num(notch_hz);
    m["notch_q"] = kv::format_num(notch_q);
    m["clip_k"] = kv::format_num(clip_k);
    m["clip_window_s"] = kv::format_num(clip_window_s);
    m["norm_window_s"] = kv::format_num(norm_window_s);
    m["target_fs"] = std::to_string(target_fs);
    return kv::serialize(m);
}

PreprocessConfig PreprocessConfig::from_kv(const std::string& text) {
    const kv::Map m = kv::parse(text);
    PreprocessConfig c;
    c.ecg_band.lo_hz = kv::get_num(m, "ecg_band_lo", c.ecg_band.lo_hz);
    c.ecg_band.hi_hz = kv::get_num(m, "ecg_band_hi", c.ecg_band.hi_hz);
    c.pcg_band.lo_hz = kv::get_num(m, "pcg_band_lo", c.pcg_band.lo_hz);
    c.pcg_band.hi_hz = kv::get_num(m, "pcg_band_hi", c.pcg_band.hi_hz);
    c.notch_hz = kv::get_num(m, "notch_hz", c.notch_hz);
    c.notch_q = kv::get_num(m, "notch_q", c.notch_q);
    c.clip_k = kv::get_num(m, "clip_k", c.clip_k);
    c.clip_window_s = kv::get_num(m, "clip_window_s", c.clip_window_s);
    c.norm_window_s = kv::get_num(m, "norm_window_s", c.norm_window_s);
    c.target_fs = static_cast<int>(kv::get_int(m, "target_fs", c.target_fs));
    return c;
}

std::vector<double> bandpass(std::span<const double> x, double fs, double lo_hz, double hi_hz) {
    auto sos = dsp::butter_bandpass(4, lo_hz, hi_hz, fs);
    return dsp::filtfilt(sos, x);
}

std::vector<double> notch(std::span<const double> x, double fs, double f0_hz, double q) {
    return dsp::filtfilt({dsp::notch_biquad(f0_hz, q, fs)}, x);
}

MovingStats moving_stats(std::span<const double> x, double fs, double window_s) {
    const std::size_t n = x.size();
    const double win = window_s * fs;
    if (win < 2.0) raise(ErrorKind::WindowTooShort, "window covers fewer than 2 samples");
    if (n == 0) raise(ErrorKind::SignalTooShort, "empty signal");

    // Center the accumulation on the global mean so the prefix sums stay
    // small relative to the per-window spread.
    double gm = 0.0;
    for (double v : x) gm += v;
    gm /= static_cast<double>(n);

    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - gm;
        s1[i + 1] = s1[i] + d;
        s2[i + 1] = s2[i] + d * d;
    }

    const long half = static_cast<long>(std::llround(win)) / 2;
    MovingStats out;
    out.window_s = window_s;
    out.m.resize(n);
    out.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const long lo = std::max<long>(0, static_cast<long>(i) - half);
        const long hi = std::min<long>(static_cast<long>(n) - 1, static_cast<long>(i) + half);
        const double cnt = static_cast<double>(hi - lo + 1);
        const double mean_d = (s1[hi + 1] - s1[lo]) / cnt;
        const double var = std::max(0.0, (s2[hi + 1] - s2[lo]) / cnt - mean_d * mean_d);
        out.m[i] = gm + mean_d;
        out.sigma[i] = std::sqrt(var);
    }
    return out;
}

std::vector<double> clip_outliers(std::span<const double> x, double fs, double k,
                                  double window_s) {
    if (!(k > 0.0)) raise(ErrorKind::InvalidConfig, "clip threshold must be positive");
    const MovingStats st = moving_stats(x, fs, window_s);
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double lo = st.m[i] - k * st.sigma[i];
        const double hi = st.m[i] + k * st.sigma[i];
        out[i] = std::clamp(out[i], lo, hi);
    }
    return out;
}

std::vector<double> adaptive_normalize(std::span<const double> x, double fs, double window_s) {
    const MovingStats st = moving_stats(x, fs, window_s);

    double rms = 0.0;
    for (double v : x) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(x.size()));
    const double eps = 1e-8 * rms;
    if (rms == 0.0) raise(ErrorKind::DegenerateSegment, "signal is identically zero");

    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (st.sigma[i] <= eps)
            raise(ErrorKind::DegenerateSegment,
                  "flat segment near sample " + std::to_string(i) + " (sigma below floor)");
        out[i] = (x[i] - st.m[i]) / st.sigma[i];
    }
    return out;
}

std::vector<double> resample_decimate(std::span<const double> x, int fs_in, int fs_out) {
    if (fs_in <= 0 || fs_out <= 0) raise(ErrorKind::InvalidConfig, "sample rates must be positive");
    if (fs_in % fs_out != 0)
        raise(ErrorKind::NonIntegerFactor, std::to_string(fs_out) + " does not divide " +
                                               std::to_string(fs_in));
    const int factor = fs_in / fs_out;
    if (factor == 1) return std::vector<double>(x.begin(), x.end());

    const std::size_t taps = static_cast<std::size_t>(8 * factor + 1);
    const auto h = dsp::kaiser_lowpass_fir(taps, 0.45 * fs_out, fs_in, 8.0);
    const long m = static_cast<long>(taps - 1) / 2;
    const long n = static_cast<long>(x.size());

    std::vector<double> out((x.size() + factor - 1) / factor);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const long center = static_cast<long>(k) * factor;
        double acc = 0.0;
        const long j0 = std::max<long>(0, m - center);
        const long j1 = std::min<long>(static_cast<long>(taps) - 1, n - 1 + m - center);
        for (long j = j0; j <= j1; ++j) acc += h[j] * x[center + j - m];
        out[k] = acc;
    }
    return out;
}

namespace {

template <typename F>
std::vector<double> stage(const char* name, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        raise(e.kind(), std::string(name) + ": " + e.message());
    }
}

}  // namespace

Record preprocess_pipeline(const Record& record, const PreprocessConfig& cfg) {
    record.validate();
    cfg.validate(record.fs);
    const double fs = record.fs;

    auto ecg = stage("ecg bandpass", [&] {
        return bandpass(record.ecg, fs, cfg.ecg_band.lo_hz, cfg.ecg_band.hi_hz);
    });
    ecg = stage("ecg notch", [&] { return notch(ecg, fs, cfg.notch_hz, cfg.notch_q); });
    ecg = stage("ecg clip", [&] { return clip_outliers(ecg, fs, cfg.clip_k, cfg.clip_window_s); });
    ecg = stage("ecg normalize", [&] { return adaptive_normalize(ecg, fs, cfg.norm_window_s); });
    ecg = stage("ecg resample", [&] { return resample_decimate(ecg, record.fs, cfg.target_fs); });

    auto pcg = stage("pcg bandpass", [&] {
        return bandpass(record.pcg, fs, cfg.pcg_band.lo_hz, cfg.pcg_band.hi_hz);
    });
    pcg = stage("pcg clip", [&] { return clip_outliers(pcg, fs, cfg.clip_k, cfg.clip_window_s); });
    pcg = stage("pcg normalize", [&] { return adaptive_normalize(pcg, fs, cfg.norm_window_s); });
    pcg = stage("pcg resample", [&] { return resample_decimate(pcg, record.fs, cfg.target_fs); });

    Record out = record;
    out.fs = cfg.target_fs;
    out.ecg = std::move(ecg);
    out.pcg = std::move(pcg);
    out.validate();
    return out;
}

}  // namespace ecgpcg
