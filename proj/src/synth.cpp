#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ecgpcg/error.hpp"
#include "ecgpcg/kv.hpp"
#include "ecgpcg/synth.hpp"

namespace ecgpcg {

namespace {

constexpr double kPi = std::numbers::pi;

// Shape constants for the synthetic beat. Non-normative: only the timing and
// coupling structure matters downstream; amplitudes and widths were picked to
// look plausible on a plot.
constexpr double kQrsAmp = 1.0, kQrsWidth = 0.012;
constexpr double kPAmp = 0.15, kPWidth = 0.022, kPLead = 0.16;
constexpr double kTAmp = 0.35, kTWidth = 0.045, kTScale = 0.30;
constexpr double kS1Freq = 35.0, kS1Width = 0.022;
constexpr double kS2Freq = 55.0, kS2Width = 0.018, kS2Lag = 0.02;
constexpr double kFirCenter = 0.012, kFirWidth = 0.005, kFirSpan = 0.024, kFirPeakGain = 0.8;

const char* trajectory_name(HrTrajectory t) {
    return t == HrTrajectory::Constant ? "constant" : "ramp_up_down";
}

HrTrajectory trajectory_from_name(const std::string& s) {
    if (s == "constant") return HrTrajectory::Constant;
    if (s == "ramp_up_down") return HrTrajectory::RampUpDown;
    raise(ErrorKind::MalformedFile, "unknown hr_trajectory '" + s + "'");
}

const char* coupling_name(CouplingKind c) {
    return c == CouplingKind::LinearFilter ? "linear_filter" : "nonlinear_amplitude";
}

CouplingKind coupling_from_name(const std::string& s) {
    if (s == "linear_filter") return CouplingKind::LinearFilter;
    if (s == "nonlinear_amplitude") return CouplingKind::NonlinearAmplitude;
    raise(ErrorKind::MalformedFile, "unknown coupling '" + s + "'");
}

void add_gaussian(std::vector<double>& x, double fs, double center, double amp, double width) {
    const long n = static_cast<long>(x.size());
    const long lo = std::max(0L, std::lround((center - 5.0 * width) * fs));
    const long hi = std::min(n - 1, std::lround((center + 5.0 * width) * fs));
    for (long i = lo; i <= hi; ++i) {
        const double t = static_cast<double>(i) / fs - center;
        x[i] += amp * std::exp(-t * t / (2.0 * width * width));
    }
}

void add_burst(std::vector<double>& x, double fs, double center, double amp, double freq,
               double width) {
    const long n = static_cast<long>(x.size());
    const long lo = std::max(0L, std::lround((center - 4.0 * width) * fs));
    const long hi = std::min(n - 1, std::lround((center + 4.0 * width) * fs));
    for (long i = lo; i <= hi; ++i) {
        const double t = static_cast<double>(i) / fs - center;
        x[i] += amp * std::sin(2.0 * kPi * freq * t) * std::exp(-t * t / (2.0 * width * width));
    }
}

// kernel normalized so its response to a lone unit beat spike peaks at
// kFirPeakGain
std::vector<double> make_fir_kernel(double fs) {
    const long taps = std::lround(kFirSpan * fs) + 1;
    std::vector<double> k(taps);
    for (long j = 0; j < taps; ++j) {
        const double t = static_cast<double>(j) / fs - kFirCenter;
        k[j] = t * std::exp(-t * t / (2.0 * kFirWidth * kFirWidth));
    }
    std::vector<double> ref(std::lround(0.2 * fs), 0.0);
    add_gaussian(ref, fs, 0.1, kQrsAmp, kQrsWidth);
    double peak = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double acc = 0.0;
        for (long j = 0; j < taps && j <= static_cast<long>(i); ++j) acc += k[j] * ref[i - j];
        peak = std::max(peak, std::abs(acc));
    }
    for (double& v : k) v *= kFirPeakGain / peak;
    return k;
}

double local_slope(const std::vector<double>& x, double fs, double center, double span) {
    const long n = static_cast<long>(x.size());
    const long lo = std::max(1L, std::lround((center - span) * fs));
    const long hi = std::min(n - 2, std::lround((center + span) * fs));
    double worst = 0.0;
    for (long i = lo; i <= hi; ++i)
        worst = std::max(worst, std::abs((x[i + 1] - x[i - 1]) * fs / 2.0));
    return worst;
}

double squash(double u) { return u * u / (1.0 + u * u); }

}  // namespace

void SynthConfig::validate() const {
    if (!(duration_s > 0.0)) raise(ErrorKind::InvalidConfig, "duration_s must be positive");
    if (duration_s < 3.0) raise(ErrorKind::InvalidConfig, "duration_s too short for one full beat");
    if (fs <= 0) raise(ErrorKind::InvalidConfig, "fs must be positive");
    if (!(mean_hr_bpm >= 20.0 && mean_hr_bpm <= 220.0))
        raise(ErrorKind::InvalidConfig, "mean_hr_bpm outside [20, 220]");
    if (!(electromechanical_delay_s >= 0.0 && electromechanical_delay_s < 0.2))
        raise(ErrorKind::InvalidConfig, "electromechanical_delay_s outside [0, 0.2)");
    if (!(noise_std >= 0.0)) raise(ErrorKind::InvalidConfig, "noise_std must be non-negative");
}

std::string SynthConfig::to_kv() const {
    kv::Map m;
    m["duration_s"] = kv::format_num(duration_s);
    m["fs"] = std::to_string(fs);
    m["mean_hr_bpm"] = kv::format_num(mean_hr_bpm);
    m["hr_trajectory"] = trajectory_name(hr_trajectory);
    m["electromechanical_delay_s"] = kv::format_num(electromechanical_delay_s);
    m["coupling"] = coupling_name(coupling);
    m["noise_std"] = kv::format_num(noise_std);
    m["rng_seed"] = std::to_string(rng_seed);
    return kv::serialize(m);
}

SynthConfig SynthConfig::from_kv(const std::string& text) {
    const kv::Map m = kv::parse(text);
    SynthConfig c;
    c.duration_s = kv::get_num(m, "duration_s", c.duration_s);
    c.fs = static_cast<int>(kv::get_int(m, "fs", c.fs));
    c.mean_hr_bpm = kv::get_num(m, "mean_hr_bpm", c.mean_hr_bpm);
    c.hr_trajectory = trajectory_from_name(
        kv::get(m, "hr_trajectory", trajectory_name(c.hr_trajectory)));
    c.electromechanical_delay_s =
        kv::get_num(m, "electromechanical_delay_s", c.electromechanical_delay_s);
    c.coupling = coupling_from_name(kv::get(m, "coupling", coupling_name(c.coupling)));
    c.noise_std = kv::get_num(m, "noise_std", c.noise_std);
    c.rng_seed = static_cast<std::uint32_t>(kv::get_int(m, "rng_seed", c.rng_seed));
    return c;
}

std::pair<Record, CouplingTruth> synth_coupled_record(const SynthConfig& cfg) {
    cfg.validate();
    const double fs = cfg.fs;
    const double dur = cfg.duration_s;
    const std::size_t n = static_cast<std::size_t>(std::llround(dur * fs));

    // Instantaneous rate: constant, or a triangle spanning 2/3 to 4/3 of the
    // mean so the time average still equals mean_hr_bpm.
    auto hr_at = [&](double t) {
        if (cfg.hr_trajectory == HrTrajectory::Constant) return cfg.mean_hr_bpm;
        const double tri = 1.0 - std::abs(2.0 * t / dur - 1.0);
        return cfg.mean_hr_bpm * (2.0 / 3.0 + 2.0 / 3.0 * tri);
    };

    // Beat clock: R waves fire each time the integrated rate crosses the next
    // whole cycle.
    std::vector<double> r_times;
    {
        double phase = 0.7;  // leaves room for the first P wave
        double next = 1.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double t = static_cast<double>(i) / fs;
            const double dphi = hr_at(t) / 60.0 / fs;
            if (phase + dphi >= next) {
                r_times.push_back(t + (next - phase) / dphi / fs);
                next += 1.0;
            }
            phase += dphi;
        }
    }
    while (!r_times.empty() && r_times.front() < 0.3) r_times.erase(r_times.begin());
    auto rr_of = [&](std::size_t k) {
        if (r_times.size() < 2) return 60.0 / cfg.mean_hr_bpm;
        if (k + 1 < r_times.size()) return r_times[k + 1] - r_times[k];
        return r_times[k] - r_times[k - 1];
    };
    while (!r_times.empty()) {
        const std::size_t k = r_times.size() - 1;
        const double t_off = r_times[k] + kTScale * std::sqrt(rr_of(k)) + 2.0 * kTWidth;
        if (t_off + kS2Lag + 4.0 * kS2Width < dur) break;
        r_times.pop_back();
    }
    if (r_times.empty()) raise(ErrorKind::InvalidConfig, "duration too short to place any beat");

    CouplingTruth truth;
    truth.r_times = r_times;

    // Clean ECG and exact fiducials.
    std::vector<double> ecg(n, 0.0);
    for (std::size_t k = 0; k < r_times.size(); ++k) {
        const double r = r_times[k];
        const double t_center = r + kTScale * std::sqrt(rr_of(k));
        add_gaussian(ecg, fs, r - kPLead, kPAmp, kPWidth);
        add_gaussian(ecg, fs, r, kQrsAmp, kQrsWidth);
        add_gaussian(ecg, fs, t_center, kTAmp, kTWidth);

        BeatAnnotation b;
        b.qrs_on = r - 3.0 * kQrsWidth;
        b.r_peak = r;
        b.qrs_off = r + 3.0 * kQrsWidth;
        b.t_on = t_center - 2.0 * kTWidth;
        b.t_peak = t_center;
        b.t_off = t_center + 2.0 * kTWidth;
        truth.fiducials.beats.push_back(b);
    }

    std::mt19937 rng(cfg.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (cfg.noise_std > 0.0)
        for (double& v : ecg) v += cfg.noise_std * gauss(rng);

    // Heart-sound bursts; under NonlinearAmplitude their height is a squashed
    // function of the observed ECG slope around the triggering landmark.
    std::vector<double> bursts(n, 0.0);
    for (std::size_t k = 0; k < r_times.size(); ++k) {
        const BeatAnnotation& b = truth.fiducials.beats[k];
        const double s1_t = r_times[k] + cfg.electromechanical_delay_s;
        const double s2_t = *b.t_off + kS2Lag;
        double a1 = 1.0, a2 = 0.7;
        if (cfg.coupling == CouplingKind::NonlinearAmplitude) {
            a1 = 0.25 + 1.5 * squash(local_slope(ecg, fs, r_times[k], 0.02) / 40.0);
            a2 = 0.7 * (0.4 + 1.2 * squash(local_slope(ecg, fs, *b.t_peak, 0.03) / 12.0));
        }
        add_burst(bursts, fs, s1_t, a1, kS1Freq, kS1Width);
        add_burst(bursts, fs, s2_t, a2, kS2Freq, kS2Width);
        truth.s1_times.push_back(s1_t);
        truth.s2_times.push_back(s2_t);
    }
    truth.burst_train = bursts;

    std::vector<double> pcg = bursts;
    if (cfg.coupling == CouplingKind::LinearFilter) {
        truth.fir_kernel = make_fir_kernel(fs);
        const long taps = static_cast<long>(truth.fir_kernel.size());
        for (long i = 0; i < static_cast<long>(n); ++i) {
            double acc = 0.0;
            for (long j = 0; j < taps && j <= i; ++j) acc += truth.fir_kernel[j] * ecg[i - j];
            pcg[i] += acc;
        }
    }
    if (cfg.noise_std > 0.0)
        for (double& v : pcg) v += cfg.noise_std * gauss(rng);

    Record rec;
    rec.subject_id = "synth" + std::to_string(cfg.rng_seed);
    rec.scenario = Scenario::Synthetic;
    rec.fs = cfg.fs;
    rec.ecg = std::move(ecg);
    rec.pcg = std::move(pcg);
    rec.fiducials = truth.fiducials;
    rec.provenance = std::string("generated: coupling=") + coupling_name(cfg.coupling) +
                     " hr=" + kv::format_num(cfg.mean_hr_bpm) + " seed=" +
                     std::to_string(cfg.rng_seed);
    rec.validate();
    return {std::move(rec), std::move(truth)};
}

}  // namespace ecgpcg
