#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ecgpcg/error.hpp"
#include "ecgpcg/fiducial.hpp"
#include "ecgpcg/synth.hpp"

using namespace ecgpcg;

namespace {

// fully annotated beats on a regular grid, landmark offsets loosely shaped
// like a real cardiac cycle
FiducialSet regular_beats(std::size_t n, double spacing = 1.0, double start = 0.5) {
    FiducialSet fid;
    fid.beats.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = start + spacing * static_cast<double>(i);
        auto& b = fid.beats[i];
        b.qrs_on = r - 0.036;
        b.r_peak = r;
        b.qrs_off = r + 0.036;
        b.t_on = r + 0.21;
        b.t_peak = r + 0.30;
        b.t_off = r + 0.39;
    }
    return fid;
}

FiducialSet jittered(const FiducialSet& ref, double sigma_s, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma_s);
    FiducialSet out = ref;
    for (auto& b : out.beats) {
        for (auto* f : {&b.qrs_on, &b.r_peak, &b.qrs_off, &b.t_on, &b.t_peak, &b.t_off})
            if (*f) **f += dist(rng);
    }
    return out;
}

double nearest_gap(double t, const std::vector<double>& ref) {
    double best = 1e9;
    for (double r : ref) best = std::min(best, std::abs(t - r));
    return best;
}

}  // namespace

TEST_CASE("energy peak picker lands on synthetic beats") {
    SynthConfig cfg;
    cfg.duration_s = 60.0;
    cfg.fs = 1000;
    cfg.mean_hr_bpm = 60.0;
    cfg.noise_std = 0.0;
    cfg.rng_seed = 3;
    const auto [rec, truth] = synth_coupled_record(cfg);

    const auto peaks = detect_rpeaks(rec.ecg, rec.fs);
    CHECK(peaks.size() >= 59);
    CHECK(peaks.size() <= 61);
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        CHECK(peaks[i] > peaks[i - 1]);
        CHECK(peaks[i] - peaks[i - 1] >= 0.25);
    }
    for (double t : peaks) CHECK(nearest_gap(t, truth.r_times) <= 0.02);
}

TEST_CASE("zero signal yields no beats") {
    const std::vector<double> flat(4000, 0.0);
    CHECK(detect_rpeaks(flat, 1000).empty());
}

TEST_CASE("peak picker keeps high sensitivity under noise") {
    SynthConfig cfg;
    cfg.duration_s = 60.0;
    cfg.fs = 1000;
    cfg.mean_hr_bpm = 70.0;
    cfg.noise_std = 0.1;
    cfg.rng_seed = 17;
    const auto [rec, truth] = synth_coupled_record(cfg);

    const auto peaks = detect_rpeaks(rec.ecg, rec.fs);
    const auto m = match_landmark(truth.r_times, peaks, FiducialType::RPeak, 0.05);
    const auto stats = fiducial_errors(m, truth.r_times.size());
    CHECK(stats.sensitivity_pct >= 95.0);
}

TEST_CASE("peak picker rejects bad input") {
    const std::vector<double> short_sig(1500, 0.0);
    try {
        detect_rpeaks(short_sig, 1000);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SignalTooShort);
    }
    const std::vector<double> ok(4000, 0.0);
    try {
        detect_rpeaks(ok, 0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidConfig);
    }
}

TEST_CASE("matching a set against itself is exact") {
    const auto ref = regular_beats(20);
    const auto matches = match_fiducials(ref, ref);
    for (const auto& m : matches) {
        CHECK(m.pairs.size() == 20);
        CHECK(m.misses == 0);
        for (const auto& [r, d] : m.pairs) CHECK(d == r);
    }
}

TEST_CASE("uniform shifts pair inside tolerance and miss outside") {
    const auto ref = regular_beats(20);

    FiducialSet close = ref;
    for (auto& b : close.beats)
        for (auto* f : {&b.qrs_on, &b.r_peak, &b.qrs_off, &b.t_on, &b.t_peak, &b.t_off})
            **f += 0.050;
    for (const auto& m : match_fiducials(ref, close)) {
        CHECK(m.pairs.size() == 20);
        CHECK(m.misses == 0);
        for (const auto& [r, d] : m.pairs) CHECK(d - r == doctest::Approx(0.050).epsilon(1e-12));
    }

    FiducialSet far = ref;
    for (auto& b : far.beats)
        for (auto* f : {&b.qrs_on, &b.r_peak, &b.qrs_off, &b.t_on, &b.t_peak, &b.t_off})
            **f += 0.300;
    for (const auto& m : match_fiducials(ref, far)) {
        CHECK(m.pairs.empty());
        CHECK(m.misses == 20);
    }
}

TEST_CASE("error stats match hand arithmetic") {
    MatchResult m;
    m.fiducial_type = FiducialType::RPeak;
    m.pairs = {{1.0, 1.010}, {2.0, 1.980}, {3.0, 3.030}};
    m.misses = 1;

    const auto s = fiducial_errors(m, 4);
    CHECK(s.mae_ms == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(s.rmse_ms == doctest::Approx(21.602468994692867).epsilon(1e-9));
    CHECK(s.n_detected == 3);
    CHECK(s.sensitivity_pct == doctest::Approx(75.0).epsilon(1e-12));
    CHECK(s.n_detected + m.misses == 4);
    CHECK_FALSE(s.empty);

    MatchResult none;
    none.misses = 5;
    const auto z = fiducial_errors(none, 5);
    CHECK(z.empty);
    CHECK(z.mae_ms == 0.0);
    CHECK(z.rmse_ms == 0.0);
    CHECK(z.n_detected == 0);
    CHECK(z.sensitivity_pct == 0.0);

    try {
        fiducial_errors(m, 2);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
}

TEST_CASE("sensitivity reporting reproduces benchmark table rows") {
    MatchResult cs_env;
    cs_env.fiducial_type = FiducialType::RPeak;
    cs_env.pairs.resize(4387);
    for (std::size_t i = 0; i < cs_env.pairs.size(); ++i)
        cs_env.pairs[i] = {static_cast<double>(i), static_cast<double>(i)};
    cs_env.misses = 4966 - 4387;
    const auto s1 = fiducial_errors(cs_env, 4966);
    CHECK(s1.sensitivity_pct == doctest::Approx(88.34071687474828).epsilon(1e-12));
    CHECK(std::round(s1.sensitivity_pct * 10.0) / 10.0 == 88.3);

    MatchResult ecg_row;
    ecg_row.fiducial_type = FiducialType::RPeak;
    ecg_row.pairs.resize(4916);
    for (std::size_t i = 0; i < ecg_row.pairs.size(); ++i)
        ecg_row.pairs[i] = {static_cast<double>(i), static_cast<double>(i) + 0.0061};
    ecg_row.misses = 4966 - 4916;
    const auto s2 = fiducial_errors(ecg_row, 4966);
    CHECK(s2.mae_ms == doctest::Approx(6.1).epsilon(1e-9));
    CHECK(std::round(s2.sensitivity_pct * 10.0) / 10.0 == 99.0);
}

TEST_CASE("match error magnitudes are direction symmetric") {
    const auto ref = regular_beats(100);
    const auto det = jittered(ref, 0.015, 77);

    const auto fwd = match_fiducials(ref, det);
    const auto rev = match_fiducials(det, ref);
    for (std::size_t k = 0; k < fwd.size(); ++k) {
        std::vector<double> a, b;
        for (const auto& [r, d] : fwd[k].pairs) a.push_back(std::abs(d - r));
        for (const auto& [r, d] : rev[k].pairs) b.push_back(std::abs(d - r));
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
}

TEST_CASE("injected jitter shows up in the recovered error stats") {
    const std::size_t n = 600;
    const auto ref = regular_beats(n);
    const auto det = jittered(ref, 0.015, 123);

    const auto matches = match_fiducials(ref, det);
    for (const auto& m : matches) {
        const auto s = fiducial_errors(m, n);
        CHECK(s.sensitivity_pct == doctest::Approx(100.0).epsilon(1e-12));
        CHECK(s.n_detected + m.misses == n);
        CHECK(s.rmse_ms >= 15.0 * 0.85);
        CHECK(s.rmse_ms <= 15.0 * 1.15);
    }
}

TEST_CASE("interval extraction follows the annotation arithmetic") {
    FiducialSet fid;
    fid.beats.resize(3);
    fid.beats[0].qrs_on = 0.10;
    fid.beats[0].qrs_off = 0.19;
    fid.beats[0].t_off = 0.46;
    fid.beats[1].qrs_on = 1.10;
    fid.beats[1].qrs_off = 1.18;
    fid.beats[2].qrs_on = 2.10;
    fid.beats[2].t_off = 2.48;

    const auto rep = biomarkers(fid);
    REQUIRE(rep.qt_s.size() == 2);
    REQUIRE(rep.qrs_s.size() == 2);
    CHECK(rep.qt_s[0] == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(rep.qrs_s[0] == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(rep.qt_s[1] == doctest::Approx(0.38).epsilon(1e-12));
    CHECK(rep.qrs_s[1] == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(rep.skipped_qt == 1);
    CHECK(rep.skipped_qrs == 1);

    const auto full = regular_beats(40);
    const auto all = biomarkers(full);
    CHECK(all.qt_s.size() == 40);
    CHECK(all.qrs_s.size() == 40);
    CHECK(all.skipped_qt == 0);
    CHECK(all.skipped_qrs == 0);
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(all.qt_s[i] > 0.0);
        CHECK(all.qrs_s[i] > 0.0);
        CHECK(all.qrs_s[i] <= all.qt_s[i]);
    }
}

TEST_CASE("synthesized annotations produce ordered positive intervals") {
    SynthConfig cfg;
    cfg.duration_s = 30.0;
    cfg.fs = 1000;
    cfg.mean_hr_bpm = 72.0;
    cfg.rng_seed = 9;
    const auto [rec, truth] = synth_coupled_record(cfg);

    const auto rep = biomarkers(truth.fiducials);
    CHECK(rep.qt_s.size() == truth.fiducials.size());
    CHECK(rep.skipped_qt == 0);
    for (std::size_t i = 0; i < rep.qt_s.size(); ++i) {
        CHECK(rep.qt_s[i] > 0.0);
        CHECK(rep.qrs_s[i] > 0.0);
        CHECK(rep.qrs_s[i] <= rep.qt_s[i]);
    }
}

TEST_CASE("interval errors cancel common shifts and see lone ones") {
    const auto ref = regular_beats(10);

    const auto same = biomarker_errors(ref, ref);
    CHECK(same.qt.mae_ms == 0.0);
    CHECK(same.qt.rmse_ms == 0.0);
    CHECK(same.qt.n_beats == 10);
    CHECK(same.qrs.mae_ms == 0.0);
    CHECK(same.qrs.n_beats == 10);

    FiducialSet both = ref;
    for (auto& b : both.beats) {
        *b.qrs_on += 0.020;
        *b.t_off += 0.020;
    }
    const auto e_both = biomarker_errors(ref, both);
    CHECK(e_both.qt.mae_ms == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(e_both.qrs.mae_ms == doctest::Approx(20.0).epsilon(1e-9));

    FiducialSet toff_only = ref;
    for (auto& b : toff_only.beats) *b.t_off += 0.020;
    const auto e_toff = biomarker_errors(ref, toff_only);
    CHECK(e_toff.qt.mae_ms == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(e_toff.qt.rmse_ms == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(e_toff.qrs.mae_ms == doctest::Approx(0.0).epsilon(1e-9));

    FiducialSet far = ref;
    for (auto& b : far.beats) *b.r_peak += 0.5;
    try {
        biomarker_errors(ref, far);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoMatchedBeats);
    }
}

TEST_CASE("error table renders one column per landmark") {
    std::array<FiducialErrorStats, 6> stats;
    for (std::size_t i = 0; i < 6; ++i) {
        stats[i].mae_ms = 10.0 + static_cast<double>(i);
        stats[i].rmse_ms = 12.0 + static_cast<double>(i);
        stats[i].n_detected = 100 + i;
        stats[i].sensitivity_pct = 90.0 + static_cast<double>(i);
    }
    const auto csv = fiducial_error_table_csv(stats);
    CHECK(csv.find("stat,qrs_on,r_peak,qrs_off,t_on,t_peak,t_off\n") == 0);
    CHECK(csv.find("\nmae_ms,10,") != std::string::npos);
    CHECK(csv.find("\nrmse_ms,12,") != std::string::npos);
    CHECK(csv.find("\nn,100,") != std::string::npos);
    CHECK(csv.find("\nsensitivity_pct,90,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
