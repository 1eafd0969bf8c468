#include "ecgpcg/fiducial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "ecgpcg/error.hpp"
#include "ecgpcg/preprocess.hpp"

namespace ecgpcg {

namespace {

const std::optional<double> BeatAnnotation::* landmark_member(FiducialType t) {
    switch (t) {
        case FiducialType::QrsOn: return &BeatAnnotation::qrs_on;
        case FiducialType::RPeak: return &BeatAnnotation::r_peak;
        case FiducialType::QrsOff: return &BeatAnnotation::qrs_off;
        case FiducialType::TOn: return &BeatAnnotation::t_on;
        case FiducialType::TPeak: return &BeatAnnotation::t_peak;
        case FiducialType::TOff: return &BeatAnnotation::t_off;
    }
    raise(ErrorKind::InvalidArgument, "unknown landmark type");
}

// One-to-one pairing by ascending |time difference|; ties resolve by index so
// the outcome is deterministic. Input arrays must be sorted ascending.
std::vector<std::pair<std::size_t, std::size_t>> greedy_pairs(const std::vector<double>& ref,
                                                              const std::vector<double>& det,
                                                              double tolerance_s) {
    struct Cand {
        double gap;
        std::size_t r, d;
    };
    std::vector<Cand> cands;
    std::size_t lo = 0;
    for (std::size_t r = 0; r < ref.size(); ++r) {
        while (lo < det.size() && det[lo] < ref[r] - tolerance_s) ++lo;
        for (std::size_t d = lo; d < det.size() && det[d] <= ref[r] + tolerance_s; ++d)
            cands.push_back({std::abs(det[d] - ref[r]), r, d});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.gap != b.gap) return a.gap < b.gap;
        if (a.r != b.r) return a.r < b.r;
        return a.d < b.d;
    });
    std::vector<char> r_used(ref.size(), 0), d_used(det.size(), 0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& c : cands) {
        if (r_used[c.r] || d_used[c.d]) continue;
        r_used[c.r] = d_used[c.d] = 1;
        pairs.emplace_back(c.r, c.d);
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

IntervalErrorStats interval_stats(const std::vector<double>& diffs_s) {
    IntervalErrorStats s;
    s.n_beats = diffs_s.size();
    if (diffs_s.empty()) return s;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (double d : diffs_s) {
        const double ms = d * 1000.0;
        abs_sum += std::abs(ms);
        sq_sum += ms * ms;
    }
    const double n = static_cast<double>(diffs_s.size());
    s.mae_ms = abs_sum / n;
    s.rmse_ms = std::sqrt(sq_sum / n);
    return s;
}

}  // namespace

const char* fiducial_type_name(FiducialType t) {
    switch (t) {
        case FiducialType::QrsOn: return "qrs_on";
        case FiducialType::RPeak: return "r_peak";
        case FiducialType::QrsOff: return "qrs_off";
        case FiducialType::TOn: return "t_on";
        case FiducialType::TPeak: return "t_peak";
        case FiducialType::TOff: return "t_off";
    }
    return "unknown";
}

std::vector<double> detect_rpeaks(std::span<const double> ecg, int fs) {
    if (fs <= 0) raise(ErrorKind::InvalidConfig, "sample rate must be positive");
    const double fs_d = static_cast<double>(fs);
    if (static_cast<double>(ecg.size()) < 2.0 * fs_d)
        raise(ErrorKind::SignalTooShort, "beat picking needs at least 2 s of signal");

    const auto bp = bandpass(ecg, fs_d, 8.0, 20.0);
    std::vector<double> energy(bp.size());
    for (std::size_t i = 0; i < bp.size(); ++i) energy[i] = bp[i] * bp[i];
    const auto smooth = moving_stats(energy, fs_d, 0.12).m;

    const std::size_t n = smooth.size();
    const auto warm = static_cast<std::size_t>(std::llround(2.0 * fs_d));
    double spk = 0.0, npk = 0.0;
    for (std::size_t i = 0; i < std::min(warm, n); ++i) {
        spk = std::max(spk, smooth[i]);
        npk += smooth[i];
    }
    npk /= static_cast<double>(std::min(warm, n));

    const auto refractory = static_cast<std::size_t>(std::llround(0.25 * fs_d));
    const auto refine_r = static_cast<std::size_t>(std::llround(0.06 * fs_d));

    std::vector<std::size_t> picks;
    std::vector<double> pick_val;
    double thr = npk + 0.25 * (spk - npk);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1])) continue;
        const double v = smooth[i];
        if (v > thr) {
            if (!picks.empty() && i - picks.back() < refractory) {
                // keep the stronger candidate inside the refractory window
                if (v > pick_val.back()) {
                    picks.back() = i;
                    pick_val.back() = v;
                }
            } else {
                picks.push_back(i);
                pick_val.push_back(v);
                spk = 0.875 * spk + 0.125 * v;
            }
        } else {
            npk = 0.875 * npk + 0.125 * v;
        }
        thr = npk + 0.25 * (spk - npk);
    }

    // move each pick onto the strongest raw energy sample nearby
    std::vector<std::size_t> refined;
    refined.reserve(picks.size());
    for (std::size_t c : picks) {
        const std::size_t a = c > refine_r ? c - refine_r : 0;
        const std::size_t b = std::min(n - 1, c + refine_r);
        std::size_t best = a;
        for (std::size_t j = a + 1; j <= b; ++j)
            if (energy[j] > energy[best]) best = j;
        refined.push_back(best);
    }

    std::vector<double> times;
    times.reserve(refined.size());
    for (std::size_t idx : refined) {
        const double t = static_cast<double>(idx) / fs_d;
        if (!times.empty() && t - times.back() < 0.25) {
            if (energy[idx] > energy[static_cast<std::size_t>(std::llround(times.back() * fs_d))])
                times.back() = t;
        } else {
            times.push_back(t);
        }
    }
    return times;
}

std::vector<double> landmark_times(const FiducialSet& fid, FiducialType type) {
    const auto member = landmark_member(type);
    std::vector<double> out;
    out.reserve(fid.beats.size());
    for (const auto& beat : fid.beats)
        if (beat.*member) out.push_back(*(beat.*member));
    return out;
}

MatchResult match_landmark(std::span<const double> reference, std::span<const double> detected,
                           FiducialType type, double tolerance_s) {
    if (tolerance_s <= 0.0) raise(ErrorKind::InvalidArgument, "tolerance must be positive");
    MatchResult out;
    out.fiducial_type = type;
    out.tolerance_s = tolerance_s;

    std::vector<double> ref(reference.begin(), reference.end());
    std::vector<double> det(detected.begin(), detected.end());
    std::sort(ref.begin(), ref.end());
    std::sort(det.begin(), det.end());

    const auto pairs = greedy_pairs(ref, det, tolerance_s);
    out.pairs.reserve(pairs.size());
    for (const auto& [r, d] : pairs) out.pairs.emplace_back(ref[r], det[d]);
    out.misses = ref.size() - pairs.size();
    return out;
}

std::array<MatchResult, 6> match_fiducials(const FiducialSet& reference,
                                           const FiducialSet& detected, double tolerance_s) {
    std::array<MatchResult, 6> out;
    for (std::size_t i = 0; i < kFiducialTypes.size(); ++i) {
        const auto type = kFiducialTypes[i];
        out[i] = match_landmark(landmark_times(reference, type), landmark_times(detected, type),
                                type, tolerance_s);
    }
    return out;
}

FiducialErrorStats fiducial_errors(const MatchResult& matches, std::size_t total_annotated) {
    if (total_annotated < matches.pairs.size() + matches.misses)
        raise(ErrorKind::InvalidArgument, "annotated total below pair and miss count");
    FiducialErrorStats s;
    s.n_detected = matches.pairs.size();
    if (total_annotated > 0)
        s.sensitivity_pct =
            100.0 * static_cast<double>(s.n_detected) / static_cast<double>(total_annotated);
    if (matches.pairs.empty()) {
        s.empty = true;
        return s;
    }
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& [r, d] : matches.pairs) {
        const double ms = (d - r) * 1000.0;
        abs_sum += std::abs(ms);
        sq_sum += ms * ms;
    }
    const double n = static_cast<double>(matches.pairs.size());
    s.mae_ms = abs_sum / n;
    s.rmse_ms = std::sqrt(sq_sum / n);
    return s;
}

BiomarkerReport biomarkers(const FiducialSet& fid) {
    BiomarkerReport out;
    for (const auto& beat : fid.beats) {
        if (beat.qrs_on && beat.t_off)
            out.qt_s.push_back(*beat.t_off - *beat.qrs_on);
        else
            ++out.skipped_qt;
        if (beat.qrs_on && beat.qrs_off)
            out.qrs_s.push_back(*beat.qrs_off - *beat.qrs_on);
        else
            ++out.skipped_qrs;
    }
    return out;
}

BiomarkerErrors biomarker_errors(const FiducialSet& reference, const FiducialSet& estimated,
                                 double tolerance_s) {
    std::vector<double> ref_t, est_t;
    std::vector<std::size_t> ref_beat, est_beat;
    for (std::size_t i = 0; i < reference.beats.size(); ++i)
        if (reference.beats[i].r_peak) {
            ref_t.push_back(*reference.beats[i].r_peak);
            ref_beat.push_back(i);
        }
    for (std::size_t i = 0; i < estimated.beats.size(); ++i)
        if (estimated.beats[i].r_peak) {
            est_t.push_back(*estimated.beats[i].r_peak);
            est_beat.push_back(i);
        }

    std::vector<std::size_t> order_r(ref_t.size()), order_e(est_t.size());
    for (std::size_t i = 0; i < order_r.size(); ++i) order_r[i] = i;
    for (std::size_t i = 0; i < order_e.size(); ++i) order_e[i] = i;
    std::sort(order_r.begin(), order_r.end(),
              [&](std::size_t a, std::size_t b) { return ref_t[a] < ref_t[b]; });
    std::sort(order_e.begin(), order_e.end(),
              [&](std::size_t a, std::size_t b) { return est_t[a] < est_t[b]; });
    std::vector<double> ref_sorted(ref_t.size()), est_sorted(est_t.size());
    for (std::size_t i = 0; i < order_r.size(); ++i) ref_sorted[i] = ref_t[order_r[i]];
    for (std::size_t i = 0; i < order_e.size(); ++i) est_sorted[i] = est_t[order_e[i]];

    const auto pairs = greedy_pairs(ref_sorted, est_sorted, tolerance_s);
    if (pairs.empty()) raise(ErrorKind::NoMatchedBeats, "no beats aligned by r peak");

    std::vector<double> d_qt, d_qrs;
    for (const auto& [r, d] : pairs) {
        const auto& a = reference.beats[ref_beat[order_r[r]]];
        const auto& b = estimated.beats[est_beat[order_e[d]]];
        if (a.qrs_on && a.t_off && b.qrs_on && b.t_off)
            d_qt.push_back((*b.t_off - *b.qrs_on) - (*a.t_off - *a.qrs_on));
        if (a.qrs_on && a.qrs_off && b.qrs_on && b.qrs_off)
            d_qrs.push_back((*b.qrs_off - *b.qrs_on) - (*a.qrs_off - *a.qrs_on));
    }
    BiomarkerErrors out;
    out.qt = interval_stats(d_qt);
    out.qrs = interval_stats(d_qrs);
    return out;
}

std::string fiducial_error_table_csv(const std::array<FiducialErrorStats, 6>& stats) {
    std::ostringstream os;
    os << "stat";
    for (const auto t : kFiducialTypes) os << ',' << fiducial_type_name(t);
    os << '\n';
    char buf[64];
    const auto row = [&](const char* label, auto value_of) {
        os << label;
        for (const auto& s : stats) {
            std::snprintf(buf, sizeof buf, "%.17g", value_of(s));
            os << ',' << buf;
        }
        os << '\n';
    };
    row("mae_ms", [](const FiducialErrorStats& s) { return s.mae_ms; });
    row("rmse_ms", [](const FiducialErrorStats& s) { return s.rmse_ms; });
    row("n", [](const FiducialErrorStats& s) { return static_cast<double>(s.n_detected); });
    row("sensitivity_pct", [](const FiducialErrorStats& s) { return s.sensitivity_pct; });
    return os.str();
}

}  // namespace ecgpcg
