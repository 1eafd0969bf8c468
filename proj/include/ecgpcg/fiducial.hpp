#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecgpcg/types.hpp"

namespace ecgpcg {

enum class FiducialType { QrsOn, RPeak, QrsOff, TOn, TPeak, TOff };

inline constexpr std::array<FiducialType, 6> kFiducialTypes{
    FiducialType::QrsOn, FiducialType::RPeak, FiducialType::QrsOff,
    FiducialType::TOn,   FiducialType::TPeak, FiducialType::TOff,
};

const char* fiducial_type_name(FiducialType t);

// One-to-one nearest-neighbor pairing outcome for a single landmark type.
// Every pair sits within tolerance_s; unpaired annotations count as misses.
struct MatchResult {
    FiducialType fiducial_type = FiducialType::RPeak;
    std::vector<std::pair<double, double>> pairs;  // (reference_time, detected_time)
    std::size_t misses = 0;
    double tolerance_s = 0.2;
};

struct FiducialErrorStats {
    double mae_ms = 0.0;
    double rmse_ms = 0.0;
    std::size_t n_detected = 0;
    double sensitivity_pct = 0.0;
    bool empty = false;  // no matched pairs, error stats reported as zeros
};

// Intervals in seconds per beat whose endpoints are all annotated. Beats
// missing an endpoint are skipped and counted.
struct BiomarkerReport {
    std::vector<double> qt_s;   // t_off - qrs_on
    std::vector<double> qrs_s;  // qrs_off - qrs_on
    std::size_t skipped_qt = 0;
    std::size_t skipped_qrs = 0;
};

struct IntervalErrorStats {
    double mae_ms = 0.0;
    double rmse_ms = 0.0;
    std::size_t n_beats = 0;
};

struct BiomarkerErrors {
    IntervalErrorStats qt;
    IntervalErrorStats qrs;
};

// Energy-based peak picker: zero-phase 8-20 Hz bandpass, squared, smoothed
// with a 120 ms moving average, adaptive threshold with a 250 ms refractory
// period. Returns strictly increasing times in seconds.
std::vector<double> detect_rpeaks(std::span<const double> ecg, int fs);

// Times of one landmark type across beats, skipping absent entries.
std::vector<double> landmark_times(const FiducialSet& fid, FiducialType type);

MatchResult match_landmark(std::span<const double> reference, std::span<const double> detected,
                           FiducialType type, double tolerance_s = 0.2);

std::array<MatchResult, 6> match_fiducials(const FiducialSet& reference,
                                           const FiducialSet& detected,
                                           double tolerance_s = 0.2);

FiducialErrorStats fiducial_errors(const MatchResult& matches, std::size_t total_annotated);

BiomarkerReport biomarkers(const FiducialSet& fid);

// Beats are aligned by r_peak within tolerance first; interval stats cover the
// aligned beats where both sides define the interval.
BiomarkerErrors biomarker_errors(const FiducialSet& reference, const FiducialSet& estimated,
                                 double tolerance_s = 0.2);

// CSV with one column per landmark type and rows mae_ms, rmse_ms, n,
// sensitivity_pct.
std::string fiducial_error_table_csv(const std::array<FiducialErrorStats, 6>& stats);

}  // namespace ecgpcg
