#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ecgpcg {

enum class SchemeKind {
    Causal,
    AntiCausal,
    NonCausal,
};

enum class Direction {
    EcgToPcg,
    PcgToEcg,
};

enum class TargetKind {
    RawWaveform,
    Envelope,
};

const char* scheme_kind_name(SchemeKind k);
SchemeKind scheme_kind_from_name(const std::string& name);
const char* direction_name(Direction d);
Direction direction_from_name(const std::string& name);
const char* target_kind_name(TargetKind k);
TargetKind target_kind_from_name(const std::string& name);

struct WindowScheme {
    SchemeKind kind = SchemeKind::Causal;
    double delta_t_s = 0.5;

    // Samples in one input window: round(dt*fs)+1 one-sided,
    // round(2*dt*fs)+1 symmetric.
    int input_len(double fs) const;
};

// Interval covered by the input window for a target at time t. Causal looks
// back, anti-causal looks ahead, non-causal straddles. Bounds may leave the
// record; dataset construction filters those targets out.
std::pair<double, double> window_bounds(double t, const WindowScheme& scheme);

struct WindowedDataset {
    Eigen::MatrixXd inputs;  // one window per row
    Eigen::VectorXd targets;
    std::vector<double> target_times;
    int input_len = 0;
    int fs = 0;
    WindowScheme scheme;
    Direction direction = Direction::EcgToPcg;
    TargetKind target_kind = TargetKind::RawWaveform;

    std::size_t size() const { return target_times.size(); }
};

WindowedDataset build_dataset(const std::vector<double>& input_series,
                              const std::vector<double>& target_series, double fs,
                              const WindowScheme& scheme, double stride_s,
                              TargetKind target_kind = TargetKind::RawWaveform,
                              Direction direction = Direction::EcgToPcg);

// Same pairing rule, but windows and targets must fall entirely inside one of
// the given half-open sample ranges. Keeps fold construction free of
// cross-boundary leakage.
WindowedDataset build_dataset_segments(const std::vector<double>& input_series,
                                       const std::vector<double>& target_series, double fs,
                                       const WindowScheme& scheme, double stride_s,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& segments,
                                       TargetKind target_kind = TargetKind::RawWaveform,
                                       Direction direction = Direction::EcgToPcg);

void save_dataset(const std::string& path, const WindowedDataset& ds);
WindowedDataset load_dataset(const std::string& path);

enum class Protocol {
    WithinSubject10Fold,
    CrossSubjectLOOCV,
};

struct Fold {
    std::vector<int> train;
    std::vector<int> test;
};

struct SplitPlan {
    Protocol protocol = Protocol::WithinSubject10Fold;
    std::vector<Fold> folds;
    // For the within-subject protocol, unit k covers segments[k] in seconds.
    std::vector<std::pair<double, double>> segments;
};

SplitPlan within_subject_folds(double record_duration_s, double segment_len_s = 180.0,
                               int n_folds = 10);
SplitPlan cross_subject_splits(int n_records);

std::vector<bool> evaluation_mask(double record_duration_s, double fs, double guard_s = 1.0);

}  // namespace ecgpcg
