#include "ecgpcg/windowing.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

namespace {

constexpr char kCacheMagic[8] = {'E', 'P', 'W', 'D', '0', '0', '0', '1'};

struct NameTable {
    const char* names[3];
};

template <typename E>
E from_table(const char* const* names, int count, const std::string& s, const char* what) {
    for (int i = 0; i < count; ++i)
        if (s == names[i]) return static_cast<E>(i);
    raise(ErrorKind::MalformedFile, std::string("unknown ") + what + " '" + s + "'");
}

const char* const kSchemeNames[] = {"causal", "anti_causal", "non_causal"};
const char* const kDirectionNames[] = {"ecg_to_pcg", "pcg_to_ecg"};
const char* const kTargetNames[] = {"raw_waveform", "envelope"};

}  // namespace

const char* scheme_kind_name(SchemeKind k) { return kSchemeNames[static_cast<int>(k)]; }
SchemeKind scheme_kind_from_name(const std::string& name) {
    return from_table<SchemeKind>(kSchemeNames, 3, name, "scheme");
}
const char* direction_name(Direction d) { return kDirectionNames[static_cast<int>(d)]; }
Direction direction_from_name(const std::string& name) {
    return from_table<Direction>(kDirectionNames, 2, name, "direction");
}
const char* target_kind_name(TargetKind k) { return kTargetNames[static_cast<int>(k)]; }
TargetKind target_kind_from_name(const std::string& name) {
    return from_table<TargetKind>(kTargetNames, 2, name, "target kind");
}

int WindowScheme::input_len(double fs) const {
    if (!(delta_t_s > 0.0)) raise(ErrorKind::InvalidConfig, "delta_t_s must be positive");
    if (kind == SchemeKind::NonCausal)
        return static_cast<int>(std::llround(2.0 * delta_t_s * fs)) + 1;
    return static_cast<int>(std::llround(delta_t_s * fs)) + 1;
}

std::pair<double, double> window_bounds(double t, const WindowScheme& scheme) {
    if (!(scheme.delta_t_s > 0.0)) raise(ErrorKind::InvalidConfig, "delta_t_s must be positive");
    switch (scheme.kind) {
        case SchemeKind::Causal: return {t - scheme.delta_t_s, t};
        case SchemeKind::AntiCausal: return {t, t + scheme.delta_t_s};
        case SchemeKind::NonCausal: return {t - scheme.delta_t_s, t + scheme.delta_t_s};
    }
    raise(ErrorKind::InvalidArgument, "bad scheme kind");
}

WindowedDataset build_dataset_segments(
    const std::vector<double>& input_series, const std::vector<double>& target_series, double fs,
    const WindowScheme& scheme, double stride_s,
    const std::vector<std::pair<std::size_t, std::size_t>>& segments, TargetKind target_kind,
    Direction direction) {
    if (input_series.size() != target_series.size())
        raise(ErrorKind::LengthMismatch, "input and target series lengths differ");
    if (!(stride_s >= 1.0 / fs))
        raise(ErrorKind::InvalidConfig, "stride_s must be at least one sample");

    const long n = static_cast<long>(input_series.size());
    const long len = scheme.input_len(fs);
    const long half = std::llround(scheme.delta_t_s * fs);
    // window start offset relative to the target index
    const long start_off = scheme.kind == SchemeKind::AntiCausal ? 0 : -half;

    // target indices on the stride grid, then filtered per segment
    std::vector<long> keep;
    for (const auto& [seg_lo, seg_hi] : segments) {
        const long lo = static_cast<long>(seg_lo);
        const long hi = static_cast<long>(seg_hi);
        long prev = -1;
        for (std::size_t k = 0;; ++k) {
            const long idx = std::llround(static_cast<double>(k) * stride_s * fs);
            if (idx >= n || idx >= hi) break;
            if (idx == prev) continue;
            prev = idx;
            const long w0 = idx + start_off;
            const long w1 = w0 + len - 1;
            if (idx < lo) continue;
            if (w0 < lo || w1 >= hi) continue;
            keep.push_back(idx);
        }
    }

    if (keep.empty()) raise(ErrorKind::EmptyDataset, "no window fits inside the record");

    WindowedDataset ds;
    ds.input_len = static_cast<int>(len);
    ds.fs = static_cast<int>(fs);
    ds.scheme = scheme;
    ds.direction = direction;
    ds.target_kind = target_kind;
    ds.inputs.resize(static_cast<Eigen::Index>(keep.size()), len);
    ds.targets.resize(static_cast<Eigen::Index>(keep.size()));
    ds.target_times.reserve(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const long idx = keep[r];
        const long w0 = idx + start_off;
        for (long j = 0; j < len; ++j)
            ds.inputs(static_cast<Eigen::Index>(r), j) = input_series[w0 + j];
        ds.targets(static_cast<Eigen::Index>(r)) = target_series[idx];
        ds.target_times.push_back(static_cast<double>(idx) / fs);
    }
    return ds;
}

WindowedDataset build_dataset(const std::vector<double>& input_series,
                              const std::vector<double>& target_series, double fs,
                              const WindowScheme& scheme, double stride_s, TargetKind target_kind,
                              Direction direction) {
    const std::vector<std::pair<std::size_t, std::size_t>> whole = {{0, input_series.size()}};
    return build_dataset_segments(input_series, target_series, fs, scheme, stride_s, whole,
                                  target_kind, direction);
}

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) raise(ErrorKind::MalformedFile, "truncated cache '" + path + "'");
    return v;
}

}  // namespace

void save_dataset(const std::string& path, const WindowedDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot write '" + path + "'");
    out.write(kCacheMagic, 8);
    put<std::int32_t>(out, ds.fs);
    put<std::int32_t>(out, static_cast<std::int32_t>(ds.scheme.kind));
    put<double>(out, ds.scheme.delta_t_s);
    put<std::int32_t>(out, static_cast<std::int32_t>(ds.direction));
    put<std::int32_t>(out, static_cast<std::int32_t>(ds.target_kind));
    put<std::uint64_t>(out, ds.size());
    put<std::uint64_t>(out, static_cast<std::uint64_t>(ds.input_len));
    for (Eigen::Index r = 0; r < ds.inputs.rows(); ++r)
        for (Eigen::Index c = 0; c < ds.inputs.cols(); ++c) put<double>(out, ds.inputs(r, c));
    for (Eigen::Index r = 0; r < ds.targets.size(); ++r) put<double>(out, ds.targets(r));
    for (double t : ds.target_times) put<double>(out, t);
    if (!out) raise(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

WindowedDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCacheMagic, 8) != 0)
        raise(ErrorKind::MalformedFile, "bad cache magic in '" + path + "'");

    WindowedDataset ds;
    ds.fs = take<std::int32_t>(in, path);
    ds.scheme.kind = static_cast<SchemeKind>(take<std::int32_t>(in, path));
    ds.scheme.delta_t_s = take<double>(in, path);
    ds.direction = static_cast<Direction>(take<std::int32_t>(in, path));
    ds.target_kind = static_cast<TargetKind>(take<std::int32_t>(in, path));
    const auto count = take<std::uint64_t>(in, path);
    const auto len = take<std::uint64_t>(in, path);
    ds.input_len = static_cast<int>(len);
    ds.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(len));
    ds.targets.resize(static_cast<Eigen::Index>(count));
    for (Eigen::Index r = 0; r < ds.inputs.rows(); ++r)
        for (Eigen::Index c = 0; c < ds.inputs.cols(); ++c)
            ds.inputs(r, c) = take<double>(in, path);
    for (Eigen::Index r = 0; r < ds.targets.size(); ++r) ds.targets(r) = take<double>(in, path);
    ds.target_times.resize(count);
    for (double& t : ds.target_times) t = take<double>(in, path);
    return ds;
}

SplitPlan within_subject_folds(double record_duration_s, double segment_len_s, int n_folds) {
    if (n_folds < 2) raise(ErrorKind::InvalidConfig, "need at least 2 folds");
    if (!(segment_len_s > 0.0)) raise(ErrorKind::InvalidConfig, "segment_len_s must be positive");
    if (record_duration_s < segment_len_s * n_folds)
        raise(ErrorKind::RecordTooShort,
              "record " + std::to_string(record_duration_s) + " s cannot hold " +
                  std::to_string(n_folds) + " segments of " + std::to_string(segment_len_s) +
                  " s");

    SplitPlan plan;
    plan.protocol = Protocol::WithinSubject10Fold;
    const double seg = record_duration_s / n_folds;
    for (int k = 0; k < n_folds; ++k)
        plan.segments.emplace_back(k * seg, (k + 1) * seg);
    for (int k = 0; k < n_folds; ++k) {
        Fold fold;
        fold.test.push_back(k);
        for (int j = 0; j < n_folds; ++j)
            if (j != k) fold.train.push_back(j);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

SplitPlan cross_subject_splits(int n_records) {
    if (n_records < 2) raise(ErrorKind::TooFewRecords, "need at least 2 records for LOOCV");
    SplitPlan plan;
    plan.protocol = Protocol::CrossSubjectLOOCV;
    for (int k = 0; k < n_records; ++k) {
        Fold fold;
        fold.test.push_back(k);
        for (int j = 0; j < n_records; ++j)
            if (j != k) fold.train.push_back(j);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

std::vector<bool> evaluation_mask(double record_duration_s, double fs, double guard_s) {
    if (guard_s < 0.0) raise(ErrorKind::InvalidConfig, "guard_s must be non-negative");
    if (!(record_duration_s > 2.0 * guard_s))
        raise(ErrorKind::RecordTooShort, "record shorter than twice the guard interval");
    const long n = std::llround(record_duration_s * fs);
    std::vector<bool> mask(static_cast<std::size_t>(n), false);
    for (long i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        mask[static_cast<std::size_t>(i)] = t >= guard_s && t < record_duration_s - guard_s;
    }
    return mask;
}

}  // namespace ecgpcg
