#include "ecgpcg/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>
#include <utility>

#include "ecgpcg/envelope.hpp"
#include "ecgpcg/error.hpp"
#include "ecgpcg/kv.hpp"
#include "ecgpcg/lasso.hpp"
#include "ecgpcg/lstm.hpp"
#include "ecgpcg/mlp.hpp"

namespace ecgpcg {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

kv::Map sub_map(const kv::Map& m, const std::string& prefix) {
    kv::Map out;
    for (const auto& [k, v] : m)
        if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
    return out;
}

void merge_prefixed(kv::Map& into, const std::string& prefix, const kv::Map& sub) {
    for (const auto& [k, v] : sub) into[prefix + k] = v;
}

nlohmann::ordered_json provenance_json(const ExperimentManifest& mf) {
    nlohmann::ordered_json p;
    p["config_hash"] = mf.config_hash();
    p["rng_seed"] = mf.train.rng_seed;
    p["tool_version"] = kToolVersion;
    return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

WindowedDataset fold_dataset(const ExperimentManifest& mf, const std::vector<double>& input,
                             const std::vector<double>& target, double fs,
                             const std::vector<std::pair<std::size_t, std::size_t>>& segments) {
    if (mf.target_kind == TargetKind::Envelope)
        return envelope_dataset_segments(input, target, fs, mf.scheme, mf.stride_s, segments,
                                         mf.direction);
    return build_dataset_segments(input, target, fs, mf.scheme, mf.stride_s, segments,
                                  TargetKind::RawWaveform, mf.direction);
}

void append_dataset(WindowedDataset& into, WindowedDataset&& part) {
    if (into.size() == 0) {
        into = std::move(part);
        return;
    }
    if (part.size() == 0) return;
    if (part.input_len != into.input_len || part.fs != into.fs)
        raise(ErrorKind::InvalidConfig, "datasets disagree on window geometry");
    const Eigen::Index rows = into.inputs.rows();
    into.inputs.conservativeResize(rows + part.inputs.rows(), Eigen::NoChange);
    into.inputs.bottomRows(part.inputs.rows()) = part.inputs;
    into.targets.conservativeResize(rows + part.targets.size());
    into.targets.tail(part.targets.size()) = part.targets;
    into.target_times.insert(into.target_times.end(), part.target_times.begin(),
                             part.target_times.end());
}

AnyModel train_dispatch(const ExperimentManifest& mf, const WindowedDataset& ds,
                        const TrainConfig& cfg) {
    switch (mf.model_kind) {
        case ModelKind::Lasso: return train_lasso(ds, mf.lambda);
        case ModelKind::Mlp: return train_mlp(ds, cfg);
        case ModelKind::Lstm: return train_lstm(ds, cfg);
    }
    raise(ErrorKind::InvalidConfig, "unknown model kind");
}

std::vector<std::pair<std::size_t, std::size_t>> segment_samples(
    const SplitPlan& plan, const std::vector<int>& units, double fs, std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(units.size());
    for (const int u : units) {
        const auto& seg = plan.segments[static_cast<std::size_t>(u)];
        const auto a = static_cast<std::size_t>(std::llround(seg.first * fs));
        const auto b = std::min(n, static_cast<std::size_t>(std::llround(seg.second * fs)));
        out.emplace_back(a, b);
    }
    return out;
}

struct FoldData {
    WindowedDataset train;
    std::vector<double> test_input;
    std::vector<double> test_target;
    double fs = 0.0;
};

FoldData assemble_fold(const ExperimentManifest& mf, const std::vector<Record>& records,
                       const SplitPlan& plan, int k) {
    FoldData fd;
    const auto& fold = plan.folds[static_cast<std::size_t>(k)];
    if (mf.protocol == Protocol::WithinSubject10Fold) {
        const Record& rec = records[0];
        fd.fs = rec.fs;
        const auto& in_series = mf.direction == Direction::EcgToPcg ? rec.ecg : rec.pcg;
        const auto& tg_series = mf.direction == Direction::EcgToPcg ? rec.pcg : rec.ecg;
        const auto train_segs = segment_samples(plan, fold.train, fd.fs, in_series.size());
        fd.train = fold_dataset(mf, in_series, tg_series, fd.fs, train_segs);
        const auto test_segs = segment_samples(plan, fold.test, fd.fs, in_series.size());
        const auto& [a, b] = test_segs.at(0);
        fd.test_input.assign(in_series.begin() + static_cast<std::ptrdiff_t>(a),
                             in_series.begin() + static_cast<std::ptrdiff_t>(b));
        fd.test_target.assign(tg_series.begin() + static_cast<std::ptrdiff_t>(a),
                              tg_series.begin() + static_cast<std::ptrdiff_t>(b));
    } else {
        fd.fs = records[0].fs;
        for (const int r : fold.train) {
            const Record& rec = records[static_cast<std::size_t>(r)];
            const auto& in_series = mf.direction == Direction::EcgToPcg ? rec.ecg : rec.pcg;
            const auto& tg_series = mf.direction == Direction::EcgToPcg ? rec.pcg : rec.ecg;
            append_dataset(fd.train, fold_dataset(mf, in_series, tg_series, fd.fs,
                                                  {{0, in_series.size()}}));
        }
        const Record& rec = records[static_cast<std::size_t>(fold.test.at(0))];
        fd.test_input = mf.direction == Direction::EcgToPcg ? rec.ecg : rec.pcg;
        fd.test_target = mf.direction == Direction::EcgToPcg ? rec.pcg : rec.ecg;
    }
    return fd;
}

void write_reconstruction_csv(const std::filesystem::path& path, double fs,
                              const std::string& provenance_line,
                              const std::vector<double>& reference,
                              const std::vector<double>& reconstruction) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    out << "fs=" << static_cast<long long>(std::llround(fs)) << "\n";
    out << "# " << provenance_line << "\n";
    out << "reference,reconstruction\n";
    char buf[80];
    for (std::size_t i = 0; i < reference.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", reference[i], reconstruction[i]);
        out << buf;
    }
    if (!out) raise(ErrorKind::IoFailure, "write failed for " + path.string());
}

FoldOutcome run_fold(const ExperimentManifest& mf, const std::vector<Record>& records,
                     const SplitPlan& plan, int k) {
    FoldOutcome out;
    out.fold = k;
    char name[16];
    std::snprintf(name, sizeof name, "fold_%02d", k);
    const std::filesystem::path dir = std::filesystem::path(mf.output_dir) / name;
    const std::string prov_line = "config=" + mf.config_hash() +
                                  " seed=" + std::to_string(mf.train.rng_seed) +
                                  " tool=" + kToolVersion + " fold=" + std::to_string(k);
    try {
        std::filesystem::create_directories(dir);
        FoldData fd = assemble_fold(mf, records, plan, k);

        TrainConfig cfg = mf.train;
        cfg.rng_seed = mf.train.rng_seed + static_cast<std::uint64_t>(k);
        const AnyModel model = train_dispatch(mf, fd.train, cfg);
        save_model((dir / "model.bin").string(), model);

        std::vector<double> input = fd.test_input;
        std::vector<double> reference = fd.test_target;
        if (mf.target_kind == TargetKind::Envelope) {
            input = instantaneous_amplitude(input);
            reference = instantaneous_amplitude(reference);
        }
        const auto recon = reconstruct(model, input, fd.fs, mf.scheme);
        write_reconstruction_csv(dir / "reconstruction.csv", fd.fs, prov_line, reference, recon);

        out.report = evaluate(reference, recon, fd.fs, mf.guard_s);
        auto j = nlohmann::ordered_json::parse(out.report.to_json());
        j["provenance"] = provenance_json(mf);
        j["provenance"]["fold"] = k;
        write_text(dir / "metrics.json", j.dump(2) + "\n");
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
        nlohmann::ordered_json j;
        j["fold"] = k;
        j["status"] = "error";
        j["error"] = out.error;
        j["provenance"] = provenance_json(mf);
        try {
            std::filesystem::create_directories(dir);
            write_text(dir / "error.json", j.dump(2) + "\n");
        } catch (...) {
        }
    }
    return out;
}

void summarize(nlohmann::ordered_json& summary, const char* key,
               const std::vector<FoldOutcome>& folds, double MetricsReport::* field) {
    std::vector<double> vals;
    for (const auto& f : folds)
        if (f.ok) vals.push_back(f.report.*field);
    nlohmann::ordered_json s;
    double mean = 0.0, sd = 0.0;
    if (!vals.empty()) {
        for (const double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        for (const double v : vals) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / static_cast<double>(vals.size()));
    }
    s["mean"] = mean;
    s["std"] = sd;
    s["n"] = vals.size();
    summary[key] = s;
}

}  // namespace

const char* tool_version() { return kToolVersion; }

std::string config_fingerprint(const std::string& text) { return hex64(fnv1a(text)); }

const char* protocol_name(Protocol p) {
    return p == Protocol::WithinSubject10Fold ? "within_subject" : "loocv";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "within_subject") return Protocol::WithinSubject10Fold;
    if (name == "loocv" || name == "cross_subject") return Protocol::CrossSubjectLOOCV;
    raise(ErrorKind::InvalidConfig, "unknown protocol: " + name);
}

void ExperimentManifest::validate() const {
    if (records.empty()) raise(ErrorKind::InvalidConfig, "manifest lists no records");
    if (output_dir.empty()) raise(ErrorKind::InvalidConfig, "manifest has no output_dir");
    if (!(stride_s > 0.0)) raise(ErrorKind::InvalidConfig, "stride_s must be positive");
    if (!(scheme.delta_t_s > 0.0)) raise(ErrorKind::InvalidConfig, "delta_t_s must be positive");
    if (guard_s < 0.0) raise(ErrorKind::InvalidConfig, "guard_s cannot be negative");
    if (lambda < 0.0) raise(ErrorKind::InvalidConfig, "lambda cannot be negative");
    if (protocol == Protocol::WithinSubject10Fold && records.size() != 1)
        raise(ErrorKind::InvalidConfig, "within-subject protocol takes exactly one record");
    if (protocol == Protocol::CrossSubjectLOOCV && records.size() < 2)
        raise(ErrorKind::TooFewRecords, "leave-one-out needs at least two records");
    for (const auto& src : records) {
        if (src.synth)
            src.synth->validate();
        else if (src.path.empty())
            raise(ErrorKind::InvalidConfig, "record entry has neither path nor synth config");
    }
    train.validate();
}

std::string ExperimentManifest::to_kv() const {
    kv::Map m;
    m["direction"] = direction_name(direction);
    m["scheme"] = scheme_kind_name(scheme.kind);
    m["delta_t_s"] = kv::format_num(scheme.delta_t_s);
    m["model"] = model_kind_name(model_kind);
    m["target"] = target_kind_name(target_kind);
    m["protocol"] = protocol_name(protocol);
    m["stride_s"] = kv::format_num(stride_s);
    m["guard_s"] = kv::format_num(guard_s);
    m["lambda"] = kv::format_num(lambda);
    m["record_format"] = record_format == RecordFormat::PairedCsv ? "paired_csv" : "raw_binary";
    m["output_dir"] = output_dir;
    m["preprocess.enabled"] = preprocess_enabled ? "true" : "false";
    merge_prefixed(m, "preprocess.", kv::parse(preprocess.to_kv()));
    merge_prefixed(m, "train.", train.to_kv());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string base = "record." + std::to_string(i);
        if (records[i].synth)
            merge_prefixed(m, base + ".synth.", kv::parse(records[i].synth->to_kv()));
        else
            m[base] = records[i].path;
    }
    return kv::serialize(m);
}

ExperimentManifest ExperimentManifest::from_kv(const std::string& text) {
    const auto m = kv::parse(text);
    ExperimentManifest mf;
    mf.direction = direction_from_name(kv::get(m, "direction", "pcg_to_ecg"));
    mf.scheme.kind = scheme_kind_from_name(kv::get(m, "scheme", "non_causal"));
    mf.scheme.delta_t_s = kv::get_num(m, "delta_t_s", 0.5);
    mf.model_kind = model_kind_from_name(kv::get(m, "model", "lasso"));
    mf.target_kind = target_kind_from_name(kv::get(m, "target", "raw_waveform"));
    mf.protocol = protocol_from_name(kv::get(m, "protocol", "loocv"));
    mf.stride_s = kv::get_num(m, "stride_s", mf.stride_s);
    mf.guard_s = kv::get_num(m, "guard_s", mf.guard_s);
    mf.lambda = kv::get_num(m, "lambda", mf.lambda);
    const std::string fmt = kv::get(m, "record_format", "paired_csv");
    if (fmt == "paired_csv")
        mf.record_format = RecordFormat::PairedCsv;
    else if (fmt == "raw_binary")
        mf.record_format = RecordFormat::RawBinaryPair;
    else
        raise(ErrorKind::InvalidConfig, "unknown record_format: " + fmt);
    mf.output_dir = kv::get(m, "output_dir", "");
    mf.preprocess_enabled = kv::get_bool(m, "preprocess.enabled", false);
    auto pm = sub_map(m, "preprocess.");
    pm.erase("enabled");
    mf.preprocess = PreprocessConfig::from_kv(kv::serialize(pm));
    mf.train = TrainConfig::from_kv(sub_map(m, "train."));
    for (std::size_t i = 0;; ++i) {
        const std::string base = "record." + std::to_string(i);
        const auto it = m.find(base);
        const auto sm = sub_map(m, base + ".synth.");
        if (it != m.end())
            mf.records.push_back({it->second, std::nullopt});
        else if (!sm.empty())
            mf.records.push_back({"", SynthConfig::from_kv(kv::serialize(sm))});
        else
            break;
    }
    mf.validate();
    return mf;
}

std::string ExperimentManifest::config_hash() const {
    ExperimentManifest stripped = *this;
    stripped.output_dir = "-";
    return hex64(fnv1a(stripped.to_kv()));
}

ExperimentResult run_experiment(const ExperimentManifest& manifest, int jobs) {
    manifest.validate();
    if (jobs < 1) raise(ErrorKind::InvalidArgument, "jobs must be at least 1");
    namespace fs = std::filesystem;
    fs::create_directories(manifest.output_dir);

    const std::string prov_line = "config=" + manifest.config_hash() +
                                  " seed=" + std::to_string(manifest.train.rng_seed) +
                                  " tool=" + kToolVersion;
    write_text(fs::path(manifest.output_dir) / "manifest.kv",
               "# " + prov_line + "\n" + manifest.to_kv());

    std::vector<Record> records;
    records.reserve(manifest.records.size());
    for (const auto& src : manifest.records) {
        Record rec = src.synth ? synth_coupled_record(*src.synth).first
                               : load_record(src.path, manifest.record_format);
        if (manifest.preprocess_enabled) rec = preprocess_pipeline(rec, manifest.preprocess);
        rec.validate();
        records.push_back(std::move(rec));
    }
    for (const auto& rec : records)
        if (rec.fs != records[0].fs)
            raise(ErrorKind::InvalidConfig, "records disagree on sample rate");

    const SplitPlan plan = manifest.protocol == Protocol::WithinSubject10Fold
                               ? within_subject_folds(records[0].duration_s())
                               : cross_subject_splits(static_cast<int>(records.size()));

    const int n_folds = static_cast<int>(plan.folds.size());
    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(n_folds));
    std::atomic<int> next{0};
    const auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= n_folds) break;
            outcomes[static_cast<std::size_t>(k)] = run_fold(manifest, records, plan, k);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int width = std::min(jobs, n_folds);
        pool.reserve(static_cast<std::size_t>(width));
        for (int i = 0; i < width; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    nlohmann::ordered_json agg;
    agg["provenance"] = provenance_json(manifest);
    agg["protocol"] = protocol_name(manifest.protocol);
    agg["model"] = model_kind_name(manifest.model_kind);
    agg["direction"] = direction_name(manifest.direction);
    agg["scheme"] = scheme_kind_name(manifest.scheme.kind);
    agg["delta_t_s"] = manifest.scheme.delta_t_s;
    agg["target"] = target_kind_name(manifest.target_kind);
    agg["n_folds"] = n_folds;
    int n_failed = 0;
    for (const auto& f : outcomes)
        if (!f.ok) ++n_failed;
    agg["n_failed"] = n_failed;
    agg["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : outcomes) {
        nlohmann::ordered_json jf;
        jf["fold"] = f.fold;
        if (f.ok) {
            jf["status"] = "ok";
            jf["snr_db"] = f.report.snr_db;
            jf["cc"] = f.report.cc;
            jf["weighted_coherence"] = f.report.weighted_coherence;
            jf["n_samples_evaluated"] = f.report.n_samples_evaluated;
            jf["flags"] = f.report.flags;
        } else {
            jf["status"] = "error";
            jf["error"] = f.error;
        }
        agg["folds"].push_back(jf);
    }
    nlohmann::ordered_json summary;
    summarize(summary, "snr_db", outcomes, &MetricsReport::snr_db);
    summarize(summary, "cc", outcomes, &MetricsReport::cc);
    summarize(summary, "weighted_coherence", outcomes, &MetricsReport::weighted_coherence);
    agg["summary"] = summary;

    ExperimentResult result;
    result.folds = std::move(outcomes);
    result.aggregate_json = agg.dump(2) + "\n";
    result.aggregate_path = (fs::path(manifest.output_dir) / "aggregate.json").string();
    write_text(result.aggregate_path, result.aggregate_json);
    return result;
}

}  // namespace ecgpcg
