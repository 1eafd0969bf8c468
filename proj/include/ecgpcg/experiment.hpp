#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ecgpcg/metrics.hpp"
#include "ecgpcg/models.hpp"
#include "ecgpcg/preprocess.hpp"
#include "ecgpcg/signal_io.hpp"
#include "ecgpcg/synth.hpp"
#include "ecgpcg/train.hpp"
#include "ecgpcg/windowing.hpp"

namespace ecgpcg {

const char* protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

const char* tool_version();

// Stable 16-hex-digit fingerprint of a config or file body, used in
// provenance headers.
std::string config_fingerprint(const std::string& text);

// One experiment input: an on-disk record, or an inline synthesis request
// when synth is set.
struct RecordSource {
    std::string path;
    std::optional<SynthConfig> synth;
};

// Flat key-value manifest describing one cross-validation run. Records appear
// as record.<i> = <path> or as record.<i>.synth.<key> groups; preprocess.* and
// train.* nest the respective configs.
struct ExperimentManifest {
    std::vector<RecordSource> records;
    Direction direction = Direction::PcgToEcg;
    WindowScheme scheme{SchemeKind::NonCausal, 0.5};
    ModelKind model_kind = ModelKind::Lasso;
    TargetKind target_kind = TargetKind::RawWaveform;
    Protocol protocol = Protocol::CrossSubjectLOOCV;
    bool preprocess_enabled = false;
    PreprocessConfig preprocess;
    TrainConfig train;
    double lambda = 0.01;
    double stride_s = 0.01;
    double guard_s = 1.0;
    RecordFormat record_format = RecordFormat::PairedCsv;
    std::string output_dir;

    void validate() const;
    std::string to_kv() const;
    static ExperimentManifest from_kv(const std::string& text);

    // Hash over the canonical serialization with the output location blanked,
    // so results carry the same identity wherever they land.
    std::string config_hash() const;
};

struct FoldOutcome {
    int fold = 0;
    bool ok = false;
    std::string error;
    MetricsReport report;
};

struct ExperimentResult {
    std::vector<FoldOutcome> folds;
    std::string aggregate_json;
    std::string aggregate_path;
};

// Runs every fold of the manifest, isolating per-fold failures, and writes
// fold_<k>/{model.bin,reconstruction.csv,metrics.json} plus aggregate.json
// and a manifest echo under output_dir. jobs > 1 runs folds in parallel.
ExperimentResult run_experiment(const ExperimentManifest& manifest, int jobs = 1);

}  // namespace ecgpcg
