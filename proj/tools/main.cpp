#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "ecgpcg/envelope.hpp"
#include "ecgpcg/error.hpp"
#include "ecgpcg/experiment.hpp"
#include "ecgpcg/fiducial.hpp"
#include "ecgpcg/kv.hpp"
#include "ecgpcg/lasso.hpp"
#include "ecgpcg/lstm.hpp"
#include "ecgpcg/metrics.hpp"
#include "ecgpcg/mlp.hpp"
#include "ecgpcg/models.hpp"
#include "ecgpcg/preprocess.hpp"
#include "ecgpcg/signal_io.hpp"
#include "ecgpcg/synth.hpp"
#include "ecgpcg/windowing.hpp"

using namespace ecgpcg;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) raise(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

std::string prov_line(const std::string& config_text, std::uint64_t seed) {
    return "config=" + config_fingerprint(config_text) + " seed=" + std::to_string(seed) +
           " tool=" + tool_version();
}

RecordFormat format_for(const std::string& path, const std::string& flag) {
    if (flag == "csv") return RecordFormat::PairedCsv;
    if (flag == "bin") return RecordFormat::RawBinaryPair;
    if (flag != "auto") raise(ErrorKind::InvalidArgument, "unknown format '" + flag + "'");
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".bin") return RecordFormat::RawBinaryPair;
    return RecordFormat::PairedCsv;
}

Direction direction_from_flag(const std::string& flag) {
    if (flag == "e2p") return Direction::EcgToPcg;
    if (flag == "p2e") return Direction::PcgToEcg;
    return direction_from_name(flag);
}

const std::vector<double>& channel_of(const Record& rec, const std::string& channel) {
    if (channel == "ecg") return rec.ecg;
    if (channel == "pcg") return rec.pcg;
    raise(ErrorKind::InvalidArgument, "channel must be ecg or pcg");
}

nlohmann::ordered_json provenance_object(const std::string& config_text, std::uint64_t seed) {
    nlohmann::ordered_json p;
    p["config_hash"] = config_fingerprint(config_text);
    p["rng_seed"] = seed;
    p["tool_version"] = tool_version();
    return p;
}

void cmd_synth(const std::string& config_path, const std::string& out_path,
               const std::string& format, const std::string& fiducials_path) {
    const std::string text = slurp(config_path);
    const SynthConfig cfg = SynthConfig::from_kv(text);
    auto [rec, truth] = synth_coupled_record(cfg);
    rec.provenance = prov_line(text, cfg.rng_seed);
    write_record(out_path, rec, format_for(out_path, format));
    if (!fiducials_path.empty()) write_fiducials(fiducials_path, truth.fiducials);
}

void cmd_preprocess(const std::string& in_path, const std::string& config_path,
                    const std::string& out_path, const std::string& format) {
    const std::string text = config_path.empty() ? std::string() : slurp(config_path);
    const PreprocessConfig cfg =
        text.empty() ? PreprocessConfig{} : PreprocessConfig::from_kv(text);
    Record rec = load_record(in_path, format_for(in_path, format));
    Record out = preprocess_pipeline(rec, cfg);
    out.provenance = prov_line(text, 0);
    write_record(out_path, out, format_for(out_path, format));
}

void cmd_dataset(const std::string& in_path, const std::string& direction_flag,
                 const std::string& scheme_name, double dt, double stride,
                 const std::string& target_name, const std::string& out_path,
                 const std::string& format) {
    const Record rec = load_record(in_path, format_for(in_path, format));
    const Direction dir = direction_from_flag(direction_flag);
    const WindowScheme scheme{scheme_kind_from_name(scheme_name), dt};
    const TargetKind target = target_kind_from_name(target_name);
    const auto& input = dir == Direction::EcgToPcg ? rec.ecg : rec.pcg;
    const auto& output = dir == Direction::EcgToPcg ? rec.pcg : rec.ecg;
    const WindowedDataset ds =
        target == TargetKind::Envelope
            ? envelope_dataset(input, output, rec.fs, scheme, stride, dir)
            : build_dataset(input, output, rec.fs, scheme, stride, target, dir);
    save_dataset(out_path, ds);
}

void cmd_train(const std::string& dataset_path, const std::string& model_name,
               const std::string& scale_flag, const std::string& config_path, double lambda,
               const std::string& out_path) {
    const WindowedDataset ds = load_dataset(dataset_path);
    TrainConfig cfg;
    std::string cfg_text;
    if (!config_path.empty()) {
        cfg_text = slurp(config_path);
        cfg = TrainConfig::from_kv(kv::parse(cfg_text));
    }
    if (scale_flag == "within")
        cfg.parameter_scale = ParameterScale::WithinSubject;
    else if (scale_flag == "cross")
        cfg.parameter_scale = ParameterScale::CrossSubject;
    else
        raise(ErrorKind::InvalidArgument, "scale must be within or cross");

    const ModelKind kind = model_kind_from_name(model_name);
    AnyModel model = kind == ModelKind::Lasso ? AnyModel(train_lasso(ds, lambda))
                     : kind == ModelKind::Mlp ? AnyModel(train_mlp(ds, cfg))
                                              : AnyModel(train_lstm(ds, cfg));
    const std::string identity = model_name + "\n" + scale_flag + "\n" +
                                 kv::format_num(lambda) + "\n" + kv::serialize(cfg.to_kv());
    save_model(out_path, model, prov_line(identity, cfg.rng_seed));
}

void cmd_reconstruct(const std::string& model_path, const std::string& in_path,
                     const std::string& direction_flag, const std::string& out_path,
                     const std::string& format) {
    const AnyModel model = load_model(model_path);
    const Direction dir = direction_from_flag(direction_flag);
    if (dir != model_direction(model))
        raise(ErrorKind::InvalidArgument, "model was trained for direction " +
                                              std::string(direction_name(model_direction(model))));
    const Record rec = load_record(in_path, format_for(in_path, format));
    std::vector<double> input = dir == Direction::EcgToPcg ? rec.ecg : rec.pcg;
    if (model_target_kind(model) == TargetKind::Envelope)
        input = instantaneous_amplitude(input);
    const auto recon = reconstruct(model, input, rec.fs, model_scheme(model));

    Record out;
    out.subject_id = rec.subject_id;
    out.scenario = rec.scenario;
    out.fs = rec.fs;
    if (dir == Direction::EcgToPcg) {
        out.ecg = rec.ecg;
        out.pcg = recon;
    } else {
        out.ecg = recon;
        out.pcg = rec.pcg;
    }
    out.provenance = prov_line(slurp(model_path), 0);
    write_record(out_path, out, format_for(out_path, format));
}

void cmd_evaluate(const std::string& ref_path, const std::string& hat_path,
                  const std::string& channel, double guard, const std::string& out_path,
                  const std::string& format) {
    const Record ref = load_record(ref_path, format_for(ref_path, format));
    const Record hat = load_record(hat_path, format_for(hat_path, format));
    if (ref.fs != hat.fs) raise(ErrorKind::InvalidConfig, "records disagree on sample rate");
    const auto report =
        evaluate(channel_of(ref, channel), channel_of(hat, channel), ref.fs, guard);
    auto j = nlohmann::ordered_json::parse(report.to_json());
    j["provenance"] = provenance_object(slurp(ref_path) + slurp(hat_path), 0);
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::fputs(text.c_str(), stdout);
    else
        spill(out_path, text);
}

void cmd_psd(const std::string& in_path, const std::string& channel, double window_s,
             double overlap, const std::string& out_path, const std::string& format) {
    const Record rec = load_record(in_path, format_for(in_path, format));
    const Spectrum psd = welch_psd(channel_of(rec, channel), rec.fs, window_s, overlap);
    std::ostringstream os;
    os << "# " << prov_line(slurp(in_path) + channel, 0) << "\n";
    os << "freq_hz,psd\n";
    char buf[80];
    for (std::size_t i = 0; i < psd.freqs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", psd.freqs[i], psd.values[i]);
        os << buf;
    }
    spill(out_path, os.str());
}

void cmd_fiducial_eval(const std::string& ref_path, const std::string& det_path, double tol,
                       const std::string& out_path) {
    const FiducialSet ref = load_fiducials(ref_path);
    const FiducialSet det = load_fiducials(det_path);
    const auto matches = match_fiducials(ref, det, tol);
    std::array<FiducialErrorStats, 6> stats;
    for (std::size_t i = 0; i < kFiducialTypes.size(); ++i)
        stats[i] = fiducial_errors(matches[i], landmark_times(ref, kFiducialTypes[i]).size());
    const std::string table = "# " + prov_line(slurp(ref_path) + slurp(det_path), 0) + "\n" +
                              fiducial_error_table_csv(stats);
    spill(out_path, table);
}

void cmd_experiment(const std::string& manifest_path, int jobs) {
    const ExperimentManifest manifest = ExperimentManifest::from_kv(slurp(manifest_path));
    const ExperimentResult result = run_experiment(manifest, jobs);
    std::fputs(result.aggregate_json.c_str(), stdout);
}

int fail_json(const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::fputs((j.dump() + "\n").c_str(), stderr);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-modal heart signal toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a coupled synthetic record");
    std::string sy_config, sy_out, sy_format = "auto", sy_fid;
    synth->add_option("--config", sy_config, "synthesis config (key=value)")->required();
    synth->add_option("--out", sy_out, "output record path")->required();
    synth->add_option("--format", sy_format, "record format: auto|csv|bin");
    synth->add_option("--fiducials", sy_fid, "also write ground-truth landmark CSV here");
    synth->callback([&] { cmd_synth(sy_config, sy_out, sy_format, sy_fid); });

    auto* prep = app.add_subcommand("preprocess", "condition a record for modeling");
    std::string pr_in, pr_config, pr_out, pr_format = "auto";
    prep->add_option("--in", pr_in, "input record")->required();
    prep->add_option("--config", pr_config, "preprocess config (key=value)");
    prep->add_option("--out", pr_out, "output record path")->required();
    prep->add_option("--format", pr_format, "record format: auto|csv|bin");
    prep->callback([&] { cmd_preprocess(pr_in, pr_config, pr_out, pr_format); });

    auto* dset = app.add_subcommand("dataset", "window a record into a training cache");
    std::string ds_in, ds_dir = "pcg_to_ecg", ds_scheme = "non_causal", ds_target = "raw_waveform";
    std::string ds_out, ds_format = "auto";
    double ds_dt = 0.5, ds_stride = 0.01;
    dset->add_option("--in", ds_in, "input record")->required();
    dset->add_option("--direction", ds_dir, "e2p|p2e");
    dset->add_option("--scheme", ds_scheme, "causal|anti_causal|non_causal");
    dset->add_option("--dt", ds_dt, "window half span in seconds");
    dset->add_option("--stride", ds_stride, "target spacing in seconds");
    dset->add_option("--target", ds_target, "raw_waveform|envelope");
    dset->add_option("--out", ds_out, "dataset cache path")->required();
    dset->add_option("--format", ds_format, "record format: auto|csv|bin");
    dset->callback([&] {
        cmd_dataset(ds_in, ds_dir, ds_scheme, ds_dt, ds_stride, ds_target, ds_out, ds_format);
    });

    auto* train = app.add_subcommand("train", "fit a model on a dataset cache");
    std::string tr_dataset, tr_model = "lasso", tr_scale = "within", tr_config, tr_out;
    double tr_lambda = 0.01;
    train->add_option("--dataset", tr_dataset, "dataset cache")->required();
    train->add_option("--model", tr_model, "lasso|mlp|lstm");
    train->add_option("--scale", tr_scale, "within|cross parameter sizing");
    train->add_option("--config", tr_config, "training config (key=value)");
    train->add_option("--lambda", tr_lambda, "l1 penalty (lasso)");
    train->add_option("--out", tr_out, "model output path")->required();
    train->callback([&] {
        cmd_train(tr_dataset, tr_model, tr_scale, tr_config, tr_lambda, tr_out);
    });

    auto* rec = app.add_subcommand("reconstruct", "run a model over a record");
    std::string rc_model, rc_in, rc_dir, rc_out, rc_format = "auto";
    rec->add_option("--model", rc_model, "trained model file")->required();
    rec->add_option("--in", rc_in, "input record")->required();
    rec->add_option("--direction", rc_dir, "e2p|p2e")->required();
    rec->add_option("--out", rc_out, "output record path")->required();
    rec->add_option("--format", rc_format, "record format: auto|csv|bin");
    rec->callback([&] { cmd_reconstruct(rc_model, rc_in, rc_dir, rc_out, rc_format); });

    auto* eval = app.add_subcommand("evaluate", "score a reconstruction against a reference");
    std::string ev_ref, ev_hat, ev_channel = "ecg", ev_out, ev_format = "auto";
    double ev_guard = 1.0;
    eval->add_option("--ref", ev_ref, "reference record")->required();
    eval->add_option("--hat", ev_hat, "reconstructed record")->required();
    eval->add_option("--channel", ev_channel, "ecg|pcg channel to compare");
    eval->add_option("--guard", ev_guard, "edge guard in seconds");
    eval->add_option("--out", ev_out, "metrics JSON path (stdout when omitted)");
    eval->add_option("--format", ev_format, "record format: auto|csv|bin");
    eval->callback(
        [&] { cmd_evaluate(ev_ref, ev_hat, ev_channel, ev_guard, ev_out, ev_format); });

    auto* psd = app.add_subcommand("psd", "export a Welch power spectral density");
    std::string ps_in, ps_channel = "ecg", ps_out, ps_format = "auto";
    double ps_window = 1.0, ps_overlap = 0.5;
    psd->add_option("--in", ps_in, "input record")->required();
    psd->add_option("--channel", ps_channel, "ecg|pcg");
    psd->add_option("--window", ps_window, "segment length in seconds");
    psd->add_option("--overlap", ps_overlap, "segment overlap fraction");
    psd->add_option("--out", ps_out, "output CSV path")->required();
    psd->add_option("--format", ps_format, "record format: auto|csv|bin");
    psd->callback([&] { cmd_psd(ps_in, ps_channel, ps_window, ps_overlap, ps_out, ps_format); });

    auto* fid = app.add_subcommand("fiducial-eval", "score detected landmarks against reference");
    std::string fd_ref, fd_det, fd_out;
    double fd_tol = 0.2;
    fid->add_option("--ref", fd_ref, "reference landmark CSV")->required();
    fid->add_option("--det", fd_det, "detected landmark CSV")->required();
    fid->add_option("--tol", fd_tol, "match tolerance in seconds");
    fid->add_option("--out", fd_out, "output CSV path")->required();
    fid->callback([&] { cmd_fiducial_eval(fd_ref, fd_det, fd_tol, fd_out); });

    auto* expt = app.add_subcommand("experiment", "run a cross-validation manifest");
    std::string ex_manifest;
    int ex_jobs = 1;
    expt->add_option("--manifest", ex_manifest, "experiment manifest (key=value)")->required();
    expt->add_option("--jobs", ex_jobs, "parallel folds");
    expt->callback([&] { cmd_experiment(ex_manifest, ex_jobs); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        fail_json("cli_parse", e.what());
        return e.get_exit_code();
    } catch (const Error& e) {
        return fail_json(e.kind_name(), e.message());
    } catch (const std::exception& e) {
        return fail_json("unhandled", e.what());
    }
    return 0;
}
