#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "ecgpcg/signal_io.hpp"
#include "ecgpcg/types.hpp"

using namespace ecgpcg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "ecgpcg_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void put(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

// Runs the tool with stdout/stderr captured to files inside dir.
int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = std::string(CLI_PATH) + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

fs::path make_record(const fs::path& dir, const std::string& cfg, const std::string& stem,
                     bool fiducials = false) {
    put(dir / (stem + ".kv"), cfg);
    std::string args = "synth --config " + (dir / (stem + ".kv")).string() + " --out " +
                       (dir / (stem + ".csv")).string();
    if (fiducials) args += " --fiducials " + (dir / (stem + ".fid.csv")).string();
    REQUIRE(run_cli(dir, args) == 0);
    return dir / (stem + ".csv");
}

const std::string kShortCfg =
    "duration_s = 12\nfs = 500\nmean_hr_bpm = 72\nnoise_std = 0\nrng_seed = 5\n";

}  // namespace

TEST_CASE("synth writes a loadable record with provenance and ground truth") {
    const auto dir = fresh_dir("synth");
    const auto rec_path = make_record(dir, kShortCfg, "rec", true);

    const Record rec = load_record(rec_path.string(), RecordFormat::PairedCsv);
    CHECK(rec.fs == 500);
    CHECK(rec.ecg.size() == 6000);
    CHECK(rec.provenance.find("config=") == 0);
    CHECK(rec.provenance.find("tool=") != std::string::npos);

    const FiducialSet truth = load_fiducials((dir / "rec.fid.csv").string());
    CHECK(truth.beats.size() >= 12);
    CHECK(truth.beats.size() <= 16);
}

TEST_CASE("synth is reproducible for a fixed seed") {
    const auto dir = fresh_dir("synth_repeat");
    make_record(dir, kShortCfg, "a");
    make_record(dir, kShortCfg, "b");
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
}

TEST_CASE("preprocess applies a config and keeps the record loadable") {
    const auto dir = fresh_dir("prep");
    const auto rec_path = make_record(dir, kShortCfg, "rec");
    put(dir / "prep.kv", "target_fs = 250\n");
    REQUIRE(run_cli(dir, "preprocess --in " + rec_path.string() + " --config " +
                             (dir / "prep.kv").string() + " --out " +
                             (dir / "prep.csv").string()) == 0);
    const Record out = load_record((dir / "prep.csv").string(), RecordFormat::PairedCsv);
    CHECK(out.fs == 250);
    CHECK(out.ecg.size() == 3000);
    CHECK(out.provenance.find("config=") == 0);
}

TEST_CASE("dataset, train, reconstruct, evaluate round trip recovers the coupling") {
    const auto dir = fresh_dir("chain");
    const auto rec_path = make_record(dir, kShortCfg, "rec");
    REQUIRE(run_cli(dir, "dataset --in " + rec_path.string() +
                             " --direction p2e --scheme non_causal --dt 0.5 --stride 0.02 "
                             "--out " +
                             (dir / "ds.bin").string()) == 0);
    REQUIRE(run_cli(dir, "train --dataset " + (dir / "ds.bin").string() +
                             " --model lasso --lambda 0.001 --out " +
                             (dir / "model.bin").string()) == 0);

    SUBCASE("reconstruct places output in the modeled channel") {
        REQUIRE(run_cli(dir, "reconstruct --model " + (dir / "model.bin").string() + " --in " +
                                 rec_path.string() + " --direction p2e --out " +
                                 (dir / "hat.csv").string()) == 0);
        const Record ref = load_record(rec_path.string(), RecordFormat::PairedCsv);
        const Record hat = load_record((dir / "hat.csv").string(), RecordFormat::PairedCsv);
        CHECK(hat.fs == ref.fs);
        CHECK(hat.pcg == ref.pcg);
        CHECK(hat.ecg != ref.ecg);

        REQUIRE(run_cli(dir, "evaluate --ref " + rec_path.string() + " --hat " +
                                 (dir / "hat.csv").string() + " --channel ecg --out " +
                                 (dir / "metrics.json").string()) == 0);
        const json report = json::parse(slurp(dir / "metrics.json"));
        CHECK(report["snr_db"].get<double>() > 10.0);
        CHECK(report["cc"].get<double>() > 0.9);
        CHECK(report["provenance"].contains("config_hash"));
        CHECK(report["provenance"]["tool_version"].is_string());
    }

    SUBCASE("reconstruct rejects a direction the model was not trained for") {
        CHECK(run_cli(dir, "reconstruct --model " + (dir / "model.bin").string() + " --in " +
                               rec_path.string() + " --direction e2p --out " +
                               (dir / "bad.csv").string()) == 1);
        const json err = json::parse(slurp(dir / "stderr.txt"));
        CHECK(err["error"] == "InvalidArgument");
    }
}

TEST_CASE("evaluate of a record against itself reports perfect correlation") {
    const auto dir = fresh_dir("self_eval");
    const auto rec_path = make_record(dir, kShortCfg, "rec");
    REQUIRE(run_cli(dir, "evaluate --ref " + rec_path.string() + " --hat " + rec_path.string()) ==
            0);
    const json report = json::parse(slurp(dir / "stdout.txt"));
    CHECK(report["cc"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report["weighted_coherence"].get<double>() > 0.999);
}

TEST_CASE("psd emits one bin per rfft frequency plus headers") {
    const auto dir = fresh_dir("psd");
    const auto rec_path = make_record(
        dir, "duration_s = 10\nfs = 1000\nmean_hr_bpm = 70\nnoise_std = 0\nrng_seed = 2\n", "rec");
    REQUIRE(run_cli(dir, "psd --in " + rec_path.string() + " --channel pcg --window 1.0 --out " +
                             (dir / "psd.csv").string()) == 0);
    const auto rows = lines_of(slurp(dir / "psd.csv"));
    REQUIRE(rows.size() == 503);
    CHECK(rows[0].find("# config=") == 0);
    CHECK(rows[1] == "freq_hz,psd");
    CHECK(rows[2].find("0,") == 0);
}

TEST_CASE("fiducial-eval of identical landmark files reports zero error") {
    const auto dir = fresh_dir("fid");
    make_record(dir, kShortCfg, "rec", true);
    const std::string fid = (dir / "rec.fid.csv").string();
    REQUIRE(run_cli(dir, "fiducial-eval --ref " + fid + " --det " + fid + " --out " +
                             (dir / "stats.csv").string()) == 0);
    const auto rows = lines_of(slurp(dir / "stats.csv"));
    REQUIRE(rows.size() == 6);
    CHECK(rows[1] == "stat,qrs_on,r_peak,qrs_off,t_on,t_peak,t_off");
    CHECK(rows[2] == "mae_ms,0,0,0,0,0,0");
    CHECK(rows[3] == "rmse_ms,0,0,0,0,0,0");
    CHECK(rows[5] == "sensitivity_pct,100,100,100,100,100,100");
}

TEST_CASE("experiment runs a two-record leave-one-out manifest") {
    const auto dir = fresh_dir("expt");
    for (int i = 0; i < 2; ++i)
        make_record(dir,
                    "duration_s = 12\nfs = 200\nmean_hr_bpm = 70\nnoise_std = 0\nrng_seed = " +
                        std::to_string(20 + i) + "\n",
                    "rec" + std::to_string(i));
    std::ostringstream mf;
    mf << "protocol = loocv\n"
       << "record.0 = " << (dir / "rec0.csv").string() << "\n"
       << "record.1 = " << (dir / "rec1.csv").string() << "\n"
       << "model = lasso\ndirection = pcg_to_ecg\nscheme = non_causal\ndelta_t_s = 0.5\n"
       << "lambda = 0.001\nstride_s = 0.05\n"
       << "output_dir = " << (dir / "out").string() << "\n";
    put(dir / "manifest.kv", mf.str());
    REQUIRE(run_cli(dir, "experiment --manifest " + (dir / "manifest.kv").string()) == 0);
    const json agg = json::parse(slurp(dir / "stdout.txt"));
    CHECK(agg["protocol"] == "loocv");
    CHECK(agg["n_folds"] == 2);
    CHECK(agg["summary"]["snr_db"]["n"] == 2);
    CHECK(slurp(dir / "stdout.txt") == slurp(dir / "out" / "aggregate.json"));
}

TEST_CASE("failures surface as machine readable JSON on stderr") {
    const auto dir = fresh_dir("errors");

    SUBCASE("missing input file") {
        CHECK(run_cli(dir, "evaluate --ref nope.csv --hat nope.csv") == 1);
        const json err = json::parse(slurp(dir / "stderr.txt"));
        CHECK(err["error"] == "IoFailure");
        CHECK(err["message"].is_string());
    }

    SUBCASE("missing required flag") {
        CHECK(run_cli(dir, "evaluate --hat nope.csv") != 0);
        const json err = json::parse(slurp(dir / "stderr.txt"));
        CHECK(err["error"] == "cli_parse");
    }

    SUBCASE("unknown subcommand") {
        CHECK(run_cli(dir, "frobnicate") != 0);
        const json err = json::parse(slurp(dir / "stderr.txt"));
        CHECK(err["error"] == "cli_parse");
    }

    SUBCASE("help exits cleanly without error JSON") {
        CHECK(run_cli(dir, "--help") == 0);
        CHECK(slurp(dir / "stderr.txt").empty());
        CHECK(slurp(dir / "stdout.txt").find("synth") != std::string::npos);
    }
}
