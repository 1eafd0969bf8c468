#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "ecgpcg/error.hpp"
#include "ecgpcg/signal_io.hpp"
#include "ecgpcg/synth.hpp"

using namespace ecgpcg;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / name) {}
    ~TempFile() { std::error_code ec; fs::remove(path, ec); }
    std::string str() const { return path.string(); }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

Record small_record() {
    Record r;
    r.subject_id = "s07";
    r.scenario = Scenario::Walk;
    r.fs = 500;
    r.provenance = "unit fixture";
    std::mt19937 rng(99);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int i = 0; i < 1234; ++i) {
        r.ecg.push_back(d(rng));
        r.pcg.push_back(d(rng) * 0.3 + 0.001);
    }
    return r;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("csv with fs header and 3000 rows loads as a 3 second record") {
    TempFile f("ecgpcg_io_basic.csv");
    std::string text = "fs=1000\n";
    for (int i = 0; i < 3000; ++i) text += "0.5,-0.25\n";
    write_text(f.path, text);
    Record r = load_record(f.str(), RecordFormat::PairedCsv);
    CHECK(r.fs == 1000);
    CHECK(r.ecg.size() == 3000);
    CHECK(r.duration_s() == doctest::Approx(3.0));
    CHECK(r.ecg[17] == 0.5);
    CHECK(r.pcg[17] == -0.25);
}

TEST_CASE("csv with unequal channel lengths is rejected") {
    TempFile f("ecgpcg_io_uneven.csv");
    std::string text = "fs=1000\n";
    for (int i = 0; i < 9; ++i) text += "0.1,0.2\n";
    text += "0.1\n";
    write_text(f.path, text);
    CHECK(kind_of([&] { load_record(f.str(), RecordFormat::PairedCsv); }) ==
          ErrorKind::LengthMismatch);
}

TEST_CASE("csv parse failures carry the right kinds") {
    TempFile f("ecgpcg_io_bad.csv");
    write_text(f.path, "rate=1000\n0.1,0.2\n");
    CHECK(kind_of([&] { load_record(f.str(), RecordFormat::PairedCsv); }) ==
          ErrorKind::MalformedFile);

    write_text(f.path, "fs=1000\n0.1,zebra\n");
    CHECK(kind_of([&] { load_record(f.str(), RecordFormat::PairedCsv); }) ==
          ErrorKind::MalformedFile);

    write_text(f.path, "fs=1000\n0.1,nan\n");
    CHECK(kind_of([&] { load_record(f.str(), RecordFormat::PairedCsv); }) ==
          ErrorKind::NonFiniteSample);

    write_text(f.path, "fs=0\n0.1,0.2\n");
    CHECK(kind_of([&] { load_record(f.str(), RecordFormat::PairedCsv); }) ==
          ErrorKind::MalformedFile);

    CHECK(kind_of([&] { load_record("/nonexistent/nowhere.csv", RecordFormat::PairedCsv); }) ==
          ErrorKind::IoFailure);
}

TEST_CASE("records round trip through both formats") {
    const Record orig = small_record();
    for (RecordFormat fmt : {RecordFormat::PairedCsv, RecordFormat::RawBinaryPair}) {
        TempFile f(fmt == RecordFormat::PairedCsv ? "ecgpcg_rt.csv" : "ecgpcg_rt.bin");
        write_record(f.str(), orig, fmt);
        Record back = load_record(f.str(), fmt);
        CHECK(back.fs == orig.fs);
        CHECK(back.subject_id == orig.subject_id);
        CHECK(back.scenario == orig.scenario);
        CHECK(back.provenance == orig.provenance);
        REQUIRE(back.ecg.size() == orig.ecg.size());
        for (std::size_t i = 0; i < orig.ecg.size(); ++i) {
            CHECK(back.ecg[i] == orig.ecg[i]);
            CHECK(back.pcg[i] == orig.pcg[i]);
        }
    }
}

TEST_CASE("writing to an unwritable path fails cleanly") {
    CHECK(kind_of([&] {
              write_record("/nonexistent_dir/x.csv", small_record(), RecordFormat::PairedCsv);
          }) == ErrorKind::IoFailure);
}

TEST_CASE("a thirty minute record writes one row per sample") {
    Record r;
    r.fs = 1000;
    r.ecg.assign(1800000, 0.1);
    r.pcg.assign(1800000, 0.2);
    TempFile f("ecgpcg_long.csv");
    write_record(f.str(), r, RecordFormat::PairedCsv);
    std::ifstream in(f.path, std::ios::binary);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 1800000 + 1);  // data plus the fs header
}

TEST_CASE("fiducial csv parses full, partial, and invalid rows") {
    TempFile f("ecgpcg_fid.csv");
    write_text(f.path,
               "qrs_on,r_peak,qrs_off,t_on,t_peak,t_off\n"
               "0.10,0.14,0.19,0.30,0.38,0.46\n"
               ",1.14,,,,\n"
               "2.10,2.14,2.19,,2.38,\n");
    FiducialSet set = load_fiducials(f.str());
    REQUIRE(set.size() == 3);
    CHECK(set.beats[0].qrs_on == doctest::Approx(0.10));
    CHECK(set.beats[0].t_off == doctest::Approx(0.46));
    CHECK(!set.beats[1].qrs_on.has_value());
    CHECK(set.beats[1].r_peak == doctest::Approx(1.14));
    CHECK(!set.beats[2].t_on.has_value());
    CHECK(set.beats[2].t_peak == doctest::Approx(2.38));

    write_text(f.path, "qrs_on,r_peak,qrs_off,t_on,t_peak,t_off\n0.2,0.1,,,,\n");
    CHECK(kind_of([&] { load_fiducials(f.str()); }) == ErrorKind::OrderingViolation);

    write_text(f.path, "a,b,c,d,e,f\n");
    CHECK(kind_of([&] { load_fiducials(f.str()); }) == ErrorKind::MalformedFile);
}

TEST_CASE("a 180 beat annotation file loads completely and round trips") {
    TempFile f("ecgpcg_fid180.csv");
    std::string text = "qrs_on,r_peak,qrs_off,t_on,t_peak,t_off\n";
    for (int i = 0; i < 180; ++i) {
        const double r = 0.5 + i * 0.9;
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n", r - 0.04, r, r + 0.05,
                      r + 0.20, r + 0.28, r + 0.36);
        text += buf;
    }
    write_text(f.path, text);
    FiducialSet set = load_fiducials(f.str());
    CHECK(set.size() == 180);

    TempFile f2("ecgpcg_fid180_rt.csv");
    write_fiducials(f2.str(), set);
    FiducialSet back = load_fiducials(f2.str());
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(back.beats[i].r_peak == set.beats[i].r_peak);
        CHECK(back.beats[i].t_off == set.beats[i].t_off);
    }
}

TEST_CASE("constant rate synthesis produces the expected beat count and rate") {
    SynthConfig cfg;
    cfg.duration_s = 60.0;
    cfg.mean_hr_bpm = 60.0;
    cfg.noise_std = 0.0;
    auto [rec, truth] = synth_coupled_record(cfg);
    CHECK(rec.fs == cfg.fs);
    CHECK(rec.ecg.size() == 60000);
    CHECK(truth.r_times.size() >= 59);
    CHECK(truth.r_times.size() <= 61);
    REQUIRE(truth.r_times.size() >= 2);
    double rr_sum = 0.0;
    for (std::size_t i = 1; i < truth.r_times.size(); ++i)
        rr_sum += truth.r_times[i] - truth.r_times[i - 1];
    const double mean_rr = rr_sum / static_cast<double>(truth.r_times.size() - 1);
    CHECK(mean_rr == doctest::Approx(1.0).epsilon(0.01));
    CHECK(rec.fiducials.has_value());
    CHECK(rec.fiducials->size() == truth.r_times.size());
}

TEST_CASE("synthesis is deterministic in its seed") {
    SynthConfig cfg;
    cfg.duration_s = 20.0;
    cfg.noise_std = 0.05;
    cfg.rng_seed = 42;
    auto [a, ta] = synth_coupled_record(cfg);
    auto [b, tb] = synth_coupled_record(cfg);
    CHECK(a.ecg == b.ecg);
    CHECK(a.pcg == b.pcg);
    CHECK(ta.r_times == tb.r_times);

    cfg.rng_seed = 43;
    auto [c, tc] = synth_coupled_record(cfg);
    CHECK(a.ecg != c.ecg);
}

TEST_CASE("ramped rate halves the RR interval mid-record and keeps the mean") {
    SynthConfig cfg;
    cfg.duration_s = 120.0;
    cfg.mean_hr_bpm = 90.0;
    cfg.hr_trajectory = HrTrajectory::RampUpDown;
    cfg.noise_std = 0.0;
    auto [rec, truth] = synth_coupled_record(cfg);
    REQUIRE(truth.r_times.size() > 10);
    double min_rr = 1e9;
    double rr_sum = 0.0;
    for (std::size_t i = 1; i < truth.r_times.size(); ++i) {
        const double rr = truth.r_times[i] - truth.r_times[i - 1];
        min_rr = std::min(min_rr, rr);
        rr_sum += rr;
    }
    CHECK(min_rr == doctest::Approx(0.5).epsilon(0.03));
    const double mean_rr = rr_sum / static_cast<double>(truth.r_times.size() - 1);
    CHECK(mean_rr == doctest::Approx(60.0 / 90.0).epsilon(0.01));
}

TEST_CASE("noiseless linear coupling decomposes exactly into bursts plus filtered ecg") {
    SynthConfig cfg;
    cfg.duration_s = 20.0;
    cfg.noise_std = 0.0;
    cfg.coupling = CouplingKind::LinearFilter;
    auto [rec, truth] = synth_coupled_record(cfg);
    REQUIRE(!truth.fir_kernel.empty());
    REQUIRE(truth.burst_train.size() == rec.pcg.size());
    const long taps = static_cast<long>(truth.fir_kernel.size());
    for (long i = 0; i < static_cast<long>(rec.pcg.size()); ++i) {
        double acc = 0.0;
        for (long j = 0; j < taps && j <= i; ++j) acc += truth.fir_kernel[j] * rec.ecg[i - j];
        CHECK(rec.pcg[i] == truth.burst_train[i] + acc);
    }
}

TEST_CASE("nonlinear coupling varies burst heights with the local slope") {
    SynthConfig cfg;
    cfg.duration_s = 30.0;
    cfg.coupling = CouplingKind::NonlinearAmplitude;
    cfg.noise_std = 0.04;
    cfg.rng_seed = 7;
    auto [rec, truth] = synth_coupled_record(cfg);
    CHECK(truth.fir_kernel.empty());

    // peak burst height near each S1 should differ across beats
    const double fs = rec.fs;
    double lo = 1e9, hi = -1e9;
    for (double t : truth.s1_times) {
        double peak = 0.0;
        const long c = std::lround(t * fs);
        for (long i = std::max(0L, c - 30); i < std::min<long>(rec.pcg.size(), c + 30); ++i)
            peak = std::max(peak, std::abs(truth.burst_train[i]));
        lo = std::min(lo, peak);
        hi = std::max(hi, peak);
    }
    CHECK(hi - lo > 0.02);
}

TEST_CASE("synthesis config bounds are enforced") {
    SynthConfig cfg;
    cfg.mean_hr_bpm = 10.0;
    CHECK(kind_of([&] { synth_coupled_record(cfg); }) == ErrorKind::InvalidConfig);
    cfg = SynthConfig{};
    cfg.electromechanical_delay_s = 0.25;
    CHECK(kind_of([&] { synth_coupled_record(cfg); }) == ErrorKind::InvalidConfig);
    cfg = SynthConfig{};
    cfg.noise_std = -0.1;
    CHECK(kind_of([&] { synth_coupled_record(cfg); }) == ErrorKind::InvalidConfig);
    cfg = SynthConfig{};
    cfg.duration_s = 1.0;
    CHECK(kind_of([&] { synth_coupled_record(cfg); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("synth config text form round trips") {
    SynthConfig cfg;
    cfg.duration_s = 45.0;
    cfg.mean_hr_bpm = 85.0;
    cfg.hr_trajectory = HrTrajectory::RampUpDown;
    cfg.coupling = CouplingKind::NonlinearAmplitude;
    cfg.noise_std = 0.03;
    cfg.rng_seed = 77;
    SynthConfig back = SynthConfig::from_kv(cfg.to_kv());
    CHECK(back.duration_s == cfg.duration_s);
    CHECK(back.mean_hr_bpm == cfg.mean_hr_bpm);
    CHECK(back.hr_trajectory == cfg.hr_trajectory);
    CHECK(back.coupling == cfg.coupling);
    CHECK(back.noise_std == cfg.noise_std);
    CHECK(back.rng_seed == cfg.rng_seed);
}
