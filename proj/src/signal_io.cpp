#include "ecgpcg/signal_io.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "ecgpcg/error.hpp"

namespace ecgpcg {

namespace {

constexpr char kBinMagic[8] = {'E', 'P', 'R', 'B', '0', '0', '0', '1'};

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_sample(const std::string& s, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        raise(ErrorKind::MalformedFile, "row " + std::to_string(row) + ": bad number '" + s + "'");
    if (!std::isfinite(v))
        raise(ErrorKind::NonFiniteSample, "row " + std::to_string(row) + ": non-finite sample");
    return v;
}

Record load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");

    Record rec;
    std::string line;
    if (!std::getline(in, line)) raise(ErrorKind::MalformedFile, "empty file '" + path + "'");
    if (line.rfind("fs=", 0) != 0) raise(ErrorKind::MalformedFile, "first line must be fs=<int>");
    {
        const std::string v = line.substr(3);
        char* end = nullptr;
        const long fs = std::strtol(v.c_str(), &end, 10);
        if (end == v.c_str() || (*end != '\0' && *end != '\r') || fs <= 0)
            raise(ErrorKind::MalformedFile, "bad sample rate '" + v + "'");
        rec.fs = static_cast<int>(fs);
    }

    std::size_t row = 1;
    bool header_zone = true;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header_zone && line.rfind("subject=", 0) == 0) {
            const auto fields = split(line, ',');
            rec.subject_id = fields[0].substr(8);
            for (std::size_t i = 1; i < fields.size(); ++i) {
                if (fields[i].rfind("scenario=", 0) == 0)
                    rec.scenario = scenario_from_name(fields[i].substr(9));
            }
            continue;
        }
        if (header_zone && line[0] == '#') {
            rec.provenance = line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1);
            continue;
        }
        header_zone = false;
        const auto fields = split(line, ',');
        if (fields.size() > 2)
            raise(ErrorKind::MalformedFile, "row " + std::to_string(row) + ": too many columns");
        rec.ecg.push_back(parse_sample(fields[0], row));
        if (fields.size() == 2) rec.pcg.push_back(parse_sample(fields[1], row));
    }
    if (rec.ecg.size() != rec.pcg.size())
        raise(ErrorKind::LengthMismatch, "channel lengths differ: " +
                                             std::to_string(rec.ecg.size()) + " vs " +
                                             std::to_string(rec.pcg.size()));
    rec.validate();
    return rec;
}

void write_csv(const std::string& path, const Record& rec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot write '" + path + "'");
    out << "fs=" << rec.fs << "\n";
    if (!rec.subject_id.empty() || rec.scenario != Scenario::Synthetic)
        out << "subject=" << rec.subject_id << ",scenario=" << scenario_name(rec.scenario) << "\n";
    if (!rec.provenance.empty()) out << "# " << rec.provenance << "\n";
    char buf[64];
    for (std::size_t i = 0; i < rec.ecg.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", rec.ecg[i], rec.pcg[i]);
        out << buf;
    }
    if (!out) raise(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) raise(ErrorKind::MalformedFile, "truncated file '" + path + "'");
    return v;
}

Record load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kBinMagic, 8) != 0)
        raise(ErrorKind::MalformedFile, "bad magic in '" + path + "'");

    Record rec;
    rec.fs = static_cast<int>(take<std::int32_t>(in, path));
    const auto scen = take<std::int32_t>(in, path);
    if (scen < 0 || scen > 4) raise(ErrorKind::MalformedFile, "bad scenario code");
    rec.scenario = static_cast<Scenario>(scen);
    const auto n = take<std::uint64_t>(in, path);
    const auto subject_len = take<std::uint32_t>(in, path);
    const auto prov_len = take<std::uint32_t>(in, path);
    rec.subject_id.resize(subject_len);
    in.read(rec.subject_id.data(), subject_len);
    rec.provenance.resize(prov_len);
    in.read(rec.provenance.data(), prov_len);
    if (!in) raise(ErrorKind::MalformedFile, "truncated file '" + path + "'");

    rec.ecg.resize(n);
    rec.pcg.resize(n);
    in.read(reinterpret_cast<char*>(rec.ecg.data()), static_cast<std::streamsize>(n * 8));
    in.read(reinterpret_cast<char*>(rec.pcg.data()), static_cast<std::streamsize>(n * 8));
    if (!in) raise(ErrorKind::MalformedFile, "truncated samples in '" + path + "'");
    rec.validate();
    return rec;
}

void write_binary(const std::string& path, const Record& rec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot write '" + path + "'");
    out.write(kBinMagic, 8);
    put<std::int32_t>(out, rec.fs);
    put<std::int32_t>(out, static_cast<std::int32_t>(rec.scenario));
    put<std::uint64_t>(out, rec.ecg.size());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.subject_id.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.provenance.size()));
    out.write(rec.subject_id.data(), static_cast<std::streamsize>(rec.subject_id.size()));
    out.write(rec.provenance.data(), static_cast<std::streamsize>(rec.provenance.size()));
    out.write(reinterpret_cast<const char*>(rec.ecg.data()),
              static_cast<std::streamsize>(rec.ecg.size() * 8));
    out.write(reinterpret_cast<const char*>(rec.pcg.data()),
              static_cast<std::streamsize>(rec.pcg.size() * 8));
    if (!out) raise(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

constexpr std::array<const char*, 6> kFiducialCols = {"qrs_on", "r_peak", "qrs_off",
                                                      "t_on",   "t_peak", "t_off"};

}  // namespace

Record load_record(const std::string& path, RecordFormat format) {
    return format == RecordFormat::PairedCsv ? load_csv(path) : load_binary(path);
}

void write_record(const std::string& path, const Record& record, RecordFormat format) {
    record.validate();
    if (format == RecordFormat::PairedCsv)
        write_csv(path, record);
    else
        write_binary(path, record);
}

FiducialSet load_fiducials(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) raise(ErrorKind::MalformedFile, "empty file '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        const auto cols = split(line, ',');
        if (cols.size() != 6) raise(ErrorKind::MalformedFile, "expected 6 header columns");
        for (std::size_t i = 0; i < 6; ++i)
            if (cols[i] != kFiducialCols[i])
                raise(ErrorKind::MalformedFile, "unexpected header column '" + cols[i] + "'");
    }

    FiducialSet set;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 6)
            raise(ErrorKind::MalformedFile,
                  "row " + std::to_string(row) + ": expected 6 cells, got " +
                      std::to_string(fields.size()));
        BeatAnnotation beat;
        std::optional<double>* slots[6] = {&beat.qrs_on, &beat.r_peak, &beat.qrs_off,
                                           &beat.t_on,   &beat.t_peak, &beat.t_off};
        for (std::size_t i = 0; i < 6; ++i) {
            if (fields[i].empty()) continue;
            *slots[i] = parse_sample(fields[i], row);
        }
        set.beats.push_back(beat);
    }
    set.validate();
    return set;
}

void write_fiducials(const std::string& path, const FiducialSet& fiducials) {
    fiducials.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot write '" + path + "'");
    out << "qrs_on,r_peak,qrs_off,t_on,t_peak,t_off\n";
    char buf[32];
    for (const BeatAnnotation& b : fiducials.beats) {
        const std::optional<double>* slots[6] = {&b.qrs_on, &b.r_peak, &b.qrs_off,
                                                 &b.t_on,   &b.t_peak, &b.t_off};
        for (std::size_t i = 0; i < 6; ++i) {
            if (slots[i]->has_value()) {
                std::snprintf(buf, sizeof buf, "%.17g", **slots[i]);
                out << buf;
            }
            out << (i + 1 < 6 ? "," : "\n");
        }
    }
    if (!out) raise(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

}  // namespace ecgpcg
