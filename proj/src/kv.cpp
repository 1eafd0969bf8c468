#include "ecgpcg/kv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ecgpcg/error.hpp"

namespace ecgpcg::kv {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Map parse(const std::string& text) {
    Map out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(ErrorKind::MalformedFile,
                  "line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            raise(ErrorKind::MalformedFile, "line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second)
            raise(ErrorKind::MalformedFile,
                  "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return out;
}

std::string serialize(const Map& m) {
    std::string out;
    for (const auto& [k, v] : m) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

Map read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::IoFailure, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void write_file(const std::string& path, const Map& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::IoFailure, "cannot write '" + path + "'");
    out << serialize(m);
    if (!out) raise(ErrorKind::IoFailure, "write failed for '" + path + "'");
}

const std::string& require(const Map& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) raise(ErrorKind::MalformedFile, "missing key '" + key + "'");
    return it->second;
}

std::string get(const Map& m, const std::string& key, const std::string& fallback) {
    auto it = m.find(key);
    return it == m.end() ? fallback : it->second;
}

double get_num(const Map& m, const std::string& key, double fallback) {
    auto it = m.find(key);
    if (it == m.end()) return fallback;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (errno != 0 || end == it->second.c_str() || *end != '\0')
        raise(ErrorKind::MalformedFile, "key '" + key + "': not a number: '" + it->second + "'");
    return v;
}

long get_int(const Map& m, const std::string& key, long fallback) {
    auto it = m.find(key);
    if (it == m.end()) return fallback;
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(it->second.c_str(), &end, 10);
    if (errno != 0 || end == it->second.c_str() || *end != '\0')
        raise(ErrorKind::MalformedFile, "key '" + key + "': not an integer: '" + it->second + "'");
    return v;
}

bool get_bool(const Map& m, const std::string& key, bool fallback) {
    auto it = m.find(key);
    if (it == m.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    raise(ErrorKind::MalformedFile, "key '" + key + "': not a boolean: '" + it->second + "'");
}

std::string format_num(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace ecgpcg::kv
