#pragma once

#include <map>
#include <string>

namespace ecgpcg::kv {

// Flat key=value text: one pair per line, '#' starts a comment, blank lines
// are skipped. Keys are unique; duplicates are a MalformedFile error.
using Map = std::map<std::string, std::string>;

Map parse(const std::string& text);
std::string serialize(const Map& m);

Map read_file(const std::string& path);
void write_file(const std::string& path, const Map& m);

const std::string& require(const Map& m, const std::string& key);
std::string get(const Map& m, const std::string& key, const std::string& fallback);
double get_num(const Map& m, const std::string& key, double fallback);
long get_int(const Map& m, const std::string& key, long fallback);
bool get_bool(const Map& m, const std::string& key, bool fallback);

std::string format_num(double v);

}  // namespace ecgpcg::kv
