#include "gjf/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gjf {

std::string format_double(double v) {
    char buf[40];
    // shortest representation that round-trips; a higher precision can still
    // print fewer characters (10 vs 1e+01), so peek one step further
    std::string best;
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back != v) continue;
        best = buf;
        if (prec < 17) {
            std::snprintf(buf, sizeof(buf), "%.*g", prec + 1, v);
            std::sscanf(buf, "%lf", &back);
            if (back == v && std::strlen(buf) < best.size()) best = buf;
        }
        return best;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void ensure_directory(const std::string& dir) {
    std::filesystem::create_directories(dir);
}

void write_text_file(const std::string& file, const std::string& content) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file);
    out << content;
}

std::string read_text_file(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
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
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']')
                throw std::runtime_error("config key " + key + ": unterminated array");
            std::vector<double> vals;
            std::string body = value.substr(1, value.size() - 2);
            std::istringstream items(body);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                vals.push_back(std::stod(item));
            }
            kv.arrays[key] = std::move(vals);
        } else {
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            kv.scalars[key] = value;
        }
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& file) {
    return parse(read_text_file(file));
}

bool KeyValues::has(const std::string& key) const {
    return scalars.count(key) > 0 || arrays.count(key) > 0;
}

double KeyValues::num(const std::string& key, double fallback) const {
    const auto it = scalars.find(key);
    if (it == scalars.end()) return fallback;
    return std::stod(it->second);
}

long KeyValues::integer(const std::string& key, long fallback) const {
    const auto it = scalars.find(key);
    if (it == scalars.end()) return fallback;
    return std::stol(it->second);
}

bool KeyValues::boolean(const std::string& key, bool fallback) const {
    const auto it = scalars.find(key);
    if (it == scalars.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config key " + key + ": expected boolean");
}

std::string KeyValues::str(const std::string& key, const std::string& fallback) const {
    const auto it = scalars.find(key);
    return it == scalars.end() ? fallback : it->second;
}

std::vector<double> KeyValues::num_array(const std::string& key,
                                         const std::vector<double>& fallback) const {
    const auto it = arrays.find(key);
    return it == arrays.end() ? fallback : it->second;
}

}  // namespace gjf
