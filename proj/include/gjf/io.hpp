#pragma once

#include <map>
#include <string>
#include <vector>

namespace gjf {

// Shortest round-trip decimal representation of a double ("%.17g" trimmed),
// so repeated runs emit byte-identical tables.
std::string format_double(double v);

void ensure_directory(const std::string& dir);
void write_text_file(const std::string& file, const std::string& content);
std::string read_text_file(const std::string& file);

// Flat key = value document: numbers, booleans, quoted strings and
// [v1, v2, ...] numeric arrays; '#' starts a comment.
struct KeyValues {
    std::map<std::string, std::string> scalars;
    std::map<std::string, std::vector<double>> arrays;

    static KeyValues parse(const std::string& text);
    static KeyValues parse_file(const std::string& file);

    bool has(const std::string& key) const;
    double num(const std::string& key, double fallback) const;
    long integer(const std::string& key, long fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string str(const std::string& key, const std::string& fallback) const;
    std::vector<double> num_array(const std::string& key,
                                  const std::vector<double>& fallback) const;
};

}  // namespace gjf
