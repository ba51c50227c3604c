#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace statiocl {

/// Line-oriented key=value file with [section] headers.
///
/// Grammar, one construct per line:
///   blank line or line starting with '#' or ';'  -> ignored
///   [name]                                       -> starts a section
///   key = value                                  -> entry in the current section
/// Keys and values are trimmed of surrounding whitespace. Entries before the
/// first header belong to the unnamed section "". Duplicate sections or
/// duplicate keys within a section are errors.
struct KvEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

struct KvSection {
    std::string name;
    std::vector<KvEntry> entries;
    std::size_t line = 0;

    [[nodiscard]] const KvEntry* find(const std::string& key) const;
};

struct KvFile {
    std::string source;
    std::vector<KvSection> sections;

    [[nodiscard]] const KvSection* find(const std::string& name) const;
};

/// Throws ConfigError naming `source` and the line on malformed input.
KvFile parse_kv(const std::string& text, const std::string& source);
KvFile read_kv_file(const std::filesystem::path& path);

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

/// Strict scalar parsers; throw ConfigError mentioning `what` on failure.
double parse_double(std::string_view s, const std::string& what);
long long parse_int(std::string_view s, const std::string& what);
std::size_t parse_size(std::string_view s, const std::string& what);
bool parse_bool(std::string_view s, const std::string& what);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

}  // namespace statiocl
