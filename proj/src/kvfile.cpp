#include "statiocl/kvfile.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "statiocl/error.hpp"

namespace statiocl {

const KvEntry* KvSection::find(const std::string& key) const {
    for (const auto& e : entries)
        if (e.key == key) return &e;
    return nullptr;
}

const KvSection* KvFile::find(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

KvFile parse_kv(const std::string& text, const std::string& source) {
    KvFile file;
    file.source = source;
    file.sections.push_back(KvSection{"", {}, 0});
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    auto where = [&] { return source + ":" + std::to_string(line_no); };
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError(where() + ": malformed section header '" + line + "'");
            }
            std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
            if (file.find(name) != nullptr) {
                throw ConfigError(where() + ": duplicate section [" + name + "]");
            }
            file.sections.push_back(KvSection{name, {}, line_no});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where() + ": expected key=value, got '" + line + "'");
        }
        KvEntry entry{trim(std::string_view(line).substr(0, eq)),
                      trim(std::string_view(line).substr(eq + 1)), line_no};
        if (entry.key.empty()) {
            throw ConfigError(where() + ": empty key");
        }
        KvSection& section = file.sections.back();
        if (section.find(entry.key) != nullptr) {
            throw ConfigError(where() + ": duplicate key '" + entry.key + "'");
        }
        section.entries.push_back(std::move(entry));
    }
    return file;
}

KvFile read_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv(buf.str(), path.string());
}

double parse_double(std::string_view s, const std::string& what) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError(what + ": not a number: '" + t + "'");
    }
    return v;
}

long long parse_int(std::string_view s, const std::string& what) {
    const std::string t = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError(what + ": not an integer: '" + t + "'");
    }
    return v;
}

std::size_t parse_size(std::string_view s, const std::string& what) {
    const long long v = parse_int(s, what);
    if (v < 0) {
        throw ConfigError(what + ": must be non-negative, got " + std::to_string(v));
    }
    return static_cast<std::size_t>(v);
}

bool parse_bool(std::string_view s, const std::string& what) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(what + ": not a boolean: '" + t + "'");
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace statiocl
